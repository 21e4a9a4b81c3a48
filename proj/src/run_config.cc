// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "userdp/run_config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string_view>

#include "userdp/errors.h"

namespace userdp::cli {
namespace {

std::string Trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> SplitList(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    std::string item = Trim(std::string_view(value).substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  RunConfig Run() {
    std::istringstream in(text_);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string body = Trim(line);
      if (body.empty() || body[0] == '#' || body[0] == ';') continue;
      if (body.front() == '[') {
        if (body.back() != ']') {
          throw ParseError("line " + std::to_string(line_no) +
                           ": unterminated section header");
        }
        section_ = body.substr(1, body.size() - 2);
        if (section_ != "run" && section_ != "corpus" && section_ != "eval" &&
            section_ != "model" && section_ != "analyze") {
          throw ConfigError("unknown section '[" + section_ + "]'");
        }
        continue;
      }
      std::size_t eq = body.find('=');
      if (eq == std::string::npos) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected 'key = value'");
      }
      if (section_.empty()) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": key outside any section");
      }
      std::string key = Trim(std::string_view(body).substr(0, eq));
      std::string value = Trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": empty key");
      }
      if (!seen_.insert(section_ + "." + key).second) {
        throw ConfigError("duplicate key '" + key + "' in [" + section_ + "]");
      }
      Apply(key, value);
    }
    return cfg_;
  }

 private:
  [[noreturn]] void UnknownKey(const std::string& key) {
    throw ConfigError("unknown key '" + key + "' in [" + section_ + "]");
  }

  double ParseDouble(const std::string& key, const std::string& value,
                     bool allow_inf = false) {
    if (allow_inf && value == "inf") {
      return std::numeric_limits<double>::infinity();
    }
    try {
      std::size_t used = 0;
      double v = std::stod(value, &used);
      // stod itself accepts "inf" and "nan"; only epsilon means it.
      if (used != value.size() || !std::isfinite(v)) {
        throw std::invalid_argument(value);
      }
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': bad number '" + value + "'");
    }
  }

  long long ParseInt(const std::string& key, const std::string& value) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': bad integer '" + value + "'");
    }
  }

  std::uint64_t ParseUint(const std::string& key, const std::string& value) {
    try {
      std::size_t used = 0;
      unsigned long long v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': bad integer '" + value + "'");
    }
  }

  void ApplyCorpus(CorpusSource& src, const std::string& key,
                   const std::string& value) {
    corpus::SynthSpec& spec = src.synth;
    if (key == "path") {
      src.path = value;
    } else if (key == "synth_units") {
      src.synth_units = static_cast<int>(ParseInt(key, value));
      spec.num_units = src.synth_units;
    } else if (key == "synth_count_law") {
      if (value == "constant") {
        spec.count_law = corpus::SynthSpec::CountLaw::kConstant;
      } else if (value == "powerlaw") {
        spec.count_law = corpus::SynthSpec::CountLaw::kPowerLaw;
      } else {
        throw ConfigError("key '" + key + "': unknown law '" + value + "'");
      }
    } else if (key == "synth_records_constant") {
      spec.records_constant = static_cast<int>(ParseInt(key, value));
    } else if (key == "synth_powerlaw_alpha") {
      spec.powerlaw_alpha = ParseDouble(key, value);
    } else if (key == "synth_powerlaw_max") {
      spec.powerlaw_max = static_cast<int>(ParseInt(key, value));
    } else if (key == "synth_len_law") {
      if (value == "constant") {
        spec.len_law = corpus::SynthSpec::LenLaw::kConstant;
      } else if (value == "uniform") {
        spec.len_law = corpus::SynthSpec::LenLaw::kUniform;
      } else {
        throw ConfigError("key '" + key + "': unknown law '" + value + "'");
      }
    } else if (key == "synth_len_constant") {
      spec.len_constant = static_cast<int>(ParseInt(key, value));
    } else if (key == "synth_len_min") {
      spec.len_min = static_cast<int>(ParseInt(key, value));
    } else if (key == "synth_len_max") {
      spec.len_max = static_cast<int>(ParseInt(key, value));
    } else {
      UnknownKey(key);
    }
  }

  void Apply(const std::string& key, const std::string& value) {
    if (section_ == "run") {
      mechanisms::TrainConfig& t = cfg_.train;
      if (key == "mechanism") {
        t.mechanism = mechanisms::ParseMechanism(value);
      } else if (key == "epsilon") {
        t.epsilon = ParseDouble(key, value, /*allow_inf=*/true);
      } else if (key == "delta") {
        cfg_.delta = ParseDouble(key, value);
      } else if (key == "clip_norm") {
        t.clip_norm = ParseDouble(key, value);
      } else if (key == "eta") {
        t.eta = ParseDouble(key, value);
      } else if (key == "steps") {
        t.steps = static_cast<int>(ParseInt(key, value));
      } else if (key == "record_batch") {
        t.record_batch = ParseDouble(key, value);
      } else if (key == "user_batch") {
        t.user_batch = ParseDouble(key, value);
      } else if (key == "k") {
        t.k = static_cast<int>(ParseInt(key, value));
      } else if (key == "strategy") {
        t.strategy = corpus::ParseStrategy(value);
      } else if (key == "max_seq_len") {
        long long v = ParseInt(key, value);
        if (v < 0) throw ConfigError("key 'max_seq_len': must be >= 0");
        t.max_seq_len = static_cast<std::size_t>(v);
      } else if (key == "tau") {
        t.tau = ParseDouble(key, value);
      } else if (key == "svt_sensitivity") {
        t.svt_sensitivity = ParseDouble(key, value);
      } else if (key == "eval_every") {
        t.eval_every = static_cast<int>(ParseInt(key, value));
      } else if (key == "sigma") {
        cfg_.sigma_override = ParseDouble(key, value);
      } else if (key == "group_accounting") {
        if (value == "mixture") {
          t.group_accounting = mechanisms::GroupAccounting::kMixture;
        } else if (value == "naive") {
          t.group_accounting = mechanisms::GroupAccounting::kNaive;
        } else {
          throw ConfigError("key 'group_accounting': unknown value '" + value +
                            "'");
        }
      } else if (key == "naive_form") {
        if (value == "standard") {
          t.naive_form = accounting::NaiveGroupForm::kStandard;
        } else if (value == "literal") {
          t.naive_form = accounting::NaiveGroupForm::kLiteral;
        } else {
          throw ConfigError("key 'naive_form': unknown value '" + value + "'");
        }
      } else if (key == "grid_spacing") {
        t.accounting.grid_spacing = ParseDouble(key, value);
      } else if (key == "rounding") {
        if (value == "pessimistic") {
          t.accounting.rounding = accounting::Rounding::kPessimistic;
        } else if (value == "optimistic") {
          t.accounting.rounding = accounting::Rounding::kOptimistic;
        } else {
          throw ConfigError("key 'rounding': unknown value '" + value + "'");
        }
      } else if (key == "tail_mass") {
        t.accounting.tail_mass = ParseDouble(key, value);
      } else if (key == "seed") {
        cfg_.seed = ParseUint(key, value);
      } else if (key == "out_dir") {
        cfg_.out_dir = value;
      } else {
        UnknownKey(key);
      }
    } else if (section_ == "corpus") {
      ApplyCorpus(cfg_.corpus, key, value);
    } else if (section_ == "eval") {
      ApplyCorpus(cfg_.eval, key, value);
    } else if (section_ == "model") {
      if (key == "kind") {
        if (value != "char_lm" && value != "mean_estimation") {
          throw ConfigError("key 'kind': unknown model '" + value + "'");
        }
        cfg_.model_kind = value;
      } else if (key == "d_emb") {
        cfg_.char_lm.d_emb = static_cast<int>(ParseInt(key, value));
      } else if (key == "context") {
        cfg_.char_lm.context = static_cast<int>(ParseInt(key, value));
      } else if (key == "d_h") {
        cfg_.char_lm.d_h = static_cast<int>(ParseInt(key, value));
      } else {
        UnknownKey(key);
      }
    } else if (section_ == "analyze") {
      AnalyzeConfig& a = cfg_.analyze;
      if (key == "mode") {
        if (value != "noise" && value != "concentration" && value != "sweep") {
          throw ConfigError("key 'mode': unknown analyze mode '" + value + "'");
        }
        a.mode = value;
      } else if (key == "ratios") {
        a.ratios.clear();
        for (const std::string& item : SplitList(value)) {
          a.ratios.push_back(ParseDouble(key, item));
        }
        if (a.ratios.empty()) throw ConfigError("key 'ratios': empty list");
      } else if (key == "noise_users") {
        a.noise_users = ParseDouble(key, value);
      } else if (key == "probe_users") {
        a.probe_users = static_cast<int>(ParseInt(key, value));
      } else if (key == "axis") {
        a.axis = value;
      } else if (key == "values") {
        a.values = SplitList(value);
      } else if (key == "axis2") {
        a.axis2 = value;
      } else if (key == "values2") {
        a.values2 = SplitList(value);
      } else if (key == "seeds") {
        a.seeds.clear();
        for (const std::string& item : SplitList(value)) {
          a.seeds.push_back(ParseUint(key, item));
        }
      } else {
        UnknownKey(key);
      }
    }
  }

  const std::string& text_;
  RunConfig cfg_;
  std::string section_;
  std::set<std::string> seen_;
};

std::string Fmt(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string Join(const std::vector<T>& items) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out << ',';
    if constexpr (std::is_same_v<T, double>) {
      out << Fmt(items[i]);
    } else {
      out << items[i];
    }
  }
  return out.str();
}

void SerializeCorpus(std::ostringstream& out, const char* section,
                     const CorpusSource& src) {
  const corpus::SynthSpec& s = src.synth;
  out << '[' << section << "]\n";
  out << "path = " << src.path << '\n';
  out << "synth_units = " << src.synth_units << '\n';
  out << "synth_count_law = "
      << (s.count_law == corpus::SynthSpec::CountLaw::kConstant ? "constant"
                                                                : "powerlaw")
      << '\n';
  out << "synth_records_constant = " << s.records_constant << '\n';
  out << "synth_powerlaw_alpha = " << Fmt(s.powerlaw_alpha) << '\n';
  out << "synth_powerlaw_max = " << s.powerlaw_max << '\n';
  out << "synth_len_law = "
      << (s.len_law == corpus::SynthSpec::LenLaw::kConstant ? "constant"
                                                            : "uniform")
      << '\n';
  out << "synth_len_constant = " << s.len_constant << '\n';
  out << "synth_len_min = " << s.len_min << '\n';
  out << "synth_len_max = " << s.len_max << '\n';
}

}  // namespace

RunConfig ParseRunConfig(const std::string& text) {
  return Parser(text).Run();
}

RunConfig ParseRunConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseRunConfig(buf.str());
}

std::string Serialize(const RunConfig& config) {
  const mechanisms::TrainConfig& t = config.train;
  std::ostringstream out;
  out << "[run]\n";
  out << "mechanism = " << mechanisms::MechanismName(t.mechanism) << '\n';
  out << "epsilon = " << Fmt(t.epsilon) << '\n';
  if (config.delta) out << "delta = " << Fmt(*config.delta) << '\n';
  out << "clip_norm = " << Fmt(t.clip_norm) << '\n';
  out << "eta = " << Fmt(t.eta) << '\n';
  out << "steps = " << t.steps << '\n';
  out << "record_batch = " << Fmt(t.record_batch) << '\n';
  out << "user_batch = " << Fmt(t.user_batch) << '\n';
  out << "k = " << t.k << '\n';
  out << "strategy = " << corpus::StrategyName(t.strategy) << '\n';
  out << "max_seq_len = " << t.max_seq_len << '\n';
  out << "tau = " << Fmt(t.tau) << '\n';
  out << "svt_sensitivity = " << Fmt(t.svt_sensitivity) << '\n';
  out << "eval_every = " << t.eval_every << '\n';
  if (config.sigma_override) {
    out << "sigma = " << Fmt(*config.sigma_override) << '\n';
  }
  out << "group_accounting = "
      << (t.group_accounting == mechanisms::GroupAccounting::kMixture
              ? "mixture"
              : "naive")
      << '\n';
  out << "naive_form = "
      << (t.naive_form == accounting::NaiveGroupForm::kStandard ? "standard"
                                                                : "literal")
      << '\n';
  out << "grid_spacing = " << Fmt(t.accounting.grid_spacing) << '\n';
  out << "rounding = "
      << (t.accounting.rounding == accounting::Rounding::kPessimistic
              ? "pessimistic"
              : "optimistic")
      << '\n';
  out << "tail_mass = " << Fmt(t.accounting.tail_mass) << '\n';
  out << "seed = " << config.seed << '\n';
  out << "out_dir = " << config.out_dir << '\n';
  out << '\n';
  SerializeCorpus(out, "corpus", config.corpus);
  out << '\n';
  SerializeCorpus(out, "eval", config.eval);
  out << '\n';
  out << "[model]\n";
  out << "kind = " << config.model_kind << '\n';
  out << "d_emb = " << config.char_lm.d_emb << '\n';
  out << "context = " << config.char_lm.context << '\n';
  out << "d_h = " << config.char_lm.d_h << '\n';
  out << '\n';
  const AnalyzeConfig& a = config.analyze;
  out << "[analyze]\n";
  if (!a.mode.empty()) out << "mode = " << a.mode << '\n';
  out << "ratios = " << Join(a.ratios) << '\n';
  out << "noise_users = " << Fmt(a.noise_users) << '\n';
  out << "probe_users = " << a.probe_users << '\n';
  if (!a.axis.empty()) out << "axis = " << a.axis << '\n';
  if (!a.values.empty()) out << "values = " << Join(a.values) << '\n';
  if (!a.axis2.empty()) out << "axis2 = " << a.axis2 << '\n';
  if (!a.values2.empty()) out << "values2 = " << Join(a.values2) << '\n';
  if (!a.seeds.empty()) out << "seeds = " << Join(a.seeds) << '\n';
  return out.str();
}

}  // namespace userdp::cli
