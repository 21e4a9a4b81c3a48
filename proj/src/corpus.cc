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

#include "userdp/corpus.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "userdp/errors.h"
#include "userdp/rng.h"

namespace userdp::corpus {
namespace {

using nlohmann::json;

constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz ";

std::string LineContext(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

bool PrintableAscii(const std::vector<std::uint16_t>& tokens) {
  for (std::uint16_t t : tokens) {
    if (t == '\n' || t == '\t') continue;
    if (t < 32 || t > 126) return false;
  }
  return true;
}

}  // namespace

std::size_t UserCorpus::AddUnit(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  units_.push_back(Unit{name, {}});
  index_.emplace(name, units_.size() - 1);
  return units_.size() - 1;
}

void UserCorpus::AddRecord(std::size_t unit_index, Record record) {
  units_.at(unit_index).records.push_back(std::move(record));
}

std::size_t UserCorpus::total_records() const {
  std::size_t n = 0;
  for (const Unit& u : units_) n += u.records.size();
  return n;
}

bool UserCorpus::HasUnit(const std::string& name) const {
  return index_.count(name) > 0;
}

std::size_t UserCorpus::FindUnit(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("no unit named '" + name + "'");
  }
  return it->second;
}

SelectionStrategy ParseStrategy(std::string_view name) {
  if (name == "random") return SelectionStrategy::kRandom;
  if (name == "longest") return SelectionStrategy::kLongest;
  if (name == "shortest") return SelectionStrategy::kShortest;
  if (name == "highest_ppl") return SelectionStrategy::kHighestPpl;
  if (name == "lowest_ppl") return SelectionStrategy::kLowestPpl;
  if (name == "random_chunk") return SelectionStrategy::kRandomChunk;
  throw ConfigError("unknown selection strategy '" + std::string(name) + "'");
}

std::string_view StrategyName(SelectionStrategy strategy) {
  switch (strategy) {
    case SelectionStrategy::kRandom: return "random";
    case SelectionStrategy::kLongest: return "longest";
    case SelectionStrategy::kShortest: return "shortest";
    case SelectionStrategy::kHighestPpl: return "highest_ppl";
    case SelectionStrategy::kLowestPpl: return "lowest_ppl";
    case SelectionStrategy::kRandomChunk: return "random_chunk";
  }
  throw ConfigError("invalid selection strategy value");
}

UserCorpus LoadCorpus(const std::string& path, std::size_t max_seq_len) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file '" + path + "'");

  UserCorpus c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(LineContext(path, line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("user_id") || !obj["user_id"].is_string()) {
      throw ParseError(LineContext(path, line_no) + ": expected an object with a string 'user_id' field");
    }
    const std::string user = obj["user_id"].get<std::string>();
    if (user.empty()) {
      throw ParseError(LineContext(path, line_no) + ": empty user name");
    }

    std::vector<std::uint16_t> tokens;
    if (obj.contains("tokens")) {
      if (obj.contains("text")) {
        throw ParseError(LineContext(path, line_no) + ": line has both 'text' and 'tokens'");
      }
      if (!obj["tokens"].is_array()) {
        throw ParseError(LineContext(path, line_no) + ": 'tokens' must be an array");
      }
      for (const auto& t : obj["tokens"]) {
        if (!t.is_number_integer()) {
          throw ParseError(LineContext(path, line_no) + ": token ids must be integers");
        }
        long long v = t.get<long long>();
        if (v < 0 || v > kSeparatorId) {
          throw ParseError(LineContext(path, line_no) + ": token id " + std::to_string(v) +
                           " outside [0, " + std::to_string(kSeparatorId) + "]");
        }
        tokens.push_back(static_cast<std::uint16_t>(v));
      }
    } else if (obj.contains("text") && obj["text"].is_string()) {
      const std::string& text = obj["text"].get_ref<const std::string&>();
      tokens.reserve(text.size());
      for (unsigned char b : text) tokens.push_back(b);
    } else {
      throw ParseError(LineContext(path, line_no) + ": expected a 'text' string or 'tokens' array");
    }
    if (tokens.empty()) {
      throw ParseError(LineContext(path, line_no) + ": empty text for user '" + user + "'");
    }

    std::size_t unit = c.AddUnit(user);
    std::size_t limit = max_seq_len == 0 ? tokens.size() : max_seq_len;
    for (std::size_t off = 0; off < tokens.size(); off += limit) {
      std::size_t end = std::min(off + limit, tokens.size());
      Record r;
      r.tokens.assign(tokens.begin() + off, tokens.begin() + end);
      r.source_index = c.unit(unit).records.size();
      c.AddRecord(unit, std::move(r));
    }
  }
  if (c.num_units() == 0) {
    throw ParseError("corpus file '" + path + "' has no records");
  }
  return c;
}

void WriteJsonl(const UserCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (const Unit& u : corpus.units()) {
    for (const Record& r : u.records) {
      json obj;
      obj["user_id"] = u.name;
      if (PrintableAscii(r.tokens)) {
        std::string text;
        text.reserve(r.tokens.size());
        for (std::uint16_t t : r.tokens) text.push_back(static_cast<char>(t));
        obj["text"] = text;
      } else {
        obj["tokens"] = r.tokens;
      }
      out << obj.dump() << "\n";
    }
  }
  if (!out) throw ParseError("failed writing '" + path + "'");
}

UserCorpus SynthCorpus(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.num_units < 1) throw ConfigError("synth corpus needs num_units >= 1");
  if (spec.count_law == SynthSpec::CountLaw::kConstant && spec.records_constant < 1) {
    throw ConfigError("synth corpus needs records_constant >= 1");
  }
  if (spec.count_law == SynthSpec::CountLaw::kPowerLaw &&
      (spec.powerlaw_alpha <= 0 || spec.powerlaw_max < 1)) {
    throw ConfigError("synth power law needs alpha > 0 and powerlaw_max >= 1");
  }
  if (spec.len_law == SynthSpec::LenLaw::kConstant && spec.len_constant < 2) {
    throw ConfigError("synth corpus needs len_constant >= 2");
  }
  if (spec.len_law == SynthSpec::LenLaw::kUniform &&
      (spec.len_min < 2 || spec.len_max < spec.len_min)) {
    throw ConfigError("synth corpus needs 2 <= len_min <= len_max");
  }

  const int a = static_cast<int>(kAlphabet.size());
  std::mt19937_64 global_rng = SubStream(seed, "synth.global");
  std::uniform_int_distribution<int> pick(0, a - 1);
  std::vector<int> global_pref(a);
  for (int& p : global_pref) p = pick(global_rng);

  UserCorpus c;
  char name_buf[16];
  for (int u = 0; u < spec.num_units; ++u) {
    std::snprintf(name_buf, sizeof(name_buf), "u%05d", u);
    std::size_t unit = c.AddUnit(name_buf);

    std::mt19937_64 rng = SubStream(seed, "synth.unit", static_cast<std::uint64_t>(u));
    std::vector<int> user_pref(a);
    for (int& p : user_pref) p = pick(rng);

    int num_records = spec.records_constant;
    if (spec.count_law == SynthSpec::CountLaw::kPowerLaw) {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double x = std::pow(1.0 - unif(rng), -1.0 / spec.powerlaw_alpha);
      num_records = static_cast<int>(std::llround(x));
      num_records = std::clamp(num_records, 1, spec.powerlaw_max);
    }

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int r = 0; r < num_records; ++r) {
      int len = spec.len_constant;
      if (spec.len_law == SynthSpec::LenLaw::kUniform) {
        std::uniform_int_distribution<int> len_dist(spec.len_min, spec.len_max);
        len = len_dist(rng);
      }
      Record rec;
      rec.tokens.reserve(len);
      rec.source_index = r;
      int cur = pick(rng);
      rec.tokens.push_back(static_cast<std::uint16_t>(kAlphabet[cur]));
      for (int i = 1; i < len; ++i) {
        double roll = unif(rng);
        if (roll < 0.55) {
          cur = global_pref[cur];
        } else if (roll < 0.80) {
          cur = user_pref[cur];
        } else {
          cur = pick(rng);
        }
        rec.tokens.push_back(static_cast<std::uint16_t>(kAlphabet[cur]));
      }
      c.AddRecord(unit, std::move(rec));
    }
  }
  return c;
}

UnitStats ComputeStats(const UserCorpus& c) {
  UnitStats s;
  s.num_units = c.num_units();
  if (s.num_units == 0) return s;

  std::vector<std::size_t> counts;
  counts.reserve(s.num_units);
  for (const Unit& u : c.units()) counts.push_back(u.records.size());
  std::sort(counts.begin(), counts.end());

  s.total_records = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  s.avg_records = static_cast<double>(s.total_records) / static_cast<double>(s.num_units);
  s.min_records = counts.front();
  s.max_records = counts.back();
  std::size_t mid = counts.size() / 2;
  s.median_records = counts.size() % 2 == 1
                         ? static_cast<double>(counts[mid])
                         : (static_cast<double>(counts[mid - 1]) + static_cast<double>(counts[mid])) / 2.0;
  return s;
}

namespace {

std::vector<Record> SelectFromUnit(const Unit& u, std::size_t unit_index,
                                   int k, SelectionStrategy strategy,
                                   std::size_t max_seq_len,
                                   const RecordScorer* scorer,
                                   std::mt19937_64& rng) {
  if (k < 1) throw ConfigError("record selection needs k >= 1");
  const std::size_t m = u.records.size();
  if (m == 0) throw ConfigError("unit '" + u.name + "' has no records");

  if (strategy == SelectionStrategy::kRandomChunk) {
    if (max_seq_len == 0) {
      throw ConfigError("random_chunk selection needs max_seq_len >= 1");
    }
    std::vector<std::uint16_t> doc;
    for (std::size_t i = 0; i < m; ++i) {
      if (i > 0) doc.push_back(kSeparatorId);
      doc.insert(doc.end(), u.records[i].tokens.begin(), u.records[i].tokens.end());
    }
    const std::size_t chunk_len = std::min(max_seq_len, doc.size());
    std::uniform_int_distribution<std::size_t> start_dist(0, doc.size() - chunk_len);
    std::vector<Record> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      std::size_t start = start_dist(rng);
      Record r;
      r.tokens.assign(doc.begin() + start, doc.begin() + start + chunk_len);
      r.source_index = start;
      out.push_back(std::move(r));
    }
    return out;
  }

  if ((strategy == SelectionStrategy::kHighestPpl ||
       strategy == SelectionStrategy::kLowestPpl) &&
      scorer == nullptr) {
    throw ConfigError("strategy '" + std::string(StrategyName(strategy)) + "' needs a record scorer");
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  auto by_key = [&](auto key, bool descending) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      auto ka = key(a), kb = key(b);
      if (ka != kb) return descending ? ka > kb : ka < kb;
      return u.records[a].source_index < u.records[b].source_index;
    });
  };
  switch (strategy) {
    case SelectionStrategy::kRandom:
      std::shuffle(order.begin(), order.end(), rng);
      break;
    case SelectionStrategy::kLongest:
      by_key([&](std::size_t i) { return u.records[i].tokens.size(); }, true);
      break;
    case SelectionStrategy::kShortest:
      by_key([&](std::size_t i) { return u.records[i].tokens.size(); }, false);
      break;
    case SelectionStrategy::kHighestPpl:
      by_key([&](std::size_t i) { return (*scorer)(unit_index, u.records[i]); }, true);
      break;
    case SelectionStrategy::kLowestPpl:
      by_key([&](std::size_t i) { return (*scorer)(unit_index, u.records[i]); }, false);
      break;
    case SelectionStrategy::kRandomChunk:
      break;  // handled above
  }

  std::vector<Record> out;
  out.reserve(k);
  const std::size_t take = std::min<std::size_t>(k, m);
  for (std::size_t i = 0; i < take; ++i) out.push_back(u.records[order[i]]);
  if (m < static_cast<std::size_t>(k)) {
    // Short units are padded by resampling with replacement so every unit
    // contributes exactly k records.
    std::uniform_int_distribution<std::size_t> extra(0, m - 1);
    for (std::size_t i = m; i < static_cast<std::size_t>(k); ++i) {
      out.push_back(u.records[extra(rng)]);
    }
  }
  return out;
}

}  // namespace

UserCorpus SelectRecords(const UserCorpus& c, SelectionStrategy strategy,
                         int k, std::size_t max_seq_len,
                         const RecordScorer* scorer, std::mt19937_64& rng) {
  if (strategy == SelectionStrategy::kRandomChunk) {
    throw ConfigError(
        "random_chunk is a per-step sampling strategy, not a dataset "
        "preprocessing one");
  }
  UserCorpus out;
  for (std::size_t i = 0; i < c.num_units(); ++i) {
    const Unit& u = c.unit(i);
    std::size_t idx = out.AddUnit(u.name);
    for (Record& r : SelectFromUnit(u, i, k, strategy, max_seq_len, scorer, rng)) {
      out.AddRecord(idx, std::move(r));
    }
  }
  return out;
}

std::vector<Record> SampleUserRecords(const UserCorpus& c,
                                      std::size_t unit_index, int k,
                                      SelectionStrategy strategy,
                                      std::size_t max_seq_len,
                                      const RecordScorer* scorer,
                                      std::mt19937_64& rng) {
  return SelectFromUnit(c.unit(unit_index), unit_index, k, strategy,
                        max_seq_len, scorer, rng);
}

std::vector<std::size_t> SampleUserBatch(const UserCorpus& c, double q,
                                         std::mt19937_64& rng) {
  if (q < 0.0 || q > 1.0) {
    throw ConfigError("sampling probability must lie in [0, 1], got " + std::to_string(q));
  }
  std::vector<std::size_t> picked;
  std::bernoulli_distribution coin(q);
  for (std::size_t i = 0; i < c.num_units(); ++i) {
    if (coin(rng)) picked.push_back(i);
  }
  return picked;
}

}  // namespace userdp::corpus
