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

#include "userdp/models.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "userdp/errors.h"
#include "userdp/rng.h"

namespace userdp::models {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kVocab = corpus::kVocabSize;
constexpr char kCheckpointMagic[] = "UDPC1\n";

struct LmLayout {
  int in;          // context * d_emb
  std::size_t e;   // embedding offset (always 0)
  std::size_t w1;
  std::size_t b1;
  std::size_t w2;
  std::size_t b2;
  std::size_t total;
};

LmLayout LayoutFor(const CharLmConfig& cfg) {
  LmLayout l;
  l.in = cfg.context * cfg.d_emb;
  l.e = 0;
  l.w1 = static_cast<std::size_t>(kVocab) * cfg.d_emb;
  l.b1 = l.w1 + static_cast<std::size_t>(l.in) * cfg.d_h;
  l.w2 = l.b1 + cfg.d_h;
  l.b2 = l.w2 + static_cast<std::size_t>(cfg.d_h) * kVocab;
  l.total = l.b2 + kVocab;
  return l;
}

}  // namespace

void Model::set_parameters(std::span<const double> p) {
  if (p.size() != params_.size()) {
    throw ConfigError("parameter vector size " + std::to_string(p.size()) +
                      " does not match model dimension " +
                      std::to_string(params_.size()));
  }
  std::copy(p.begin(), p.end(), params_.begin());
}

void Model::ApplyUpdate(std::span<const double> grad, double eta) {
  if (grad.size() != params_.size()) {
    throw ConfigError("gradient size " + std::to_string(grad.size()) +
                      " does not match model dimension " +
                      std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i] -= eta * grad[i];
  }
}

std::size_t CharLm::DimFor(const CharLmConfig& cfg) {
  return LayoutFor(cfg).total;
}

CharLm::CharLm(const CharLmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.d_emb < 1 || cfg.context < 1 || cfg.d_h < 1) {
    throw ConfigError("char_lm needs d_emb, context, and d_h all >= 1");
  }
  LmLayout l = LayoutFor(cfg);
  params_.assign(l.total, 0.0);

  std::mt19937_64 rng = SubStream(seed, "model.init");
  auto fill = [&](std::size_t off, std::size_t n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = u(rng);
  };
  fill(l.e, l.w1 - l.e, 0.1);
  fill(l.w1, static_cast<std::size_t>(l.in) * cfg.d_h, 1.0 / std::sqrt(l.in));
  fill(l.w2, static_cast<std::size_t>(cfg.d_h) * kVocab, 1.0 / std::sqrt(cfg.d_h));
  // biases stay zero
}

double CharLm::LossAndGradient(const corpus::Record& record,
                               std::vector<double>* grad) const {
  const auto& toks = record.tokens;
  const int len = static_cast<int>(toks.size());
  if (len < 2) {
    throw ConfigError("record too short to score: needs at least 2 tokens, got " +
                      std::to_string(len));
  }
  for (std::uint16_t t : toks) {
    if (t >= kVocab) {
      throw ConfigError("token id " + std::to_string(t) + " outside vocabulary");
    }
  }

  const LmLayout l = LayoutFor(cfg_);
  const int de = cfg_.d_emb, ctx = cfg_.context, dh = cfg_.d_h;
  const int num_pos = len - 1;
  const double* p = params_.data();

  Eigen::Map<const RowMat> e(p + l.e, kVocab, de);
  Eigen::Map<const RowMat> w1(p + l.w1, l.in, dh);
  Eigen::Map<const Eigen::VectorXd> b1(p + l.b1, dh);
  Eigen::Map<const RowMat> w2(p + l.w2, dh, kVocab);
  Eigen::Map<const Eigen::VectorXd> b2(p + l.b2, kVocab);

  // Column c predicts toks[c + 1] from the ctx tokens before it, left-padded
  // with the separator.
  Eigen::MatrixXd x(l.in, num_pos);
  auto token_at = [&](int pos) -> int {
    return pos < 0 ? corpus::kSeparatorId : toks[static_cast<std::size_t>(pos)];
  };
  for (int c = 0; c < num_pos; ++c) {
    const int predict = c + 1;
    for (int w = 0; w < ctx; ++w) {
      int tok = token_at(predict - ctx + w);
      x.block(w * de, c, de, 1) = e.row(tok).transpose();
    }
  }

  Eigen::MatrixXd h = (w1.transpose() * x).colwise() + b1;
  h = h.array().tanh().matrix();
  Eigen::MatrixXd z = (w2.transpose() * h).colwise() + b2;

  double total = 0.0;
  Eigen::VectorXd lse(num_pos);
  for (int c = 0; c < num_pos; ++c) {
    double m = z.col(c).maxCoeff();
    double s = (z.col(c).array() - m).exp().sum();
    lse[c] = m + std::log(s);
    total += lse[c] - z(toks[static_cast<std::size_t>(c + 1)], c);
  }
  const double loss = total / num_pos;
  if (grad == nullptr) return loss;

  grad->assign(l.total, 0.0);
  double* g = grad->data();

  Eigen::MatrixXd dz(kVocab, num_pos);
  for (int c = 0; c < num_pos; ++c) {
    dz.col(c) = (z.col(c).array() - lse[c]).exp();
    dz(toks[static_cast<std::size_t>(c + 1)], c) -= 1.0;
  }
  dz /= static_cast<double>(num_pos);

  Eigen::Map<Eigen::VectorXd>(g + l.b2, kVocab) = dz.rowwise().sum();
  Eigen::Map<RowMat>(g + l.w2, dh, kVocab) = h * dz.transpose();

  Eigen::MatrixXd dh_pre =
      (w2 * dz).cwiseProduct((1.0 - h.array().square()).matrix());
  Eigen::Map<Eigen::VectorXd>(g + l.b1, dh) = dh_pre.rowwise().sum();
  Eigen::Map<RowMat>(g + l.w1, l.in, dh) = x * dh_pre.transpose();

  Eigen::MatrixXd dx = w1 * dh_pre;
  Eigen::Map<RowMat> ge(g + l.e, kVocab, de);
  for (int c = 0; c < num_pos; ++c) {
    const int predict = c + 1;
    for (int w = 0; w < ctx; ++w) {
      int tok = token_at(predict - ctx + w);
      ge.row(tok) += dx.block(w * de, c, de, 1).transpose();
    }
  }
  return loss;
}

MeanEstimation::MeanEstimation(std::vector<std::vector<double>> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("mean estimation needs at least one point");
  const std::size_t d = points_.front().size();
  if (d == 0) throw ConfigError("mean estimation points need dimension >= 1");
  for (const auto& pt : points_) {
    if (pt.size() != d) {
      throw ConfigError("mean estimation points must share one dimension");
    }
  }
  params_.assign(d, 0.0);
}

corpus::Record MeanEstimation::EncodePoint(std::size_t index) {
  if (index >= 65536) throw ConfigError("point index above 65535");
  corpus::Record r;
  r.tokens = {static_cast<std::uint16_t>(index / 256),
              static_cast<std::uint16_t>(index % 256)};
  r.source_index = index;
  return r;
}

std::size_t MeanEstimation::DecodePoint(const corpus::Record& record) {
  if (record.tokens.size() < 2) {
    throw ConfigError("point record needs 2 index tokens");
  }
  if (record.tokens[0] > 255 || record.tokens[1] > 255) {
    throw ConfigError("point index tokens must be plain bytes");
  }
  return static_cast<std::size_t>(record.tokens[0]) * 256 + record.tokens[1];
}

double MeanEstimation::LossAndGradient(const corpus::Record& record,
                                       std::vector<double>* grad) const {
  std::size_t idx = DecodePoint(record);
  if (idx >= points_.size()) {
    throw ConfigError("point index " + std::to_string(idx) + " out of range");
  }
  const std::vector<double>& x = points_[idx];
  double loss = 0.0;
  if (grad != nullptr) grad->assign(params_.size(), 0.0);
  for (std::size_t j = 0; j < params_.size(); ++j) {
    double diff = params_[j] - x[j];
    loss += diff * diff;
    if (grad != nullptr) (*grad)[j] = 2.0 * diff;
  }
  return loss;
}

double Perplexity(const Model& model, const corpus::UserCorpus& corpus) {
  double total_weight = 0.0;
  double total_loss = 0.0;
  for (const auto& unit : corpus.units()) {
    for (const auto& record : unit.records) {
      double w = model.loss_weight(record);
      if (w <= 0.0) continue;
      total_weight += w;
      total_loss += w * model.Loss(record);
    }
  }
  if (total_weight == 0.0) {
    throw ConfigError("corpus has no records the model can score");
  }
  return std::exp(total_loss / total_weight);
}

corpus::RecordScorer MakePplScorer(const Model& model) {
  return [&model](std::size_t, const corpus::Record& record) {
    if (record.tokens.size() < model.min_record_tokens()) return 0.0;
    return std::exp(model.Loss(record));
  };
}

void SaveCheckpoint(const Model& model, const std::string& path) {
  nlohmann::ordered_json header;
  header["kind"] = model.kind();
  if (const auto* lm = dynamic_cast<const CharLm*>(&model)) {
    header["d_emb"] = lm->config().d_emb;
    header["context"] = lm->config().context;
    header["d_h"] = lm->config().d_h;
  }
  header["dim"] = model.dim();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open checkpoint '" + path + "' for writing");
  out << kCheckpointMagic << header.dump() << "\n";
  auto params = model.parameters();
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw ParseError("failed writing checkpoint '" + path + "'");
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");

  std::string magic(sizeof(kCheckpointMagic) - 1, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) {
    throw ParseError("'" + path + "' is not a checkpoint file");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw ParseError("checkpoint '" + path + "' is missing its header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("checkpoint '" + path + "' has a bad header: " + e.what());
  }
  if (!header.contains("kind") || !header.contains("dim")) {
    throw ParseError("checkpoint '" + path + "' header lacks kind/dim");
  }

  Checkpoint ckpt;
  ckpt.kind = header["kind"].get<std::string>();
  if (ckpt.kind == "char_lm") {
    ckpt.char_lm.d_emb = header.value("d_emb", 0);
    ckpt.char_lm.context = header.value("context", 0);
    ckpt.char_lm.d_h = header.value("d_h", 0);
  }
  std::size_t dim = header["dim"].get<std::size_t>();
  ckpt.parameters.resize(dim);
  in.read(reinterpret_cast<char*>(ckpt.parameters.data()),
          static_cast<std::streamsize>(dim * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(dim * sizeof(double))) {
    throw ParseError("checkpoint '" + path + "' is truncated");
  }
  return ckpt;
}

}  // namespace userdp::models
