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

#ifndef USERDP_MODELS_H_
#define USERDP_MODELS_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "userdp/corpus.h"

namespace userdp::models {

// A differentiable scalar loss over flat parameters. Parameters and
// gradients share one fixed layout, so a gradient vector applies to the
// parameter vector index by index.
class Model {
 public:
  virtual ~Model() = default;

  std::size_t dim() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  // Throws ConfigError on size mismatch.
  void set_parameters(std::span<const double> p);
  // Gradient step: params -= eta * grad.
  void ApplyUpdate(std::span<const double> grad, double eta);

  // Mean per-position loss of one record; when grad is non-null it is
  // resized to dim() and overwritten with d(loss)/d(params). Throws
  // ConfigError for records shorter than min_record_tokens().
  virtual double LossAndGradient(const corpus::Record& record,
                                 std::vector<double>* grad) const = 0;
  double Loss(const corpus::Record& record) const {
    return LossAndGradient(record, nullptr);
  }

  // Shortest record this model can score.
  virtual std::size_t min_record_tokens() const = 0;
  // Weight of a record in corpus-level metrics (prediction positions for the
  // LM); 0 for unscorable records.
  virtual double loss_weight(const corpus::Record& record) const = 0;

  virtual std::string kind() const = 0;

 protected:
  std::vector<double> params_;
};

struct CharLmConfig {
  int d_emb = 8;
  int context = 8;  // window of preceding tokens fed to the predictor
  int d_h = 64;
};

// Byte-level language model: each position p >= 1 is predicted from the
// embeddings of the context tokens before it (left-padded with the separator
// id) through one tanh hidden layer. Parameter layout, in order:
// embeddings (vocab x d_emb), input weights (context*d_emb x d_h), hidden
// bias, output weights (d_h x vocab), output bias.
class CharLm : public Model {
 public:
  CharLm(const CharLmConfig& cfg, std::uint64_t seed);

  double LossAndGradient(const corpus::Record& record,
                         std::vector<double>* grad) const override;
  std::size_t min_record_tokens() const override { return 2; }
  double loss_weight(const corpus::Record& record) const override {
    return record.tokens.size() < 2 ? 0.0
                                    : static_cast<double>(record.tokens.size() - 1);
  }
  std::string kind() const override { return "char_lm"; }

  const CharLmConfig& config() const { return cfg_; }
  static std::size_t DimFor(const CharLmConfig& cfg);

 private:
  CharLmConfig cfg_;
};

// Squared-distance loss ||theta - x||^2 against a fixed table of points; a
// record's two leading tokens encode the point index (row = t0 * 256 + t1).
// The full-corpus optimum is the mean of the referenced points, which makes
// convergence checkable in closed form.
class MeanEstimation : public Model {
 public:
  // points is row-major num_points x dim.
  MeanEstimation(std::vector<std::vector<double>> points);

  double LossAndGradient(const corpus::Record& record,
                         std::vector<double>* grad) const override;
  std::size_t min_record_tokens() const override { return 2; }
  double loss_weight(const corpus::Record&) const override { return 1.0; }
  std::string kind() const override { return "mean_estimation"; }

  std::size_t num_points() const { return points_.size(); }
  const std::vector<double>& point(std::size_t i) const { return points_.at(i); }
  static corpus::Record EncodePoint(std::size_t index);
  static std::size_t DecodePoint(const corpus::Record& record);

 private:
  std::vector<std::vector<double>> points_;
};

// Token-weighted perplexity: exp of the loss-weight-averaged record losses.
// Records below min_record_tokens are skipped; throws ConfigError when
// nothing is scorable.
double Perplexity(const Model& model, const corpus::UserCorpus& corpus);

// Scorer for the ppl selection strategies: exp(record loss) under the given
// model, 0 for unscorable records.
corpus::RecordScorer MakePplScorer(const Model& model);

// Checkpoint: short JSON header describing the model followed by the raw
// little-endian parameter doubles; the round trip is bit-exact.
void SaveCheckpoint(const Model& model, const std::string& path);
struct Checkpoint {
  std::string kind;
  CharLmConfig char_lm;  // valid when kind == "char_lm"
  std::vector<double> parameters;
};
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace userdp::models

#endif  // USERDP_MODELS_H_
