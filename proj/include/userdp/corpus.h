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

#ifndef USERDP_CORPUS_H_
#define USERDP_CORPUS_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace userdp::corpus {

// Token ids are raw byte values 0..255 plus one separator id used when
// records are concatenated into a document.
inline constexpr std::uint16_t kSeparatorId = 256;
inline constexpr int kVocabSize = 257;

struct Record {
  std::vector<std::uint16_t> tokens;
  // Position of this record within its unit's original record list; for
  // sampled chunks, the start offset within the concatenated document.
  std::size_t source_index = 0;
};

// One privacy unit (a user) and the records attributed to it.
struct Unit {
  std::string name;
  std::vector<Record> records;
};

// Units keep insertion order; iteration over units is deterministic and all
// sampling is defined against that order.
class UserCorpus {
 public:
  // Returns the index of the named unit, creating it if absent.
  std::size_t AddUnit(const std::string& name);
  void AddRecord(std::size_t unit_index, Record record);

  const Unit& unit(std::size_t i) const { return units_.at(i); }
  const std::vector<Unit>& units() const { return units_; }
  std::size_t num_units() const { return units_.size(); }
  std::size_t total_records() const;

  bool HasUnit(const std::string& name) const;
  // Throws std::out_of_range with the unit name if absent.
  std::size_t FindUnit(const std::string& name) const;

 private:
  std::vector<Unit> units_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct UnitStats {
  std::size_t num_units = 0;
  std::size_t total_records = 0;
  double avg_records = 0.0;
  std::size_t min_records = 0;
  std::size_t max_records = 0;
  // Even counts average the two middle values.
  double median_records = 0.0;
};

enum class SelectionStrategy {
  kRandom,
  kLongest,
  kShortest,
  kHighestPpl,
  kLowestPpl,
  kRandomChunk,
};

// Throws ConfigError on unknown names.
SelectionStrategy ParseStrategy(std::string_view name);
std::string_view StrategyName(SelectionStrategy strategy);

// Scores one record of a unit; higher means more surprising to the scoring
// model. Required by the ppl strategies, ignored by the others.
using RecordScorer = std::function<double(std::size_t unit_index, const Record& record)>;

struct SynthSpec {
  int num_units = 100;

  enum class CountLaw { kConstant, kPowerLaw };
  CountLaw count_law = CountLaw::kConstant;
  int records_constant = 3;
  // Pareto shape for the power-law record count, truncated to
  // [1, powerlaw_max].
  double powerlaw_alpha = 1.2;
  int powerlaw_max = 50;

  enum class LenLaw { kConstant, kUniform };
  LenLaw len_law = LenLaw::kConstant;
  int len_constant = 40;
  int len_min = 20;
  int len_max = 80;
};

// Reads JSONL with one object per line: {"user_id": ..., "text": ...} or
// {"user_id": ..., "tokens": [...]}. Text is tokenized as raw bytes and split
// into records of at most max_seq_len tokens. Repeated user names append
// records to the same unit. Throws ParseError with the line number on
// malformed lines, empty text, or out-of-range token ids.
UserCorpus LoadCorpus(const std::string& path, std::size_t max_seq_len);

// Writes one JSONL line per record. Records whose tokens are all plain bytes
// are written as "text", others (e.g. chunks containing separators) as a
// "tokens" array, so a write/load round trip preserves token content.
void WriteJsonl(const UserCorpus& corpus, const std::string& path);

// Synthetic corpus: every unit emits text from a Markov chain over
// 'a'..'z' and space that blends a corpus-wide transition preference with a
// per-unit one, so corpora from nearby seeds share learnable structure while
// units remain distinguishable.
UserCorpus SynthCorpus(const SynthSpec& spec, std::uint64_t seed);

UnitStats ComputeStats(const UserCorpus& c);

// Builds the k-records-per-unit training set: units with at least k records
// contribute k records chosen per strategy (random = without replacement),
// units with fewer contribute all of theirs plus uniform resamples with
// replacement. kRandomChunk instead samples k chunks of length
// min(max_seq_len, document length) from the unit's concatenated document.
// Throws ConfigError when a ppl strategy lacks a scorer or k < 1.
UserCorpus SelectRecords(const UserCorpus& c, SelectionStrategy strategy,
                         int k, std::size_t max_seq_len,
                         const RecordScorer* scorer, std::mt19937_64& rng);

// Per-unit variant of the above; used by mechanisms that resample each step.
std::vector<Record> SampleUserRecords(const UserCorpus& c,
                                      std::size_t unit_index, int k,
                                      SelectionStrategy strategy,
                                      std::size_t max_seq_len,
                                      const RecordScorer* scorer,
                                      std::mt19937_64& rng);

// Poisson subsampling: includes each unit independently with probability q,
// in unit order. q must lie in [0, 1].
std::vector<std::size_t> SampleUserBatch(const UserCorpus& c, double q,
                                         std::mt19937_64& rng);

}  // namespace userdp::corpus

#endif  // USERDP_CORPUS_H_
