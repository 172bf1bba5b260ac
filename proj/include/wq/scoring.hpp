/**
 * Copyright 2026 The wqbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wq/common.hpp"
#include "wq/corpus.hpp"

// Scalar reward models and pairwise judges behind one interface, plus the
// scalar -> pairwise inequality rule with epsilon ties.
namespace wq::scoring {

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 10.0;
inline constexpr double kDefaultEpsilon = 0.001;
// Absorbs binary rounding when comparing a score gap against epsilon.
inline constexpr double kGapTolerance = 1e-12;

enum class ScorerKind {
  kRemoteScalar,
  kRemotePairwise,
  kMockConstant,
  kMockOracle,
  kMockLength,
  kMockReplay,
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
};

struct ScorerSpec {
  ScorerKind kind = ScorerKind::kMockConstant;
  std::string id;  // defaults to the kind name
  std::string endpoint;
  std::uint64_t seed = 0;
  double epsilon = kDefaultEpsilon;
  double constant_value = 5.0;        // mock-constant
  std::filesystem::path recording;    // mock-replay
  RetryPolicy retry;
  std::chrono::milliseconds timeout{30000};
  std::string auth_token;
};

struct ScoreResult {
  double score = 0;
  std::string scorer_id;
  std::optional<std::int64_t> latency_ms;
};

enum class Basis { kNativePairwise, kScalarInequality, kTieBrokenRandom };

struct PairVerdict {
  int preference = 1;
  Basis basis = Basis::kNativePairwise;
  std::optional<double> gap;  // set iff basis != kNativePairwise
};

class ScoringError : public std::runtime_error {
 public:
  enum class Code {
    kRetryExhausted,
    kProtocolViolation,
    kTimeout,
    kNotCapable,
    kMissingRecording,
  };
  ScoringError(Code code, const std::string& what);
  Code code() const { return code_; }

 private:
  Code code_;
};

std::string_view to_string(ScoringError::Code code);

class Scorer {
 public:
  Scorer(std::string id, std::uint64_t seed, double epsilon);
  virtual ~Scorer() = default;

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  double epsilon() const { return epsilon_; }

  virtual bool scalar_capable() const = 0;
  virtual bool pairwise_capable() const { return false; }

  // Unchecked score; callers go through score() for range validation.
  virtual double raw_score(std::string_view instruction, std::string_view response);
  virtual int raw_judge(const corpus::PreferencePair& pair);

 private:
  std::string id_;
  std::uint64_t seed_;
  double epsilon_;
};

class ConstantScorer : public Scorer {
 public:
  ConstantScorer(double value, std::string id = "mock-constant", std::uint64_t seed = 0,
                 double epsilon = kDefaultEpsilon);
  bool scalar_capable() const override { return true; }
  double raw_score(std::string_view, std::string_view) override { return value_; }

 private:
  double value_;
};

// Pairwise only: answers with the gold label.
class OracleScorer : public Scorer {
 public:
  explicit OracleScorer(std::string id = "mock-oracle", std::uint64_t seed = 0);
  bool scalar_capable() const override { return false; }
  bool pairwise_capable() const override { return true; }
  int raw_judge(const corpus::PreferencePair& pair) override { return pair.gold_label; }
};

// 1 + 9 * min(words, 1000) / 1000.
class LengthScorer : public Scorer {
 public:
  explicit LengthScorer(std::string id = "mock-length", std::uint64_t seed = 0,
                        double epsilon = kDefaultEpsilon);
  bool scalar_capable() const override { return true; }
  double raw_score(std::string_view instruction, std::string_view response) override;
};

// content_key(instruction, response) -> score, one JSON object per line:
// {"key": "<sha256 hex>", "score": 6.84}
class Recording {
 public:
  static Recording load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void put(std::string_view instruction, std::string_view response, double score);
  std::optional<double> find(std::string_view instruction, std::string_view response) const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, double> scores_;
  std::vector<std::string> order_;
};

class ReplayScorer : public Scorer {
 public:
  ReplayScorer(Recording recording, std::string id = "mock-replay", std::uint64_t seed = 0,
               double epsilon = kDefaultEpsilon);
  bool scalar_capable() const override { return true; }
  double raw_score(std::string_view instruction, std::string_view response) override;

 private:
  Recording recording_;
};

// POST /score {instruction, response} -> {score}
// POST /judge {instruction, response_1, response_2} -> {preference: "1"|"2"}
class RemoteScorer : public Scorer {
 public:
  RemoteScorer(const ScorerSpec& spec, bool pairwise);
  bool scalar_capable() const override { return !pairwise_; }
  bool pairwise_capable() const override { return pairwise_; }
  double raw_score(std::string_view instruction, std::string_view response) override;
  int raw_judge(const corpus::PreferencePair& pair) override;

 private:
  json post(const std::string& path, const json& body);

  std::string endpoint_;
  RetryPolicy retry_;
  std::chrono::milliseconds timeout_;
  std::string token_;
  bool pairwise_;
};

std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec);

// Relative recording paths resolve against the spec file's directory.
// WQ_SCORER_TOKEN and WQ_SCORER_TIMEOUT_MS override the remote settings.
ScorerSpec load_scorer_spec(const std::filesystem::path& path);
ScorerSpec scorer_spec_from_json(const json& j, const std::filesystem::path& base_dir = {});
json to_json(const ScorerSpec& spec);

ScoreResult score(Scorer& scorer, std::string_view instruction, std::string_view response);

// Scalar rule shared by judge_pair and the benchmark harness: argmax when the
// gap is at least epsilon, otherwise a fair coin from (tie_seed, pair_index).
PairVerdict verdict_from_scores(double score_1, double score_2, double epsilon,
                                std::uint64_t tie_seed, std::uint64_t pair_index);

PairVerdict judge_pair(Scorer& scorer, const corpus::PreferencePair& pair,
                       std::uint64_t tie_seed, std::uint64_t pair_index);
inline PairVerdict judge_pair(Scorer& scorer, const corpus::PreferencePair& pair) {
  return judge_pair(scorer, pair, scorer.seed(), 0);
}

// Thread-safe cache keyed on scorer id + full content.
class ScoreCache {
 public:
  std::optional<double> get(const std::string& key) const;
  void put(const std::string& key, double score);
  std::size_t size() const;
  static std::string key(const Scorer& scorer, std::string_view instruction, std::string_view response);

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, double> entries_;
};

struct BatchItem {
  std::string instruction;
  std::string response;
};

struct BatchResult {
  std::optional<ScoreResult> result;
  std::optional<ScoringError> error;
  bool ok() const { return result.has_value(); }
};

// Order-aligned with `items`. Identical items within a batch are scored once;
// pass a cache to share results across batches.
std::vector<BatchResult> score_batch(Scorer& scorer, const std::vector<BatchItem>& items,
                                     int parallelism, ScoreCache* cache = nullptr);

std::string_view to_string(ScorerKind k);
std::string_view to_string(Basis b);
ScorerKind parse_scorer_kind(std::string_view name);
json to_json(const PairVerdict& v);

}  // namespace wq::scoring
