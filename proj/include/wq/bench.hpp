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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wq/common.hpp"
#include "wq/corpus.hpp"
#include "wq/edits.hpp"
#include "wq/scoring.hpp"

// Benchmark harness: accuracy per dataset, gap analysis, gradual-edit sensitivity.
namespace wq::bench {

struct BenchOptions {
  std::uint64_t seed = 0;  // tie-break stream
  int workers = 1;
  bool skip_errors = false;
};

struct SkippedPair {
  std::string pair_id;
  std::string reason;
};

struct BenchReport {
  std::map<corpus::Dataset, double> per_dataset_accuracy;
  std::map<corpus::Dataset, std::size_t> n_pairs;
  std::map<corpus::Dataset, std::size_t> n_correct;
  double overall_accuracy = 0;  // pair-weighted
  double macro_accuracy = 0;    // unweighted mean over datasets
  std::size_t n_ties = 0;
  double tie_rate = 0;
  std::string scorer_id;
  std::uint64_t seed = 0;
  std::vector<SkippedPair> skipped;

  bool operator==(const BenchReport&) const = default;
};

struct GapStats {
  double mean_preferred = 0;
  double mean_rejected = 0;
  double mean_gap = 0;
  std::size_t n_pairs = 0;

  bool operator==(const GapStats&) const = default;
};

struct GapReport {
  std::map<corpus::Dataset, GapStats> per_dataset;
  std::string scorer_id;

  bool operator==(const GapReport&) const = default;
};

inline bool operator==(const SkippedPair& a, const SkippedPair& b) {
  return a.pair_id == b.pair_id && a.reason == b.reason;
}

class BenchError : public std::runtime_error {
 public:
  BenchError(const std::string& what, std::vector<SkippedPair> failures);
  const std::vector<SkippedPair>& failures() const { return failures_; }

 private:
  std::vector<SkippedPair> failures_;
};

// Raw scorer output per pair, independent of the tie seed.
struct PairScores {
  std::string scorer_id;
  double epsilon = scoring::kDefaultEpsilon;
  bool native = false;                                 // pairwise scorer
  std::vector<std::optional<std::array<double, 2>>> scalar;  // scalar scorers
  std::vector<std::optional<int>> preference;          // pairwise scorers
  std::vector<std::string> failures;                   // empty when scored
};

PairScores score_pairs(const std::vector<corpus::PreferencePair>& pairs, scoring::Scorer& scorer, int workers = 1);

// Verdicts and accuracies for one tie seed. `scores` must come from `pairs`.
BenchReport tally(const std::vector<corpus::PreferencePair>& pairs, const PairScores& scores,
                  std::uint64_t seed, bool skip_errors = false);

// score_pairs + tally. Unscorable pairs abort with BenchError unless
// options.skip_errors, in which case they are excluded from every denominator
// and listed in `skipped`.
BenchReport run_benchmark(const std::vector<corpus::PreferencePair>& pairs, scoring::Scorer& scorer,
                          const BenchOptions& options = {});

// Throws ScoringError(kNotCapable) for pairwise-only scorers.
GapReport gap_analysis(const std::vector<corpus::PreferencePair>& pairs, scoring::Scorer& scorer,
                       int workers = 1);

enum class ReportFormat { kTableText, kMachineReadable };

std::string render_report(const BenchReport& report, ReportFormat format);
std::string render_report(const GapReport& report, ReportFormat format);
BenchReport bench_report_from_json(const json& j);
GapReport gap_report_from_json(const json& j);
json to_json(const BenchReport& r);
json to_json(const GapReport& r);

// Gradual-edit sensitivity: score each intermediate state, then summarise
// the median score at every applied-edit count and the median step gain.
void score_curve(edits::GradualCurve& curve, scoring::Scorer& scorer, const std::string& instruction);

struct SensitivitySummary {
  std::vector<double> median_score_by_count;  // index = applied edits
  std::vector<std::size_t> n_by_count;
  double median_step_gain = 0;
  std::size_t n_steps = 0;
};

SensitivitySummary summarize_sensitivity(const std::vector<edits::GradualCurve>& curves);
json to_json(const SensitivitySummary& s);

}  // namespace wq::bench
