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

#include "wq/bench.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace wq::bench {
namespace {

using corpus::Dataset;

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return (lo + hi) / 2;
}

std::string fixed(double v, int precision) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "  ";
      out += c == 0 ? cells[c] + std::string(width[c] - cells[c].size(), ' ')
                    : std::string(width[c] - cells[c].size(), ' ') + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + '\n';
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace

BenchError::BenchError(const std::string& what, std::vector<SkippedPair> failures)
    : std::runtime_error(what), failures_(std::move(failures)) {}

PairScores score_pairs(const std::vector<corpus::PreferencePair>& pairs, scoring::Scorer& scorer, int workers) {
  const std::size_t n = pairs.size();
  PairScores out;
  out.scorer_id = scorer.id();
  out.epsilon = scorer.epsilon();
  out.native = scorer.pairwise_capable();
  out.failures.resize(n);

  if (out.native) {
    out.preference.resize(n);
    parallel_for(n, workers, [&](std::size_t i) {
      try {
        out.preference[i] = scoring::judge_pair(scorer, pairs[i], 0, i).preference;
      } catch (const std::exception& e) {
        out.failures[i] = e.what();
      }
    });
    return out;
  }
  std::vector<scoring::BatchItem> items;
  items.reserve(2 * n);
  for (const auto& p : pairs) {
    items.push_back({p.instruction, p.response_1.response});
    items.push_back({p.instruction, p.response_2.response});
  }
  scoring::ScoreCache cache;
  auto scores = scoring::score_batch(scorer, items, workers, &cache);
  out.scalar.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = scores[2 * i];
    const auto& b = scores[2 * i + 1];
    if (!a.ok() || !b.ok()) {
      out.failures[i] = (!a.ok() ? a.error : b.error)->what();
      continue;
    }
    out.scalar[i] = std::array<double, 2>{a.result->score, b.result->score};
  }
  return out;
}

BenchReport tally(const std::vector<corpus::PreferencePair>& pairs, const PairScores& scores,
                  std::uint64_t seed, bool skip_errors) {
  const std::size_t n = pairs.size();
  std::vector<std::optional<scoring::PairVerdict>> verdicts(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (scores.native) {
      if (scores.preference[i]) verdicts[i] = scoring::PairVerdict{*scores.preference[i], scoring::Basis::kNativePairwise, {}};
    } else if (scores.scalar[i]) {
      const auto& s = *scores.scalar[i];
      verdicts[i] = scoring::verdict_from_scores(s[0], s[1], scores.epsilon, seed, i);
    }
  }

  BenchReport r;
  r.scorer_id = scores.scorer_id;
  r.seed = seed;
  std::vector<SkippedPair> failed;
  for (std::size_t i = 0; i < n; ++i) {
    if (!verdicts[i]) failed.push_back({pairs[i].id, scores.failures[i]});
  }
  if (!failed.empty() && !skip_errors) {
    auto message = std::to_string(failed.size()) + " pair(s) could not be scored; first: " +
                   failed.front().pair_id + ": " + failed.front().reason;
    throw BenchError(message, std::move(failed));
  }
  r.skipped = std::move(failed);

  std::size_t scored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!verdicts[i]) continue;
    const auto& p = pairs[i];
    ++scored;
    ++r.n_pairs[p.dataset];
    r.n_correct[p.dataset] += verdicts[i]->preference == p.gold_label ? 1 : 0;
    if (verdicts[i]->basis == scoring::Basis::kTieBrokenRandom) ++r.n_ties;
  }
  double weighted = 0;
  double macro = 0;
  for (const auto& [d, count] : r.n_pairs) {
    r.n_correct.try_emplace(d, 0);
    double acc = static_cast<double>(r.n_correct[d]) / static_cast<double>(count);
    r.per_dataset_accuracy[d] = acc;
    weighted += acc * static_cast<double>(count);
    macro += acc;
  }
  if (scored > 0) {
    r.overall_accuracy = weighted / static_cast<double>(scored);
    r.macro_accuracy = macro / static_cast<double>(r.n_pairs.size());
    r.tie_rate = static_cast<double>(r.n_ties) / static_cast<double>(scored);
  }
  return r;
}

BenchReport run_benchmark(const std::vector<corpus::PreferencePair>& pairs, scoring::Scorer& scorer,
                          const BenchOptions& options) {
  return tally(pairs, score_pairs(pairs, scorer, options.workers), options.seed, options.skip_errors);
}

GapReport gap_analysis(const std::vector<corpus::PreferencePair>& pairs, scoring::Scorer& scorer,
                       int workers) {
  if (!scorer.scalar_capable()) {
    throw scoring::ScoringError(scoring::ScoringError::Code::kNotCapable,
                                "gap analysis needs a scalar scorer; " + scorer.id() + " is pairwise-only");
  }
  std::vector<scoring::BatchItem> items;
  items.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    items.push_back({p.instruction, p.preferred().response});
    items.push_back({p.instruction, p.rejected().response});
  }
  scoring::ScoreCache cache;
  auto scores = scoring::score_batch(scorer, items, workers, &cache);

  struct Sums {
    double preferred = 0, rejected = 0;
    std::size_t n = 0;
  };
  std::map<Dataset, Sums> sums;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const auto* s : {&scores[2 * i], &scores[2 * i + 1]}) {
      if (!s->ok()) throw *s->error;
    }
    auto& acc = sums[pairs[i].dataset];
    acc.preferred += scores[2 * i].result->score;
    acc.rejected += scores[2 * i + 1].result->score;
    ++acc.n;
  }
  GapReport r;
  r.scorer_id = scorer.id();
  for (const auto& [d, s] : sums) {
    GapStats g;
    g.n_pairs = s.n;
    g.mean_preferred = s.preferred / static_cast<double>(s.n);
    g.mean_rejected = s.rejected / static_cast<double>(s.n);
    g.mean_gap = g.mean_preferred - g.mean_rejected;
    r.per_dataset[d] = g;
  }
  return r;
}

std::string render_report(const BenchReport& report, ReportFormat format) {
  if (format == ReportFormat::kMachineReadable) return to_json(report).dump(2) + "\n";
  std::vector<std::string> header{"metric"};
  for (const auto& [d, n] : report.n_pairs) header.emplace_back(corpus::to_string(d));
  header.emplace_back("overall");
  header.emplace_back("macro");
  std::string out = "scorer: " + report.scorer_id + "  seed: " + std::to_string(report.seed) + "\n";
  if (report.n_pairs.empty()) return out + render_table(header, {});

  std::vector<std::string> acc{"accuracy (%)"}, count{"pairs"};
  std::size_t total = 0;
  for (const auto& [d, n] : report.n_pairs) {
    acc.push_back(fixed(100.0 * report.per_dataset_accuracy.at(d), 1));
    count.push_back(std::to_string(n));
    total += n;
  }
  acc.push_back(fixed(100.0 * report.overall_accuracy, 1));
  acc.push_back(fixed(100.0 * report.macro_accuracy, 1));
  count.push_back(std::to_string(total));
  count.emplace_back("");
  out += render_table(header, {acc, count});
  out += "ties: " + std::to_string(report.n_ties) + " (" + fixed(100.0 * report.tie_rate, 2) + "%)";
  if (!report.skipped.empty()) out += "  skipped: " + std::to_string(report.skipped.size());
  return out + "\n";
}

std::string render_report(const GapReport& report, ReportFormat format) {
  if (format == ReportFormat::kMachineReadable) return to_json(report).dump(2) + "\n";
  std::vector<std::string> header{"metric"};
  for (const auto& [d, g] : report.per_dataset) header.emplace_back(corpus::to_string(d));
  std::string out = "scorer: " + report.scorer_id + "\n";
  if (report.per_dataset.empty()) return out + render_table(header, {});
  std::vector<std::string> pref{"mean preferred"}, rej{"mean rejected"}, gap{"mean gap"}, n{"pairs"};
  for (const auto& [d, g] : report.per_dataset) {
    pref.push_back(fixed(g.mean_preferred, 2));
    rej.push_back(fixed(g.mean_rejected, 2));
    gap.push_back(fixed(g.mean_gap, 2));
    n.push_back(std::to_string(g.n_pairs));
  }
  return out + render_table(header, {pref, rej, gap, n});
}

json to_json(const BenchReport& r) {
  json per = json::object();
  for (const auto& [d, n] : r.n_pairs) {
    per[std::string(corpus::to_string(d))] = {{"accuracy", r.per_dataset_accuracy.at(d)},
                                              {"n_pairs", n},
                                              {"n_correct", r.n_correct.at(d)}};
  }
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"pair_id", s.pair_id}, {"reason", s.reason}});
  return {{"scorer_id", r.scorer_id},
          {"seed", r.seed},
          {"per_dataset", std::move(per)},
          {"overall_accuracy", r.overall_accuracy},
          {"macro_accuracy", r.macro_accuracy},
          {"n_ties", r.n_ties},
          {"tie_rate", r.tie_rate},
          {"skipped", std::move(skipped)}};
}

BenchReport bench_report_from_json(const json& j) {
  BenchReport r;
  r.scorer_id = required<std::string>(j, "scorer_id");
  r.seed = required<std::uint64_t>(j, "seed");
  for (const auto& [name, v] : j.at("per_dataset").items()) {
    auto d = corpus::parse_dataset(name);
    r.per_dataset_accuracy[d] = required<double>(v, "accuracy");
    r.n_pairs[d] = required<std::size_t>(v, "n_pairs");
    r.n_correct[d] = required<std::size_t>(v, "n_correct");
  }
  r.overall_accuracy = required<double>(j, "overall_accuracy");
  r.macro_accuracy = required<double>(j, "macro_accuracy");
  r.n_ties = required<std::size_t>(j, "n_ties");
  r.tie_rate = required<double>(j, "tie_rate");
  for (const auto& s : j.at("skipped")) {
    r.skipped.push_back({required<std::string>(s, "pair_id"), required<std::string>(s, "reason")});
  }
  return r;
}

json to_json(const GapReport& r) {
  json per = json::object();
  for (const auto& [d, g] : r.per_dataset) {
    per[std::string(corpus::to_string(d))] = {{"mean_preferred", g.mean_preferred},
                                              {"mean_rejected", g.mean_rejected},
                                              {"mean_gap", g.mean_gap},
                                              {"n_pairs", g.n_pairs}};
  }
  return {{"scorer_id", r.scorer_id}, {"per_dataset", std::move(per)}};
}

GapReport gap_report_from_json(const json& j) {
  GapReport r;
  r.scorer_id = required<std::string>(j, "scorer_id");
  for (const auto& [name, v] : j.at("per_dataset").items()) {
    GapStats g;
    g.mean_preferred = required<double>(v, "mean_preferred");
    g.mean_rejected = required<double>(v, "mean_rejected");
    g.mean_gap = required<double>(v, "mean_gap");
    g.n_pairs = required<std::size_t>(v, "n_pairs");
    r.per_dataset[corpus::parse_dataset(name)] = g;
  }
  return r;
}

void score_curve(edits::GradualCurve& curve, scoring::Scorer& scorer, const std::string& instruction) {
  for (auto& state : curve.states) state.score = scoring::score(scorer, instruction, state.text).score;
}

SensitivitySummary summarize_sensitivity(const std::vector<edits::GradualCurve>& curves) {
  std::vector<std::vector<double>> by_count;
  std::vector<double> gains;
  for (const auto& curve : curves) {
    std::map<std::size_t, double> scores;
    for (const auto& s : curve.states) {
      if (!s.score) throw std::invalid_argument("summarize_sensitivity: unscored state");
      scores[s.applied_count] = *s.score;
      if (by_count.size() <= s.applied_count) by_count.resize(s.applied_count + 1);
      by_count[s.applied_count].push_back(*s.score);
    }
    for (auto it = scores.begin(); it != scores.end(); ++it) {
      auto next = std::next(it);
      if (next != scores.end() && next->first == it->first + 1) gains.push_back(next->second - it->second);
    }
  }
  SensitivitySummary s;
  for (auto& v : by_count) {
    s.n_by_count.push_back(v.size());
    s.median_score_by_count.push_back(median(v));
  }
  s.n_steps = gains.size();
  s.median_step_gain = median(std::move(gains));
  return s;
}

json to_json(const SensitivitySummary& s) {
  return {{"median_score_by_count", s.median_score_by_count},
          {"n_by_count", s.n_by_count},
          {"median_step_gain", s.median_step_gain},
          {"n_steps", s.n_steps}};
}

}  // namespace wq::bench
