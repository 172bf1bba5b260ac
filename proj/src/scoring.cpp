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

#include "wq/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace wq::scoring {
namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

void check_range(double score, const std::string& scorer_id) {
  if (!std::isfinite(score) || score < kMinScore || score > kMaxScore) {
    throw ScoringError(ScoringError::Code::kProtocolViolation,
                       scorer_id + ": score " + format_double(score) + " outside [1, 10]");
  }
}

}  // namespace

ScoringError::ScoringError(Code code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

std::string_view to_string(ScoringError::Code code) {
  switch (code) {
    case ScoringError::Code::kRetryExhausted: return "RetryExhausted";
    case ScoringError::Code::kProtocolViolation: return "ProtocolViolation";
    case ScoringError::Code::kTimeout: return "Timeout";
    case ScoringError::Code::kNotCapable: return "NotCapable";
    case ScoringError::Code::kMissingRecording: return "MissingRecording";
  }
  return "Unknown";
}

Scorer::Scorer(std::string id, std::uint64_t seed, double epsilon)
    : id_(std::move(id)), seed_(seed), epsilon_(epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("scorer epsilon must be positive");
}

double Scorer::raw_score(std::string_view, std::string_view) {
  throw ScoringError(ScoringError::Code::kNotCapable, id_ + " cannot produce scalar scores");
}

int Scorer::raw_judge(const corpus::PreferencePair&) {
  throw ScoringError(ScoringError::Code::kNotCapable, id_ + " cannot judge pairs natively");
}

ConstantScorer::ConstantScorer(double value, std::string id, std::uint64_t seed, double epsilon)
    : Scorer(std::move(id), seed, epsilon), value_(value) {}

OracleScorer::OracleScorer(std::string id, std::uint64_t seed)
    : Scorer(std::move(id), seed, kDefaultEpsilon) {}

LengthScorer::LengthScorer(std::string id, std::uint64_t seed, double epsilon)
    : Scorer(std::move(id), seed, epsilon) {}

double LengthScorer::raw_score(std::string_view, std::string_view response) {
  auto words = static_cast<double>(std::min<std::size_t>(word_count(response), 1000));
  return 1.0 + 9.0 * words / 1000.0;
}

Recording Recording::load(const std::filesystem::path& path) {
  Recording r;
  for (const auto& line : read_lines(path)) {
    auto j = json::parse(line.text);
    std::string key;
    if (j.contains("key")) {
      key = j.at("key").get<std::string>();
    } else {
      key = content_key(required<std::string>(j, "instruction"), required<std::string>(j, "response"));
    }
    auto score = required<double>(j, "score");
    if (!r.scores_.contains(key)) r.order_.push_back(key);
    r.scores_[key] = score;
  }
  return r;
}

void Recording::save(const std::filesystem::path& path) const {
  std::vector<json> lines;
  lines.reserve(order_.size());
  for (const auto& key : order_) lines.push_back({{"key", key}, {"score", scores_.at(key)}});
  write_jsonl(path, lines);
}

void Recording::put(std::string_view instruction, std::string_view response, double score) {
  auto key = content_key(instruction, response);
  if (!scores_.contains(key)) order_.push_back(key);
  scores_[key] = score;
}

std::optional<double> Recording::find(std::string_view instruction, std::string_view response) const {
  auto it = scores_.find(content_key(instruction, response));
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

ReplayScorer::ReplayScorer(Recording recording, std::string id, std::uint64_t seed, double epsilon)
    : Scorer(std::move(id), seed, epsilon), recording_(std::move(recording)) {}

double ReplayScorer::raw_score(std::string_view instruction, std::string_view response) {
  auto s = recording_.find(instruction, response);
  if (!s) {
    throw ScoringError(ScoringError::Code::kMissingRecording,
                       id() + ": no recorded score for key " + content_key(instruction, response));
  }
  return *s;
}

RemoteScorer::RemoteScorer(const ScorerSpec& spec, bool pairwise)
    : Scorer(spec.id.empty() ? std::string(to_string(spec.kind)) : spec.id, spec.seed, spec.epsilon),
      endpoint_(spec.endpoint),
      retry_(spec.retry),
      timeout_(spec.timeout),
      token_(spec.auth_token),
      pairwise_(pairwise) {
  if (endpoint_.empty()) throw std::invalid_argument("remote scorer needs an endpoint");
  if (retry_.attempts < 1) throw std::invalid_argument("retry attempts must be >= 1");
}

json RemoteScorer::post(const std::string& path, const json& body) {
  auto backoff = retry_.initial_backoff;
  std::string last_error;
  bool timed_out = false;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(endpoint_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      timed_out = res.error() == httplib::Error::ConnectionTimeout || res.error() == httplib::Error::Read;
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ScoringError(ScoringError::Code::kProtocolViolation,
                         id() + ": HTTP " + std::to_string(res->status) + " from " + path);
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) {
      throw ScoringError(ScoringError::Code::kProtocolViolation, id() + ": response is not a JSON object");
    }
    return reply;
  }
  throw ScoringError(ScoringError::Code::kRetryExhausted,
                     id() + ": " + std::to_string(retry_.attempts) + " attempts failed (" + last_error +
                         (timed_out ? ", timeout" : "") + ")");
}

double RemoteScorer::raw_score(std::string_view instruction, std::string_view response) {
  if (pairwise_) return Scorer::raw_score(instruction, response);
  auto reply = post("/score", {{"instruction", instruction}, {"response", response}});
  auto it = reply.find("score");
  if (it == reply.end() || !it->is_number()) {
    throw ScoringError(ScoringError::Code::kProtocolViolation, id() + ": reply lacks a numeric score");
  }
  double s = it->get<double>();
  check_range(s, id());
  return s;
}

int RemoteScorer::raw_judge(const corpus::PreferencePair& pair) {
  if (!pairwise_) return Scorer::raw_judge(pair);
  auto reply = post("/judge", {{"instruction", pair.instruction},
                               {"response_1", pair.response_1.response},
                               {"response_2", pair.response_2.response}});
  auto it = reply.find("preference");
  if (it != reply.end()) {
    if (it->is_string() && (*it == "1" || *it == "2")) return it->get<std::string>() == "1" ? 1 : 2;
    if (it->is_number_integer() && (*it == 1 || *it == 2)) return it->get<int>();
  }
  throw ScoringError(ScoringError::Code::kProtocolViolation, id() + ": reply lacks preference \"1\"|\"2\"");
}

std::unique_ptr<Scorer> make_scorer(const ScorerSpec& spec) {
  auto id = spec.id.empty() ? std::string(to_string(spec.kind)) : spec.id;
  switch (spec.kind) {
    case ScorerKind::kMockConstant:
      return std::make_unique<ConstantScorer>(spec.constant_value, id, spec.seed, spec.epsilon);
    case ScorerKind::kMockOracle:
      return std::make_unique<OracleScorer>(id, spec.seed);
    case ScorerKind::kMockLength:
      return std::make_unique<LengthScorer>(id, spec.seed, spec.epsilon);
    case ScorerKind::kMockReplay:
      return std::make_unique<ReplayScorer>(Recording::load(spec.recording), id, spec.seed, spec.epsilon);
    case ScorerKind::kRemoteScalar:
      return std::make_unique<RemoteScorer>(spec, false);
    case ScorerKind::kRemotePairwise:
      return std::make_unique<RemoteScorer>(spec, true);
  }
  throw std::invalid_argument("unknown scorer kind");
}

ScorerSpec scorer_spec_from_json(const json& j, const std::filesystem::path& base_dir) {
  ScorerSpec s;
  s.kind = parse_scorer_kind(required<std::string>(j, "kind"));
  s.id = j.value("id", std::string());
  s.endpoint = j.value("endpoint", std::string());
  s.seed = j.value("seed", std::uint64_t{0});
  s.epsilon = j.value("epsilon", kDefaultEpsilon);
  if (!(s.epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
  s.constant_value = j.value("value", 5.0);
  if (j.contains("recording")) {
    std::filesystem::path rec = j.at("recording").get<std::string>();
    s.recording = rec.is_relative() && !base_dir.empty() ? base_dir / rec : rec;
  }
  if (j.contains("retry")) {
    s.retry.attempts = j.at("retry").value("attempts", 3);
    s.retry.initial_backoff = std::chrono::milliseconds(j.at("retry").value("backoff_ms", 250));
  }
  s.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  s.auth_token = j.value("auth_token", std::string());
  if (auto t = env("WQ_SCORER_TOKEN")) s.auth_token = *t;
  if (auto t = env("WQ_SCORER_TIMEOUT_MS")) s.timeout = std::chrono::milliseconds(std::stoll(*t));
  return s;
}

ScorerSpec load_scorer_spec(const std::filesystem::path& path) {
  return scorer_spec_from_json(json::parse(read_file(path)), path.parent_path());
}

json to_json(const ScorerSpec& spec) {
  json j = {{"kind", to_string(spec.kind)}, {"seed", spec.seed}, {"epsilon", spec.epsilon}};
  if (!spec.id.empty()) j["id"] = spec.id;
  if (!spec.endpoint.empty()) j["endpoint"] = spec.endpoint;
  if (spec.kind == ScorerKind::kMockConstant) j["value"] = spec.constant_value;
  if (!spec.recording.empty()) j["recording"] = spec.recording.string();
  return j;
}

ScoreResult score(Scorer& scorer, std::string_view instruction, std::string_view response) {
  if (!scorer.scalar_capable()) {
    throw ScoringError(ScoringError::Code::kNotCapable, scorer.id() + " is not a scalar scorer");
  }
  auto start = std::chrono::steady_clock::now();
  double s = scorer.raw_score(instruction, response);
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  check_range(s, scorer.id());
  return {s, scorer.id(), elapsed.count()};
}

PairVerdict verdict_from_scores(double score_1, double score_2, double epsilon,
                                std::uint64_t tie_seed, std::uint64_t pair_index) {
  PairVerdict v;
  v.gap = std::fabs(score_1 - score_2);
  // Decimal gaps equal to epsilon (4.001 vs 4.0) must not read as ties.
  if (*v.gap >= epsilon - kGapTolerance) {
    v.basis = Basis::kScalarInequality;
    v.preference = score_1 > score_2 ? 1 : 2;
  } else {
    v.basis = Basis::kTieBrokenRandom;
    v.preference = (derive_seed(tie_seed, pair_index) >> 63) == 0 ? 1 : 2;
  }
  return v;
}

PairVerdict judge_pair(Scorer& scorer, const corpus::PreferencePair& pair,
                       std::uint64_t tie_seed, std::uint64_t pair_index) {
  if (scorer.pairwise_capable()) {
    int pref = scorer.raw_judge(pair);
    if (pref != 1 && pref != 2) {
      throw ScoringError(ScoringError::Code::kProtocolViolation, scorer.id() + ": preference must be 1 or 2");
    }
    return {pref, Basis::kNativePairwise, std::nullopt};
  }
  auto s1 = score(scorer, pair.instruction, pair.response_1.response).score;
  auto s2 = score(scorer, pair.instruction, pair.response_2.response).score;
  return verdict_from_scores(s1, s2, scorer.epsilon(), tie_seed, pair_index);
}

std::optional<double> ScoreCache::get(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::put(const std::string& key, double score) {
  std::unique_lock lock(mu_);
  entries_[key] = score;
}

std::size_t ScoreCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::string ScoreCache::key(const Scorer& scorer, std::string_view instruction, std::string_view response) {
  return scorer.id() + '\x1f' + content_key(instruction, response);
}

std::vector<BatchResult> score_batch(Scorer& scorer, const std::vector<BatchItem>& items,
                                     int parallelism, ScoreCache* cache) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<BatchResult> results(items.size());
  if (items.empty()) return results;

  std::unordered_map<std::string, std::size_t> first_of;
  std::vector<std::string> keys(items.size());
  std::vector<std::size_t> unique;
  for (std::size_t i = 0; i < items.size(); ++i) {
    keys[i] = ScoreCache::key(scorer, items[i].instruction, items[i].response);
    if (first_of.emplace(keys[i], i).second) unique.push_back(i);
  }

  parallel_for(unique.size(), parallelism, [&](std::size_t u) {
    auto i = unique[u];
    if (cache) {
      if (auto hit = cache->get(keys[i])) {
        results[i].result = ScoreResult{*hit, scorer.id(), std::nullopt};
        return;
      }
    }
    try {
      results[i].result = score(scorer, items[i].instruction, items[i].response);
      if (cache) cache->put(keys[i], results[i].result->score);
    } catch (const ScoringError& e) {
      results[i].error = e;
    } catch (const std::exception& e) {
      results[i].error = ScoringError(ScoringError::Code::kProtocolViolation, e.what());
    }
  });

  for (std::size_t i = 0; i < items.size(); ++i) {
    auto first = first_of.at(keys[i]);
    if (first != i) results[i] = results[first];
  }
  return results;
}

std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::kRemoteScalar: return "remote-scalar";
    case ScorerKind::kRemotePairwise: return "remote-pairwise";
    case ScorerKind::kMockConstant: return "mock-constant";
    case ScorerKind::kMockOracle: return "mock-oracle";
    case ScorerKind::kMockLength: return "mock-length";
    case ScorerKind::kMockReplay: return "mock-replay";
  }
  return "unknown";
}

std::string_view to_string(Basis b) {
  switch (b) {
    case Basis::kNativePairwise: return "native-pairwise";
    case Basis::kScalarInequality: return "scalar-inequality";
    case Basis::kTieBrokenRandom: return "tie-broken-random";
  }
  return "unknown";
}

ScorerKind parse_scorer_kind(std::string_view name) {
  for (auto k : {ScorerKind::kRemoteScalar, ScorerKind::kRemotePairwise, ScorerKind::kMockConstant,
                 ScorerKind::kMockOracle, ScorerKind::kMockLength, ScorerKind::kMockReplay}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown scorer kind '" + std::string(name) + "'");
}

json to_json(const PairVerdict& v) {
  json j = {{"preference", std::to_string(v.preference)}, {"basis", to_string(v.basis)}};
  if (v.gap) j["gap"] = *v.gap;
  return j;
}

}  // namespace wq::scoring
