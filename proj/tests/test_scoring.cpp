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

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "fixtures.hpp"
#include "wq/scoring.hpp"

using namespace wq;
using namespace wq::scoring;
using wq::corpus::PreferencePair;

namespace {

PreferencePair pair_of(const std::string& a, const std::string& b, int gold = 1) {
  using namespace wq::corpus;
  return {"p", Dataset::kStyleMimic, "instr",
          make_sample("a", "instr", a, Origin::ai("m"), Domain::kFiction),
          make_sample("b", "instr", b, Origin::ai("m"), Domain::kFiction), gold, AnnotatorKind::kExpert};
}

// Scores responses by a table; unknown texts throw.
class TableScorer : public Scorer {
 public:
  explicit TableScorer(std::map<std::string, double> table, std::function<double(double)> f = [](double x) { return x; })
      : Scorer("table", 0, kDefaultEpsilon), table_(std::move(table)), f_(std::move(f)) {}
  bool scalar_capable() const override { return true; }
  double raw_score(std::string_view, std::string_view response) override {
    ++calls;
    auto it = table_.find(std::string(response));
    if (it == table_.end()) throw ScoringError(ScoringError::Code::kTimeout, "no score");
    return f_(it->second);
  }
  std::atomic<int> calls{0};

 private:
  std::map<std::string, double> table_;
  std::function<double(double)> f_;
};

// A throwaway HTTP server on an ephemeral localhost port.
class FakeRemote {
 public:
  FakeRemote() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeRemote() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ScorerSpec remote_spec(const std::string& endpoint, ScorerKind kind = ScorerKind::kRemoteScalar) {
  ScorerSpec s;
  s.kind = kind;
  s.endpoint = endpoint;
  s.retry = {3, std::chrono::milliseconds(1)};
  s.timeout = std::chrono::milliseconds(2000);
  return s;
}

}  // namespace

TEST_CASE("constant scorer returns its value") {
  ConstantScorer c(5.0);
  auto r = score(c, "x", "anything");
  CHECK(r.score == 5.0);
  CHECK(r.scorer_id == "mock-constant");
  ScorerSpec oracle;
  oracle.kind = ScorerKind::kMockOracle;
  CHECK_THROWS_AS(score(*make_scorer(oracle), "x", "y"), ScoringError);
}

TEST_CASE("replay scorer returns the Table 7 recorded score") {
  auto t = wqtest::table7_triplet();
  Recording rec;
  for (std::size_t i = 0; i < 3; ++i) rec.put(t.instruction, t.texts[i], t.scores[i]);
  wqtest::TempDir dir;
  rec.save(dir / "rec.jsonl");
  ScorerSpec spec;
  spec.kind = ScorerKind::kMockReplay;
  spec.recording = dir / "rec.jsonl";
  auto scorer = make_scorer(spec);
  CHECK(score(*scorer, t.instruction, t.texts[2]).score == 6.84);
  CHECK(score(*scorer, t.instruction, t.texts[0]).score == 3.30);
  try {
    score(*scorer, t.instruction, "unrecorded");
    FAIL("expected ScoringError");
  } catch (const ScoringError& e) {
    CHECK(e.code() == ScoringError::Code::kMissingRecording);
  }
  CHECK(Recording::load(dir / "rec.jsonl").size() == 3);
}

TEST_CASE("length scorer maps word counts onto 1..10") {
  LengthScorer l;
  CHECK(score(l, "", "").score == 1.0);
  CHECK(score(l, "", wqtest::replace_all(std::string(500, 'w'), "w", "w ")).score == doctest::Approx(5.5));
}

TEST_CASE("scalar verdicts follow the inequality rule") {
  auto v = verdict_from_scores(6.84, 3.30, kDefaultEpsilon, 0, 0);
  CHECK(v.preference == 1);
  CHECK(v.basis == Basis::kScalarInequality);
  CHECK(*v.gap == doctest::Approx(3.54));

  CHECK(verdict_from_scores(5.0, 5.0, kDefaultEpsilon, 0, 0).basis == Basis::kTieBrokenRandom);
  auto sub = verdict_from_scores(4.430, 4.4295, 0.001, 0, 0);
  CHECK(sub.basis == Basis::kTieBrokenRandom);
  CHECK(*sub.gap >= 0);
  auto edge = verdict_from_scores(4.0, 4.001, 0.001, 0, 0);
  CHECK(edge.basis == Basis::kScalarInequality);
  CHECK(edge.preference == 2);
  CHECK(verdict_from_scores(4.0, 4.000999, 0.001, 0, 0).basis == Basis::kTieBrokenRandom);
}

TEST_CASE("tie coin is fair and replayable") {
  int ones = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    auto v = verdict_from_scores(5, 5, kDefaultEpsilon, 17, i);
    CHECK(v.preference == verdict_from_scores(5, 5, kDefaultEpsilon, 17, i).preference);
    ones += v.preference == 1;
  }
  CHECK(std::abs(ones - 10000) < 400);
}

TEST_CASE("native pairwise verdicts pass through") {
  OracleScorer o;
  auto v = judge_pair(o, pair_of("a", "b", 2));
  CHECK(v.preference == 2);
  CHECK(v.basis == Basis::kNativePairwise);
  CHECK_FALSE(v.gap);
}

TEST_CASE("argmax invariance under monotone transforms") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  for (int i = 0; i < 500; ++i) {
    double a = u(rng), b = u(rng);
    TableScorer plain({{"a", a}, {"b", b}});
    // Expands gaps on [1,10] so nothing crosses below epsilon.
    TableScorer warped({{"a", a}, {"b", b}}, [](double x) { return 1.0 + 9.0 * std::pow((x - 1.0) / 9.0, 0.5); });
    auto p = pair_of("a", "b");
    auto v1 = judge_pair(plain, p);
    auto v2 = judge_pair(warped, p);
    if (v1.basis == Basis::kScalarInequality && v2.basis == Basis::kScalarInequality) {
      CHECK(v1.preference == v2.preference);
    }
  }
}

TEST_CASE("judging swapped orders gives complementary preferences") {
  TableScorer t({{"a", 6.0}, {"b", 3.0}});
  auto ab = judge_pair(t, pair_of("a", "b"));
  auto ba = judge_pair(t, pair_of("b", "a"));
  CHECK(ab.preference + ba.preference == 3);
}

TEST_CASE("score_batch aligns results and isolates failures") {
  TableScorer t({{"one", 1.5}, {"two", 2.5}, {"four", 4.5}});
  std::vector<BatchItem> items = {{"i", "one"}, {"i", "two"}, {"i", "three"}, {"i", "four"}};
  auto rs = score_batch(t, items, 3);
  REQUIRE(rs.size() == 4);
  CHECK(rs[0].result->score == 1.5);
  CHECK(rs[1].result->score == 2.5);
  CHECK_FALSE(rs[2].ok());
  CHECK(rs[2].error->code() == ScoringError::Code::kTimeout);
  CHECK(rs[3].result->score == 4.5);
  CHECK(score_batch(t, {}, 1).empty());
  CHECK_THROWS_AS(score_batch(t, items, 0), std::invalid_argument);
}

TEST_CASE("identical batch items are scored once") {
  TableScorer t({{"same", 7.0}});
  ScoreCache cache;
  auto rs = score_batch(t, {{"i", "same"}, {"i", "same"}}, 2, &cache);
  CHECK(t.calls == 1);
  CHECK(rs[1].result->score == 7.0);
  score_batch(t, {{"i", "same"}}, 1, &cache);
  CHECK(t.calls == 1);
  CHECK(cache.size() == 1);
  CHECK(ScoreCache::key(t, "i", "same") != ScoreCache::key(ConstantScorer(1.0), "i", "same"));
}

TEST_CASE("remote scalar scorer speaks the protocol") {
  FakeRemote remote;
  std::atomic<int> calls{0};
  std::string seen_auth;
  remote.server().Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    double s = body["response"] == "bad" ? 12.3 : 2.0 + static_cast<double>(body["response"].get<std::string>().size());
    res.set_content(json{{"score", s}}.dump(), "application/json");
  });
  auto spec = remote_spec(remote.endpoint());
  spec.auth_token = "sekrit";
  auto scorer = make_scorer(spec);
  CHECK(score(*scorer, "i", "abc").score == 5.0);
  CHECK(seen_auth == "Bearer sekrit");
  try {
    score(*scorer, "i", "bad");
    FAIL("expected ScoringError");
  } catch (const ScoringError& e) {
    CHECK(e.code() == ScoringError::Code::kProtocolViolation);
  }
  auto batch = score_batch(*scorer, {{"i", "a"}, {"i", "a"}}, 2, nullptr);
  CHECK(batch[0].result->score == 3.0);
  CHECK(calls == 3);
}

TEST_CASE("remote pairwise judge returns native verdicts") {
  FakeRemote remote;
  remote.server().Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    auto pref = body["response_1"].get<std::string>().size() > body["response_2"].get<std::string>().size() ? "1" : "2";
    res.set_content(json{{"preference", pref}}.dump(), "application/json");
  });
  auto scorer = make_scorer(remote_spec(remote.endpoint(), ScorerKind::kRemotePairwise));
  auto v = judge_pair(*scorer, pair_of("short", "much longer"));
  CHECK(v.preference == 2);
  CHECK(v.basis == Basis::kNativePairwise);
}

TEST_CASE("remote retries transient failures then gives up") {
  FakeRemote remote;
  std::atomic<int> calls{0};
  remote.server().Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"score": 4.0})", "application/json");
  });
  auto scorer = make_scorer(remote_spec(remote.endpoint()));
  CHECK(score(*scorer, "i", "x").score == 4.0);
  CHECK(calls == 3);

  calls = -100;
  try {
    score(*scorer, "i", "x");
    FAIL("expected ScoringError");
  } catch (const ScoringError& e) {
    CHECK(e.code() == ScoringError::Code::kRetryExhausted);
  }

  auto dead = make_scorer(remote_spec("http://127.0.0.1:1"));
  CHECK_THROWS_AS(score(*dead, "i", "x"), ScoringError);
}

TEST_CASE("scorer specs load from JSON with relative recordings") {
  wqtest::TempDir dir;
  write_file(dir / "spec.json", R"({"kind": "mock-replay", "id": "wqrm-pr", "recording": "rec.jsonl", "seed": 9})");
  Recording rec;
  rec.put("i", "r", 6.0);
  rec.save(dir / "rec.jsonl");
  auto spec = load_scorer_spec(dir / "spec.json");
  CHECK(spec.kind == ScorerKind::kMockReplay);
  CHECK(spec.recording == dir / "rec.jsonl");
  CHECK(spec.seed == 9);
  CHECK(spec.epsilon == kDefaultEpsilon);
  auto scorer = make_scorer(spec);
  CHECK(scorer->id() == "wqrm-pr");
  CHECK(score(*scorer, "i", "r").score == 6.0);
  CHECK_THROWS(scorer_spec_from_json(json{{"kind", "mock-constant"}, {"epsilon", 0}}));
  CHECK_THROWS(scorer_spec_from_json(json{{"kind", "psychic"}}));
}
