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

#include <thread>

#include "fixtures.hpp"
#include "wq/select.hpp"

using namespace wq;
using namespace wq::select;

namespace {

// Scores by exact text lookup.
class MapScorer : public scoring::Scorer {
 public:
  MapScorer() : Scorer("map", 0, scoring::kDefaultEpsilon) {}
  bool scalar_capable() const override { return true; }
  double raw_score(std::string_view, std::string_view response) override {
    std::lock_guard lock(mu_);
    auto it = scores.find(std::string(response));
    if (it == scores.end()) throw scoring::ScoringError(scoring::ScoringError::Code::kMissingRecording, "unscored");
    return it->second;
  }
  std::map<std::string, double> scores;

 private:
  std::mutex mu_;
};

std::string numbered_draft(const std::string& tag, std::size_t words) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += (i ? " " : "") + tag + "w" + std::to_string(i);
  return s;
}

struct Completion {
  std::string text;      // COT completion
  std::string executed;  // draft after its one edit
};

Completion single_edit(const std::string& draft, const std::string& tag, std::size_t word, std::size_t j) {
  edits::EditTrace t{draft, {{tag + "w" + std::to_string(word) + " ", tag + "w" + std::to_string(word) + "e" + std::to_string(j) + " ", std::string("Purple Prose")}}, {}};
  t.final_text = edits::apply_all(t);
  return {edits::render_cot_completion(t), *t.final_text};
}

Candidate scored(const std::string& text, double score) { return {text, score, "gen", std::nullopt, {}}; }

// A draft with `n` single-edit completions and random scores registered.
struct ReplayFixture {
  std::string draft;
  std::vector<Completion> completions;
};

ReplayFixture replay_fixture(const std::string& tag, std::size_t n, std::mt19937_64& rng, MapScorer& scorer,
                             double draft_score, double lo, double hi) {
  ReplayFixture f;
  f.draft = numbered_draft(tag, 40);
  scorer.scores[f.draft] = draft_score;
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t j = 0; j < n; ++j) {
    f.completions.push_back(single_edit(f.draft, tag, rng() % 39, j));
    scorer.scores[f.completions.back().executed] = std::round(u(rng) * 100) / 100;
  }
  return f;
}

std::shared_ptr<ReplayGenerator> replay_for(const std::vector<ReplayFixture>& fs, const std::string& id = "replay") {
  std::unordered_map<std::string, std::vector<std::string>> by_key;
  for (const auto& f : fs) {
    auto& v = by_key[sha256_hex(f.draft)];
    for (const auto& c : f.completions) v.push_back(c.text);
  }
  return std::make_shared<ReplayGenerator>(id, std::move(by_key));
}

}  // namespace

TEST_CASE("Table 7 replay selects the 6.84 edit") {
  auto t = wqtest::table7_triplet();
  scoring::Recording rec;
  for (std::size_t i = 0; i < 3; ++i) rec.put(t.instruction, t.texts[i], t.scores[i]);
  scoring::ReplayScorer scorer(rec);
  Candidate draft{t.texts[0], std::nullopt, "gpt-4o", std::nullopt, {}};
  std::vector<Candidate> cands = {{t.texts[1], std::nullopt, "gen", std::nullopt, {}},
                                  {t.texts[2], std::nullopt, "gen", std::nullopt, {}}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto out = filter_and_select(draft, cands, scorer, t.instruction, seed);
    REQUIRE_FALSE(out.degenerate());
    CHECK(*out.draft.score == 3.30);
    CHECK(*out.selection().best.score == 6.84);
    CHECK(out.selection().survivors == 2);
    double r = *out.selection().random_pick.score;
    CHECK((r == 4.43 || r == 6.84));
  }
}

TEST_CASE("all candidates below the draft is degenerate") {
  MapScorer s;
  auto out = filter_and_select(scored("d", 5.0), {scored("a", 4.99), scored("b", 1.0)}, s, "i", 0);
  REQUIRE(out.degenerate());
  CHECK(std::get<Degenerate>(out.result).n_candidates == 2);
}

TEST_CASE("equal to the draft survives, one survivor is both picks") {
  MapScorer s;
  auto out = filter_and_select(scored("d", 5.0), {scored("a", 5.0), scored("b", 4.0)}, s, "i", 99);
  REQUIRE_FALSE(out.degenerate());
  CHECK(out.selection().survivors == 1);
  CHECK(out.selection().best == out.selection().random_pick);
  CHECK(out.selection().best.text == "a");
}

TEST_CASE("best ties go to the lowest index and the pick is seeded") {
  MapScorer s;
  std::vector<Candidate> cands = {scored("a", 6.0), scored("b", 8.0), scored("c", 8.0), scored("d", 7.0)};
  std::set<std::size_t> picks;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto out = filter_and_select(scored("x", 5.0), cands, s, "i", seed);
    CHECK(out.selection().best_index == 1);
    CHECK(out.selection().random_index ==
          filter_and_select(scored("x", 5.0), cands, s, "i", seed).selection().random_index);
    picks.insert(out.selection().random_index);
  }
  CHECK(picks.size() == 4);
}

TEST_CASE("failed candidate scoring is excluded and logged") {
  MapScorer s;
  s.scores = {{"a", 7.0}};
  auto out = filter_and_select(scored("d", 5.0), {{"a", std::nullopt, "g", std::nullopt, {}}, {"zz", std::nullopt, "g", std::nullopt, {}}}, s, "i", 0);
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].candidate_index == 1);
  CHECK(out.selection().survivors == 1);
}

TEST_CASE("replay generator yields n parsed candidates") {
  MapScorer s;
  std::mt19937_64 rng(1);
  auto f = replay_fixture("a", 20, rng, s, 3.0, 1.0, 9.0);
  auto gen = replay_for({f});
  auto cands = generate_candidates(*gen, f.draft, 20);
  REQUIRE(cands.size() == 20);
  for (std::size_t j = 0; j < 20; ++j) {
    CHECK(cands[j].text == f.completions[j].executed);
    REQUIRE(cands[j].trace);
    CHECK(cands[j].trace->draft == f.draft);
    CHECK(cands[j].warnings.empty());
    CHECK(cands[j].generator_id == "replay");
  }
  CHECK(generate_candidates(*gen, f.draft, 1).size() == 1);
  CHECK_THROWS(generate_candidates(*gen, f.draft, 0));
  try {
    generate_candidates(*gen, "unknown draft", 3);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(e.code() == GenerationError::Code::kMissingRecording);
  }
}

TEST_CASE("unparseable completions are kept raw or rejected") {
  ReplayGenerator gen("g", std::unordered_map<std::string, std::vector<std::string>>{
                               {sha256_hex("draft"), {"just a rewrite", "another"}}});
  auto cands = generate_candidates(gen, "draft", 2);
  REQUIRE(cands.size() == 2);
  CHECK(cands[0].text == "just a rewrite");
  CHECK_FALSE(cands[0].trace);
  REQUIRE(cands[0].warnings.size() == 1);
  CHECK(cands[0].warnings[0].starts_with("unparseable"));
  try {
    generate_candidates(gen, "draft", 2, {false});
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(e.code() == GenerationError::Code::kAllUnparseable);
  }
}

TEST_CASE("completion whose edits do not apply falls back to Part 3") {
  auto t = wqtest::table8_trace();
  auto completion = edits::render_cot_completion(t);
  auto c = candidate_from_completion(completion, "an unrelated draft", "g");
  CHECK(c.text == *t.final_text);
  CHECK_FALSE(c.warnings.empty());
  auto ok = candidate_from_completion(completion, t.draft, "g");
  CHECK(ok.text == *t.final_text);
  CHECK(ok.warnings.empty());
}

TEST_CASE("best score never decreases as N grows") {
  std::mt19937_64 rng(2024);
  for (int fixture = 0; fixture < 100; ++fixture) {
    MapScorer s;
    auto f = replay_fixture("f" + std::to_string(fixture), 20, rng, s, 5.0, 1.0, 10.0);
    auto gen = replay_for({f});
    double prev = -1;
    for (std::size_t n = 1; n <= 20; ++n) {
      auto out = filter_and_select(scored(f.draft, 5.0), generate_candidates(*gen, f.draft, n), s, "i", 7);
      double best = out.degenerate() ? -1 : *out.selection().best.score;
      CHECK(best >= prev);
      if (!out.degenerate()) CHECK(*out.selection().random_pick.score >= 5.0);
      prev = best;
    }
  }
}

TEST_CASE("generators pair with the draft's source model") {
  MapScorer s;
  std::mt19937_64 rng(3);
  auto fg = replay_fixture("g", 5, rng, s, 2.0, 3.0, 9.0);
  auto fl = replay_fixture("l", 5, rng, s, 2.0, 3.0, 9.0);
  GeneratorPool pool({{"gpt-4o", replay_for({fg}, "gpt-4o-sft")}, {"llama-3.1-70b", replay_for({fl}, "llama-sft")}}, nullptr);
  std::vector<Draft> drafts = {{"d1", "i", corpus::Domain::kFiction, fg.draft, "gpt-4o"},
                               {"d2", "i", corpus::Domain::kMarketing, fl.draft, "llama-3.1-70b"},
                               {"d3", "i", corpus::Domain::kFiction, fl.draft, "mistral"}};
  auto r = build_triplets(drafts, pool, s, {5, 1, 1, true});
  REQUIRE(r.triplets.size() == 2);
  CHECK(r.triplets[0].best_edit.generator_id == "gpt-4o-sft");
  CHECK(r.triplets[0].first_draft.generator_id == "gpt-4o");
  CHECK(r.triplets[1].best_edit.generator_id == "llama-sft");
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].draft_id == "d3");
  CHECK_THROWS_AS(pool.for_model("mistral"), GenerationError);
}

TEST_CASE("three drafts with one degenerate give two triplets and a sidecar entry") {
  MapScorer s;
  std::mt19937_64 rng(4);
  auto a = replay_fixture("a", 6, rng, s, 3.0, 3.5, 9.0);
  auto b = replay_fixture("b", 6, rng, s, 9.5, 1.0, 9.0);
  auto c = replay_fixture("c", 6, rng, s, 1.0, 1.0, 9.0);
  GeneratorPool pool({}, replay_for({a, b, c}));
  std::vector<Draft> drafts = {{"a", "i", corpus::Domain::kFiction, a.draft, "m"},
                               {"b", "i", corpus::Domain::kFiction, b.draft, "m"},
                               {"c", "i", corpus::Domain::kNonfiction, c.draft, "m"}};
  auto r = build_triplets(drafts, pool, s, {6, 11, 2, true});
  CHECK(r.errors.empty());
  REQUIRE(r.triplets.size() == 2);
  CHECK(r.triplets[0].id == "a");
  CHECK(r.triplets[1].id == "c");
  REQUIRE(r.degenerate.size() == 1);
  CHECK(r.degenerate[0].draft_id == "b");
  for (const auto& t : r.triplets) {
    CHECK(t.n_generated == 6);
    CHECK(t.n_surviving <= t.n_generated);
    CHECK(*t.random_edit.score >= *t.first_draft.score);
    CHECK(*t.best_edit.score >= *t.random_edit.score);
  }
}

TEST_CASE("repeated builds are byte-identical") {
  MapScorer s;
  std::mt19937_64 rng(5);
  std::vector<ReplayFixture> fs;
  std::vector<Draft> drafts;
  for (int i = 0; i < 12; ++i) {
    fs.push_back(replay_fixture("r" + std::to_string(i), 20, rng, s, 4.0, 2.0, 9.0));
    drafts.push_back({"r" + std::to_string(i), "i", corpus::Domain::kFiction, fs.back().draft, "m"});
  }
  GeneratorPool pool({}, replay_for(fs));
  wqtest::TempDir dir;
  write_triplets(dir / "a.jsonl", build_triplets(drafts, pool, s, {20, 42, 1, true}).triplets);
  write_triplets(dir / "b.jsonl", build_triplets(drafts, pool, s, {20, 42, 3, true}).triplets);
  CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
  auto back = read_triplets(dir / "a.jsonl");
  REQUIRE(back.size() == 12);
  CHECK(back[0].best_edit.text == build_triplets(drafts, pool, s, {20, 42, 1, true}).triplets[0].best_edit.text);
  CHECK(*back[0].best_edit.score == *build_triplets(drafts, pool, s, {20, 42, 1, true}).triplets[0].best_edit.score);
}

TEST_CASE("100 drafts without degenerates give 100 triplets") {
  MapScorer s;
  std::mt19937_64 rng(6);
  std::vector<ReplayFixture> fs;
  std::vector<Draft> drafts;
  for (int i = 0; i < 100; ++i) {
    fs.push_back(replay_fixture("h" + std::to_string(i), 20, rng, s, 2.0, 2.0, 10.0));
    drafts.push_back({"h" + std::to_string(i), "i", corpus::Domain::kFiction, fs.back().draft, i % 2 ? "gpt-4o" : "llama-3.1-70b"});
  }
  GeneratorPool pool({}, replay_for(fs));
  auto r = build_triplets(drafts, pool, s, {20, 0, 2, true});
  CHECK(r.triplets.size() == 100);
  CHECK(r.degenerate.empty());
}

TEST_CASE("remote generator speaks the protocol") {
  httplib::Server server;
  int port = server.bind_to_any_port("127.0.0.1");
  server.Post("/generate", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    json completions = json::array();
    for (int i = 0; i < body["n"].get<int>(); ++i) completions.push_back("c" + std::to_string(i));
    res.set_content(json{{"completions", completions}}.dump(), "application/json");
  });
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  RemoteGenerator gen("remote", "http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(2000),
                      {2, std::chrono::milliseconds(1)});
  auto out = gen.generate(edits::build_cot_prompt("d"), "d", 3);
  server.stop();
  t.join();
  CHECK(out == std::vector<std::string>{"c0", "c1", "c2"});

  RemoteGenerator dead("dead", "http://127.0.0.1:1", std::chrono::milliseconds(200), {1, std::chrono::milliseconds(1)});
  try {
    dead.generate("p", "d", 1);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(e.code() == GenerationError::Code::kUnreachable);
  }
}

TEST_CASE("generator specs load with relative paths") {
  wqtest::TempDir dir;
  write_file(dir / "gpt.jsonl", json{{"draft", "hello"}, {"completions", {"x"}}}.dump() + "\n");
  write_file(dir / "spec.json", R"({"generators": {"gpt-4o": {"kind": "replay", "id": "gpt-sft", "completions": "gpt.jsonl"}}})");
  auto spec = load_generator_spec(dir / "spec.json");
  REQUIRE(spec.by_source_model.contains("gpt-4o"));
  CHECK_FALSE(spec.fallback);
  GeneratorPool pool(spec);
  CHECK(pool.for_model("gpt-4o").id() == "gpt-sft");
  CHECK(pool.for_model("gpt-4o").generate("", "hello", 5) == std::vector<std::string>{"x"});

  write_file(dir / "bare.json", R"({"kind": "replay", "completions": "gpt.jsonl"})");
  auto bare = load_generator_spec(dir / "bare.json");
  CHECK(bare.fallback);
}
