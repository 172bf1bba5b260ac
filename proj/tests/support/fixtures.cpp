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

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unistd.h>

#include "wq/common.hpp"

namespace wqtest {

using wq::json;
using wq::corpus::Dataset;

std::filesystem::path source_dir() { return WQ_SOURCE_DIR; }

std::string golden(const std::string& name) { return wq::read_file(source_dir() / "tests" / "golden" / name); }

std::string template_text(const std::string& name) { return wq::read_file(source_dir() / "templates" / name); }

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

wq::edits::EditTrace table5_trace() {
  wq::edits::EditTrace t;
  t.draft =
      "As I sat in my car, the rain drummed against the roof, a relentless beat that mirrored the anxiety "
      "thrumming through my veins. I was waiting for a call, any call, that would give me a reason to move, to "
      "act, to escape the suffocating stillness. La Conchita's streets were a mess, cars hydroplaning on the "
      "flooded roads, people scurrying for cover like ants from a disturbed nest. I watched as a woman, her hair "
      "plastered to her face, struggled to free her stuck umbrella, her eyes darting towards me with a fleeting "
      "plea for help. I looked away, feeling the weight of my inaction. The rain-soaked world outside seemed to "
      "be shrinking, the droplets on my windshield coalescing into tiny mirrors that reflected my own "
      "uncertainty. My phone, silent and unyielding, lay on the passenger seat, a constant reminder of my "
      "powerlessness. I thought of all the what-ifs, the maybes, the possibilities that hung in the balance. The "
      "rain intensified, drumming out a rhythm that seemed to match the beat of my heart. In the chaos, I felt a "
      "strange sense of calm, as if the storm was washing away my doubts, leaving only the stark reality of the "
      "present. And yet, I remained frozen, waiting for that call, that spark, that would set me in motion.";
  auto add = [&](std::string o, std::string r) { t.edits.push_back({std::move(o), std::move(r), std::nullopt}); };
  add("roof, a relentless beat that mirrored the anxiety thrumming through my veins.", "roof.");
  add("to act, to escape the suffocating stillness.", "to act.");
  add("a mess, cars", "a mess. Cars");
  add("roads, people", "roads. People");
  add("umbrella, her eyes darting towards", "umbrella. Her eyes darted towards");
  add("I looked away, feeling the weight of my inaction.", "I looked away.");
  add("My phone, silent and unyielding, lay", "My phone lay");
  add("passenger seat, a constant reminder of my powerlessness.", "passenger seat.");
  add("all the what-ifs, the maybes, the possibilities", "all the possibilities");
  add("The rain intensified, drumming out a rhythm that seemed to match the beat of my heart.",
      "The rain intensified.");
  add("In the chaos, I felt a strange sense of calm, as if the storm was washing away my doubts, leaving only the "
      "stark reality of the present. And yet, I remained",
      "I remained");
  add("waiting for that call, that spark, that would set me in motion.", "waiting for that call.");
  t.final_text =
      "As I sat in my car, the rain drummed against the roof. I was waiting for a call, any call, that would give "
      "me a reason to move, to act. La Conchita's streets were a mess. Cars hydroplaning on the flooded roads. "
      "People scurrying for cover like ants from a disturbed nest. I watched as a woman, her hair plastered to her "
      "face, struggled to free her stuck umbrella. Her eyes darted towards me with a fleeting plea for help. I "
      "looked away. The rain-soaked world outside seemed to be shrinking, the droplets on my windshield "
      "coalescing into tiny mirrors that reflected my own uncertainty. My phone lay on the passenger seat. I "
      "thought of all the possibilities that hung in the balance. The rain intensified. I remained frozen, "
      "waiting for that call.";
  return t;
}

wq::edits::EditTrace table8_trace() {
  auto j = json::parse(golden("table8_trace.json"));
  return wq::edits::trace_from_json(j);
}

Table7 table7_triplet() {
  auto j = wq::json::parse(golden("table7_triplet.json"));
  Table7 t;
  t.instruction = j["instruction"].get<std::string>();
  for (std::size_t i = 0; i < 3; ++i) {
    t.texts[i] = j["responses"][i]["text"].get<std::string>();
    t.scores[i] = j["responses"][i]["score"].get<double>();
  }
  return t;
}

std::string random_words(std::mt19937_64& rng, std::size_t n, const std::string& tag) {
  static const std::vector<std::string> kVocab = {
      "rain", "window", "harbor", "letter", "morning", "quiet", "river", "kitchen", "shadow", "garden",
      "mother", "train", "salt", "lamp", "winter", "bridge", "voice", "paper", "field", "coat",
      "silver", "glass", "stone", "orchard", "evening", "thread", "market", "bell", "dust", "hollow"};
  std::string out = tag;
  for (std::size_t i = 1; i < n; ++i) {
    out += ' ';
    out += kVocab[rng() % kVocab.size()];
  }
  return out;
}

namespace {

const std::vector<std::string> kCategories = {"Awkward Word Choice and Phrasing", "Lack of Specificity and Detail",
                                              "Cliche", "Purple Prose", "Unnecessary Exposition"};

// Draft of unique tokens; edits replace disjoint token ranges. The expected
// final is built by splicing at token positions, independently of apply_all.
OracleTrace synthetic_trace(std::size_t index, std::mt19937_64& rng) {
  std::size_t n_tokens = 40 + rng() % 80;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n_tokens; ++i) tokens.push_back("t" + std::to_string(index) + "x" + std::to_string(i) + ",");
  std::size_t n_edits = 1 + rng() % 8;

  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end) token ranges
  std::size_t cursor = rng() % 4;
  for (std::size_t e = 0; e < n_edits && cursor + 1 < n_tokens; ++e) {
    std::size_t len = 1 + rng() % 4;
    std::size_t end = std::min(n_tokens, cursor + len);
    ranges.push_back({cursor, end});
    cursor = end + 1 + rng() % 6;
  }
  auto join = [&](std::size_t b, std::size_t e) {
    std::string s;
    for (std::size_t i = b; i < e; ++i) s += (i > b ? " " : "") + tokens[i];
    return s;
  };

  std::vector<std::string> replacements;
  for (std::size_t e = 0; e < ranges.size(); ++e) {
    std::string r = "r" + std::to_string(index) + "y" + std::to_string(e);
    for (std::size_t k = rng() % 3; k > 0; --k) r += " r" + std::to_string(index) + "y" + std::to_string(e) + "z" + std::to_string(k);
    replacements.push_back(r);
  }

  OracleTrace ot;
  ot.trace.draft = join(0, n_tokens);
  std::size_t prev = 0;
  std::string final_text;
  for (std::size_t e = 0; e < ranges.size(); ++e) {
    auto [b, en] = ranges[e];
    std::string before = join(prev, b);
    final_text += before;
    if (!before.empty()) final_text += ' ';
    final_text += replacements[e];
    if (en < n_tokens) final_text += ' ';
    prev = en;
  }
  final_text += join(prev, n_tokens);
  ot.expected_final = final_text;

  // Apply order is shuffled; spans are unique so order does not matter.
  std::vector<std::size_t> order(ranges.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (auto e : order) {
    ot.trace.edits.push_back({join(ranges[e].first, ranges[e].second), replacements[e],
                              kCategories[rng() % kCategories.size()]});
  }
  ot.trace.final_text = ot.expected_final;
  return ot;
}

}  // namespace

std::vector<OracleTrace> fixture_traces(std::uint64_t seed) {
  std::vector<OracleTrace> out;
  auto t5 = table5_trace();
  out.push_back({t5, *t5.final_text});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 1; i < 50; ++i) out.push_back(synthetic_trace(i, rng));
  return out;
}

std::size_t reference_record_count(Dataset dataset) {
  switch (dataset) {
    case Dataset::kArtOrArtifice: return 144;  // already both orders
    case Dataset::kLampTest: return 201;       // 3 pairs each, then AB/BA
    case Dataset::kStyleMimic: return 150;
    case Dataset::kSyntheticMirror: return 560;
    case Dataset::kLmArena: return 1959;
  }
  return 0;
}

std::vector<wq::Line> raw_records(Dataset dataset, std::size_t n_records, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(dataset) << 32));
  std::vector<wq::Line> lines;
  auto text = [&](const std::string& tag, std::size_t lo, std::size_t hi) {
    return random_words(rng, lo + rng() % (hi - lo + 1), tag);
  };
  auto push = [&](const json& j) { lines.push_back({lines.size() + 1, j.dump()}); };
  switch (dataset) {
    case Dataset::kArtOrArtifice: {
      for (std::size_t k = 0; k < n_records / 2; ++k) {
        std::string base = "art" + std::to_string(k);
        std::string instr = text("prompt-" + base, 8, 15);
        json a = {{"id", base + "-x"}, {"text", text(base + "-x", 120, 400)}, {"origin", {{"kind", "ai"}, {"model", "gpt-4"}}}};
        json b = {{"id", base + "-y"}, {"text", text(base + "-y", 120, 400)},
                  {"origin", {{"kind", "human"}, {"category", "award-author"}}}};
        int pref = 1 + static_cast<int>(rng() % 2);
        push({{"id", base + "-ab"}, {"instruction", instr}, {"response_1", a}, {"response_2", b}, {"preferred", pref}});
        push({{"id", base + "-ba"}, {"instruction", instr}, {"response_1", b}, {"response_2", a}, {"preferred", 3 - pref}});
      }
      break;
    }
    case Dataset::kLampTest: {
      for (std::size_t k = 0; k < n_records; ++k) {
        std::string base = "lamp" + std::to_string(k);
        std::array<int, 3> ranks{1, 2, 3};
        std::shuffle(ranks.begin(), ranks.end(), rng);
        json responses = json::array();
        for (int i = 0; i < 3; ++i) {
          responses.push_back({{"text", text(base + "-" + std::to_string(i), 150, 400)},
                               {"origin", {{"kind", i == 0 ? "human" : "ai"}, {i == 0 ? "category" : "model", i == 0 ? "mfa-student" : "llama-3.1-70b"}}}});
        }
        push({{"id", base}, {"instruction", text("prompt-" + base, 8, 15)}, {"responses", responses}, {"ranks", ranks}});
      }
      break;
    }
    case Dataset::kStyleMimic: {
      for (std::size_t k = 0; k < n_records; ++k) {
        std::string base = "mimic" + std::to_string(k);
        push({{"id", base}, {"instruction", text("prompt-" + base, 8, 15)},
              {"author", {{"text", text(base + "-author", 100, 300)}}},
              {"student", {{"text", text(base + "-student", 100, 300)}}}});
      }
      break;
    }
    case Dataset::kSyntheticMirror: {
      for (std::size_t k = 0; k < n_records; ++k) {
        std::string base = "mirror" + std::to_string(k);
        push({{"id", base}, {"instruction", text("prompt-" + base, 8, 15)},
              {"human", {{"text", text(base + "-human", 100, 300)}}},
              {"mirror", {{"text", text(base + "-mirror", 100, 300)}, {"model", k % 2 ? "claude-3.5-sonnet" : "gpt-4o"}}}});
      }
      break;
    }
    case Dataset::kLmArena: {
      for (std::size_t k = 0; k < n_records; ++k) {
        std::string base = "arena" + std::to_string(k);
        push({{"id", base}, {"instruction", text("prompt-" + base, 8, 15)},
              {"response_a", {{"text", text(base + "-a", 100, 600)}, {"model", "model-a"}}},
              {"response_b", {{"text", text(base + "-b", 100, 600)}, {"model", "model-b"}}},
              {"winner", rng() % 2 ? "model_a" : "model_b"}});
      }
      break;
    }
  }
  return lines;
}

std::vector<wq::corpus::PreferencePair> table1_corpus(std::uint64_t seed) {
  std::vector<wq::corpus::PreferencePair> all;
  for (auto d : wq::corpus::kAllDatasets) {
    wq::corpus::AdapterConfig config;
    config.seed = seed;
    auto r = wq::corpus::ingest_lines(raw_records(d, reference_record_count(d), seed), d, config);
    if (!r.rejections.empty()) throw std::runtime_error("fixture record rejected: " + r.rejections.front().detail);
    all.insert(all.end(), r.pairs.begin(), r.pairs.end());
  }
  return all;
}

std::vector<wq::corpus::LampSample> lamp_fixture(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> score(1.0, 10.0);
  std::vector<wq::corpus::LampSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    wq::corpus::LampSample s;
    s.id = "lamp-" + std::to_string(i);
    s.instruction = random_words(rng, 10, "instruction-" + std::to_string(i));
    s.draft = random_words(rng, 60, "draft-" + std::to_string(i));
    s.edited = random_words(rng, 50, "edited-" + std::to_string(i));
    s.draft_score = score(rng);
    s.edited_score = score(rng);
    s.split = wq::corpus::Split::kTrain;
    out.push_back(std::move(s));
  }
  return out;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("wqtest-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace wqtest
