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

#include "wq/corpus.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace wq::corpus {
namespace {

struct RecordReject {
  RejectReason reason;
  std::string detail;
};

// Thrown inside adapters to reject the current record only.
struct RejectRecord : std::exception {
  RejectReason reason;
  std::string detail;
  RejectRecord(RejectReason r, std::string d) : reason(r), detail(std::move(d)) {}
};

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw RejectRecord(RejectReason::kMissingField, std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw RejectRecord(RejectReason::kMalformedRecord, std::string("bad type for '") + key + "'");
  }
}

std::string optional_string(const json& j, const char* key, std::string fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) {
    throw RejectRecord(RejectReason::kMalformedRecord, std::string("bad type for '") + key + "'");
  }
  return it->get<std::string>();
}

const json& object_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_object()) {
    throw RejectRecord(RejectReason::kMissingField, std::string("missing object '") + key + "'");
  }
  return *it;
}

Domain record_domain(const json& rec, Domain fallback) {
  auto it = rec.find("domain");
  if (it == rec.end() || it->is_null()) return fallback;
  try {
    return parse_domain(it->get<std::string>());
  } catch (const std::exception&) {
    throw RejectRecord(RejectReason::kMalformedRecord, "unknown domain");
  }
}

Origin record_origin(const json& resp) {
  auto it = resp.find("origin");
  if (it == resp.end() || !it->is_object()) {
    throw RejectRecord(RejectReason::kMissingField, "missing object 'origin'");
  }
  try {
    return origin_from_json(*it);
  } catch (const std::exception& e) {
    throw RejectRecord(RejectReason::kMalformedRecord, std::string("bad origin: ") + e.what());
  }
}

WritingSample response_sample(const json& resp, const std::string& fallback_id,
                              const std::string& instruction, Origin origin, Domain domain) {
  auto id = optional_string(resp, "id", fallback_id);
  auto text = field<std::string>(resp, "text");
  return make_sample(std::move(id), instruction, std::move(text), std::move(origin), domain);
}

PreferencePair make_pair(Dataset dataset, std::string id, std::string instruction,
                         WritingSample a, WritingSample b, int label) {
  PreferencePair p;
  p.id = std::move(id);
  p.dataset = dataset;
  p.instruction = std::move(instruction);
  p.response_1 = std::move(a);
  p.response_2 = std::move(b);
  p.gold_label = label;
  p.annotator_kind = annotator_for(dataset);
  return p;
}

void check_pair_or_reject(const PreferencePair& p) {
  if (p.response_1.response.empty() || p.response_2.response.empty()) {
    throw RejectRecord(RejectReason::kEmptyResponse, "empty response text");
  }
  if (p.response_1.id == p.response_2.id) {
    throw RejectRecord(RejectReason::kDuplicateResponseId, "both responses have id " + p.response_1.id);
  }
  if (p.response_1.response == p.response_2.response) {
    throw RejectRecord(RejectReason::kIdenticalResponses, "responses are identical");
  }
}

void check_bounds(const PreferencePair& p, const std::optional<WordBounds>& bounds) {
  if (!bounds) return;
  for (const auto* s : {&p.response_1, &p.response_2}) {
    if (s->word_count < bounds->min || s->word_count > bounds->max) {
      throw RejectRecord(RejectReason::kWordCountOutOfRange,
                         "response " + s->id + " has " + std::to_string(s->word_count) + " words");
    }
  }
}

// art-or-artifice: pairwise judgments, usually already in both orders.
std::vector<PreferencePair> adapt_art(const json& rec, const std::string& id) {
  auto instruction = field<std::string>(rec, "instruction");
  auto domain = record_domain(rec, Domain::kFiction);
  const auto& r1 = object_field(rec, "response_1");
  const auto& r2 = object_field(rec, "response_2");
  auto a = response_sample(r1, id + ":1", instruction, record_origin(r1), domain);
  auto b = response_sample(r2, id + ":2", instruction, record_origin(r2), domain);
  int label = field<int>(rec, "preferred");
  if (label != 1 && label != 2) throw RejectRecord(RejectReason::kTiedPreference, "preferred must be 1 or 2");
  return {make_pair(Dataset::kArtOrArtifice, id, instruction, std::move(a), std::move(b), label)};
}

// lamp-test: three responses with majority ranks; one pair per response pair.
std::vector<PreferencePair> adapt_lamp_test(const json& rec, const std::string& id,
                                            std::vector<RecordReject>& partial) {
  auto instruction = field<std::string>(rec, "instruction");
  auto domain = record_domain(rec, Domain::kOther);
  auto resp_it = rec.find("responses");
  auto rank_it = rec.find("ranks");
  if (resp_it == rec.end() || rank_it == rec.end()) {
    throw RejectRecord(RejectReason::kMissingField, "missing 'responses' or 'ranks'");
  }
  if (!resp_it->is_array() || resp_it->size() != 3 || !rank_it->is_array() || rank_it->size() != 3) {
    throw RejectRecord(RejectReason::kInvalidRanking, "expected 3 responses and 3 ranks");
  }
  std::vector<WritingSample> samples;
  std::vector<int> ranks;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& r = (*resp_it)[i];
    if (!r.is_object()) throw RejectRecord(RejectReason::kMalformedRecord, "response is not an object");
    samples.push_back(response_sample(r, id + ":" + std::to_string(i + 1), instruction,
                                      record_origin(r), domain));
    if (!(*rank_it)[i].is_number_integer()) throw RejectRecord(RejectReason::kInvalidRanking, "non-integer rank");
    int rank = (*rank_it)[i].get<int>();
    if (rank < 1 || rank > 3) throw RejectRecord(RejectReason::kInvalidRanking, "rank outside 1..3");
    ranks.push_back(rank);
  }
  std::vector<PreferencePair> out;
  static constexpr std::array<std::pair<int, int>, 3> kPairs = {{{0, 1}, {0, 2}, {1, 2}}};
  for (auto [i, j] : kPairs) {
    std::string pid = id + ":" + std::to_string(i + 1) + std::to_string(j + 1);
    if (ranks[i] == ranks[j]) {
      partial.push_back({RejectReason::kTiedPreference, "pair " + pid + " is tied"});
      continue;
    }
    out.push_back(make_pair(Dataset::kLampTest, pid, instruction, samples[i], samples[j],
                            ranks[i] < ranks[j] ? 1 : 2));
  }
  return out;
}

// style-mimic: original author paragraph (preferred) vs. MFA student imitation.
std::vector<PreferencePair> adapt_style_mimic(const json& rec, const std::string& id) {
  auto instruction = field<std::string>(rec, "instruction");
  auto domain = record_domain(rec, Domain::kFiction);
  auto a = response_sample(object_field(rec, "author"), id + ":author", instruction,
                           Origin::human(HumanCategory::kAwardAuthor), domain);
  auto b = response_sample(object_field(rec, "student"), id + ":student", instruction,
                           Origin::human(HumanCategory::kMfaStudent), domain);
  return {make_pair(Dataset::kStyleMimic, id, instruction, std::move(a), std::move(b), 1)};
}

// synthetic-mirror: human-written paragraph (preferred) vs. its AI mirror.
std::vector<PreferencePair> adapt_mirror(const json& rec, const std::string& id) {
  auto instruction = field<std::string>(rec, "instruction");
  auto domain = record_domain(rec, Domain::kFiction);
  const auto& mirror = object_field(rec, "mirror");
  auto a = response_sample(object_field(rec, "human"), id + ":human", instruction,
                           Origin::human(HumanCategory::kAwardAuthor), domain);
  auto b = response_sample(mirror, id + ":mirror", instruction,
                           Origin::ai(field<std::string>(mirror, "model")), domain);
  return {make_pair(Dataset::kSyntheticMirror, id, instruction, std::move(a), std::move(b), 1)};
}

// lm-arena: crowd battles; filters non-tied, allowlisted, English, 100-2000 words.
std::vector<PreferencePair> adapt_arena(const json& rec, const std::string& id,
                                        const AdapterConfig& config) {
  auto instruction = field<std::string>(rec, "instruction");
  auto domain = record_domain(rec, Domain::kOther);
  const auto& ra = object_field(rec, "response_a");
  const auto& rb = object_field(rec, "response_b");
  auto winner = field<std::string>(rec, "winner");
  int label = 0;
  if (winner == "a" || winner == "model_a") {
    label = 1;
  } else if (winner == "b" || winner == "model_b") {
    label = 2;
  } else if (winner.starts_with("tie")) {
    throw RejectRecord(RejectReason::kTiedPreference, "winner is '" + winner + "'");
  } else {
    throw RejectRecord(RejectReason::kMalformedRecord, "unknown winner '" + winner + "'");
  }
  if (config.allowlist && !config.allowlist->contains(id)) {
    throw RejectRecord(RejectReason::kNotInAllowlist, "id not in allowlist");
  }
  auto a = response_sample(ra, id + ":a", instruction, Origin::ai(field<std::string>(ra, "model")), domain);
  auto b = response_sample(rb, id + ":b", instruction, Origin::ai(field<std::string>(rb, "model")), domain);
  for (const auto* text : {&instruction, &a.response, &b.response}) {
    if (!text->empty() && !config.is_english(*text)) {
      throw RejectRecord(RejectReason::kNonEnglish, "non-English content");
    }
  }
  return {make_pair(Dataset::kLmArena, id, instruction, std::move(a), std::move(b), label)};
}

// Decodes one UTF-8 code point; returns false on malformed input.
bool next_code_point(std::string_view s, std::size_t& i, char32_t& cp) {
  auto c = static_cast<unsigned char>(s[i]);
  int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + len > s.size()) return false;
  cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
  for (int k = 1; k < len; ++k) {
    auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc >> 6) != 0x2) return false;
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += len;
  return true;
}

bool is_non_letter_block(char32_t cp) {
  return (cp >= 0x2000 && cp <= 0x2BFF) ||   // punctuation, symbols, arrows, shapes
         (cp >= 0x3000 && cp <= 0x303F) ||   // CJK punctuation
         (cp >= 0xFE00 && cp <= 0xFE0F) ||   // variation selectors
         (cp >= 0xE000 && cp <= 0xF8FF) ||   // private use
         (cp >= 0xFF00 && cp <= 0xFF0F) ||
         cp >= 0x1F000;                      // emoji and pictographs
}

}  // namespace

WritingSample make_sample(std::string id, std::string instruction, std::string response,
                          Origin origin, Domain domain) {
  WritingSample s;
  s.id = std::move(id);
  s.instruction = std::move(instruction);
  s.word_count = word_count(response);
  s.response = std::move(response);
  s.origin = std::move(origin);
  s.domain = domain;
  return s;
}

PreferencePair swap_order(const PreferencePair& pair) {
  PreferencePair out = pair;
  std::swap(out.response_1, out.response_2);
  out.gold_label = pair.gold_label == 1 ? 2 : 1;
  return out;
}

BenchmarkManifest BenchmarkManifest::reference() {
  BenchmarkManifest m;
  m.counts = {{Dataset::kArtOrArtifice, 144},
              {Dataset::kLampTest, 1206},
              {Dataset::kStyleMimic, 300},
              {Dataset::kSyntheticMirror, 1120},
              {Dataset::kLmArena, 1959}};
  m.total = 4729;
  return m;
}

BenchmarkManifest BenchmarkManifest::from_pairs(const std::vector<PreferencePair>& pairs) {
  BenchmarkManifest m;
  for (auto d : kAllDatasets) m.counts[d] = 0;
  for (const auto& p : pairs) ++m.counts[p.dataset];
  m.total = pairs.size();
  return m;
}

bool looks_english(std::string_view text, double min_ratio) {
  std::size_t latin = 0;
  std::size_t alphabetic = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    if (!next_code_point(text, i, cp)) return false;
    if (cp < 0x80) {
      if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) {
        ++latin;
        ++alphabetic;
      }
    } else if (cp >= 0xC0 && cp <= 0xFF && cp != 0xD7 && cp != 0xF7) {
      ++latin;
      ++alphabetic;
    } else if (cp >= 0x100 && !is_non_letter_block(cp)) {
      ++alphabetic;
    }
  }
  if (alphabetic == 0) return false;
  return static_cast<double>(latin) >= min_ratio * static_cast<double>(alphabetic);
}

std::optional<WordBounds> default_word_bounds(Dataset dataset) {
  if (dataset == Dataset::kLmArena) return WordBounds{100, 2000};
  return std::nullopt;
}

IngestResult ingest_dataset(const std::filesystem::path& source, Dataset dataset,
                            const AdapterConfig& config) {
  return ingest_lines(read_lines(source), dataset, config);
}

IngestResult ingest_lines(const std::vector<Line>& lines, Dataset dataset,
                          const AdapterConfig& config) {
  IngestResult result;
  const auto bounds = config.word_bounds ? config.word_bounds : default_word_bounds(dataset);
  std::unordered_set<std::string> seen_ids;
  std::vector<PreferencePair> accepted;

  for (const auto& line : lines) {
    std::string record_id;
    std::vector<RecordReject> partial;
    try {
      json rec;
      try {
        rec = json::parse(line.text);
      } catch (const json::parse_error& e) {
        throw RejectRecord(RejectReason::kMalformedRecord, e.what());
      }
      if (!rec.is_object()) throw RejectRecord(RejectReason::kMalformedRecord, "record is not an object");
      record_id = field<std::string>(rec, "id");
      if (!seen_ids.insert(record_id).second) {
        throw RejectRecord(RejectReason::kDuplicateRecordId, "record id repeated");
      }
      std::vector<PreferencePair> pairs;
      switch (dataset) {
        case Dataset::kArtOrArtifice: pairs = adapt_art(rec, record_id); break;
        case Dataset::kLampTest: pairs = adapt_lamp_test(rec, record_id, partial); break;
        case Dataset::kStyleMimic: pairs = adapt_style_mimic(rec, record_id); break;
        case Dataset::kSyntheticMirror: pairs = adapt_mirror(rec, record_id); break;
        case Dataset::kLmArena: pairs = adapt_arena(rec, record_id, config); break;
      }
      for (const auto& p : pairs) {
        check_pair_or_reject(p);
        check_bounds(p, bounds);
      }
      for (auto& p : pairs) accepted.push_back(std::move(p));
    } catch (const RejectRecord& r) {
      result.rejections.push_back({line.number, record_id, r.reason, r.detail});
    }
    for (auto& r : partial) {
      result.rejections.push_back({line.number, record_id, r.reason, std::move(r.detail)});
    }
  }

  if (accepted.empty()) return result;
  auto mode = dataset == Dataset::kLmArena ? BalanceMode::kShuffleBalance : BalanceMode::kDuplicate;
  auto balanced = balance_orders(accepted, mode, config.seed);
  result.pairs = std::move(balanced.pairs);
  result.preduplicated = balanced.preduplicated;
  return result;
}

BalanceOutcome balance_orders(const std::vector<PreferencePair>& pairs, BalanceMode mode,
                              std::uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("balance_orders: no pairs");
  BalanceOutcome out;

  if (mode == BalanceMode::kShuffleBalance) {
    std::mt19937_64 rng(seed);
    std::vector<PreferencePair> shuffled = pairs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::vector<int> targets(shuffled.size(), 2);
    std::fill(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>((shuffled.size() + 1) / 2), 1);
    std::shuffle(targets.begin(), targets.end(), rng);
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      if (shuffled[i].gold_label != targets[i]) shuffled[i] = swap_order(shuffled[i]);
    }
    out.pairs = std::move(shuffled);
    return out;
  }

  // A pair is mirrored when another pair holds the same two responses in the
  // opposite order with the complementary label.
  auto key = [](const PreferencePair& p, bool swapped) {
    const auto& a = swapped ? p.response_2 : p.response_1;
    const auto& b = swapped ? p.response_1 : p.response_2;
    int label = swapped ? (p.gold_label == 1 ? 2 : 1) : p.gold_label;
    return p.instruction + '\x1f' + a.id + '\x1f' + b.id + '\x1f' + std::to_string(label);
  };
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pairs.size(); ++i) index.emplace(key(pairs[i], false), i);

  for (const auto& p : pairs) {
    if (index.contains(key(p, true))) {
      ++out.mirrored;
      out.pairs.push_back(p);
      continue;
    }
    PreferencePair ab = p;
    ab.id = p.id + ":ab";
    PreferencePair ba = swap_order(p);
    ba.id = p.id + ":ba";
    out.pairs.push_back(std::move(ab));
    out.pairs.push_back(std::move(ba));
  }
  out.preduplicated = out.mirrored == pairs.size();
  return out;
}

AnnotatorKind annotator_for(Dataset dataset) {
  return dataset == Dataset::kLmArena ? AnnotatorKind::kCrowd : AnnotatorKind::kExpert;
}

std::vector<std::string> check_pair(const PreferencePair& p) {
  std::vector<std::string> v;
  auto tag = "pair '" + p.id + "': ";
  if (p.gold_label != 1 && p.gold_label != 2) v.push_back(tag + "gold label must be 1 or 2");
  if (p.response_1.id == p.response_2.id) v.push_back(tag + "responses share id " + p.response_1.id);
  if (p.response_1.response == p.response_2.response) v.push_back(tag + "identical response texts");
  if (p.annotator_kind != annotator_for(p.dataset)) v.push_back(tag + "annotator kind does not match dataset");
  for (const auto* s : {&p.response_1, &p.response_2}) {
    if (s->response.empty()) v.push_back(tag + "empty response " + s->id);
    if (s->word_count != word_count(s->response)) v.push_back(tag + "stale word count on " + s->id);
  }
  return v;
}

ValidationReport validate_manifest(const std::vector<PreferencePair>& pairs,
                                   const BenchmarkManifest& expected) {
  ValidationReport r;
  auto actual = BenchmarkManifest::from_pairs(pairs);
  for (auto d : kAllDatasets) {
    auto e = expected.counts.contains(d) ? expected.counts.at(d) : 0;
    auto a = actual.counts.at(d);
    if (e == 0 && a == 0 && !expected.counts.contains(d)) continue;
    r.counts[d] = {e, a};
    if (e != a) {
      r.violations.push_back(std::string(to_string(d)) + ": expected " + std::to_string(e) +
                             " pairs, found " + std::to_string(a));
    }
  }
  r.expected_total = expected.total;
  r.actual_total = actual.total;
  std::size_t sum = 0;
  for (const auto& [d, n] : expected.counts) sum += n;
  if (sum != expected.total) {
    r.violations.push_back("manifest total " + std::to_string(expected.total) +
                           " differs from the sum of its counts " + std::to_string(sum));
  }
  if (actual.total != expected.total) {
    r.violations.push_back("expected " + std::to_string(expected.total) + " pairs in total, found " +
                           std::to_string(actual.total));
  }

  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, const std::string*> sample_text;
  for (const auto& p : pairs) {
    if (!ids.insert(p.id).second) r.violations.push_back("duplicate pair id '" + p.id + "'");
    for (auto& msg : check_pair(p)) r.violations.push_back(std::move(msg));
    for (const auto* s : {&p.response_1, &p.response_2}) {
      auto [it, inserted] = sample_text.emplace(s->id, &s->response);
      if (!inserted && *it->second != s->response) {
        r.violations.push_back("sample id '" + s->id + "' refers to different texts");
      }
    }
  }
  r.passed = r.violations.empty();
  return r;
}

std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::kArtOrArtifice: return "art-or-artifice";
    case Dataset::kLampTest: return "lamp-test";
    case Dataset::kStyleMimic: return "style-mimic";
    case Dataset::kSyntheticMirror: return "synthetic-mirror";
    case Dataset::kLmArena: return "lm-arena";
  }
  return "unknown";
}

std::string_view to_string(AnnotatorKind k) { return k == AnnotatorKind::kExpert ? "expert" : "crowd"; }

std::string_view to_string(HumanCategory c) {
  switch (c) {
    case HumanCategory::kAwardAuthor: return "award-author";
    case HumanCategory::kMfaStudent: return "mfa-student";
    case HumanCategory::kCrowd: return "crowd";
  }
  return "unknown";
}

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::kFiction: return "fiction";
    case Domain::kNonfiction: return "nonfiction";
    case Domain::kMarketing: return "marketing";
    case Domain::kOther: return "other";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kMalformedRecord: return "malformed-record";
    case RejectReason::kMissingField: return "missing-field";
    case RejectReason::kEmptyResponse: return "empty-response";
    case RejectReason::kIdenticalResponses: return "identical-responses";
    case RejectReason::kDuplicateResponseId: return "duplicate-response-id";
    case RejectReason::kDuplicateRecordId: return "duplicate-record-id";
    case RejectReason::kTiedPreference: return "tied-preference";
    case RejectReason::kInvalidRanking: return "invalid-ranking";
    case RejectReason::kNonEnglish: return "non-english";
    case RejectReason::kWordCountOutOfRange: return "word-count-out-of-range";
    case RejectReason::kNotInAllowlist: return "not-in-allowlist";
  }
  return "unknown";
}

Dataset parse_dataset(std::string_view name) {
  for (auto d : kAllDatasets) {
    if (to_string(d) == name) return d;
  }
  throw std::invalid_argument("unknown dataset '" + std::string(name) + "'");
}

HumanCategory parse_human_category(std::string_view name) {
  for (auto c : {HumanCategory::kAwardAuthor, HumanCategory::kMfaStudent, HumanCategory::kCrowd}) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown human category '" + std::string(name) + "'");
}

Domain parse_domain(std::string_view name) {
  for (auto d : {Domain::kFiction, Domain::kNonfiction, Domain::kMarketing, Domain::kOther}) {
    if (to_string(d) == name) return d;
  }
  throw std::invalid_argument("unknown domain '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
  for (auto s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

json to_json(const Origin& o) {
  if (o.kind == Origin::Kind::kAi) return {{"kind", "ai"}, {"model", o.model}};
  return {{"kind", "human"}, {"category", to_string(o.category)}};
}

json to_json(const WritingSample& s) {
  return {{"id", s.id},
          {"instruction", s.instruction},
          {"response", s.response},
          {"origin", to_json(s.origin)},
          {"domain", to_string(s.domain)},
          {"word_count", s.word_count}};
}

json to_json(const PreferencePair& p) {
  return {{"id", p.id},
          {"dataset", to_string(p.dataset)},
          {"instruction", p.instruction},
          {"response_1", to_json(p.response_1)},
          {"response_2", to_json(p.response_2)},
          {"gold_label", p.gold_label},
          {"annotator_kind", to_string(p.annotator_kind)}};
}

json to_json(const LampSample& s) {
  json j = {{"id", s.id},
            {"instruction", s.instruction},
            {"draft", s.draft},
            {"edited", s.edited},
            {"draft_score", s.draft_score},
            {"edited_score", s.edited_score},
            {"split", to_string(s.split)}};
  if (s.edit_trace) {
    json edits = json::array();
    for (const auto& e : s.edit_trace->edits) edits.push_back(edits::to_json(e));
    j["edit_trace"] = {{"edits", std::move(edits)}};
  }
  return j;
}

json to_json(const BenchmarkManifest& m) {
  json counts = json::object();
  for (const auto& [d, n] : m.counts) counts[std::string(to_string(d))] = n;
  return {{"counts", std::move(counts)}, {"total", m.total}};
}

json to_json(const ValidationReport& r) {
  json counts = json::object();
  for (const auto& [d, c] : r.counts) {
    counts[std::string(to_string(d))] = {{"expected", c.expected}, {"actual", c.actual}, {"delta", c.delta()}};
  }
  return {{"passed", r.passed},
          {"expected_total", r.expected_total},
          {"actual_total", r.actual_total},
          {"counts", std::move(counts)},
          {"violations", r.violations}};
}

json to_json(const Rejection& r) {
  return {{"line", r.line}, {"record_id", r.record_id}, {"reason", to_string(r.reason)}, {"detail", r.detail}};
}

Origin origin_from_json(const json& j) {
  auto kind = required<std::string>(j, "kind");
  if (kind == "ai") return Origin::ai(required<std::string>(j, "model"));
  if (kind == "human") return Origin::human(parse_human_category(required<std::string>(j, "category")));
  throw std::invalid_argument("unknown origin kind '" + kind + "'");
}

WritingSample sample_from_json(const json& j) {
  auto s = make_sample(required<std::string>(j, "id"), required<std::string>(j, "instruction"),
                       required<std::string>(j, "response"), origin_from_json(j.at("origin")),
                       parse_domain(required<std::string>(j, "domain")));
  if (auto it = j.find("word_count"); it != j.end() && it->get<std::size_t>() != s.word_count) {
    throw std::invalid_argument("sample '" + s.id + "': word_count does not match the text");
  }
  return s;
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  p.id = required<std::string>(j, "id");
  p.dataset = parse_dataset(required<std::string>(j, "dataset"));
  p.instruction = required<std::string>(j, "instruction");
  p.response_1 = sample_from_json(j.at("response_1"));
  p.response_2 = sample_from_json(j.at("response_2"));
  p.gold_label = required<int>(j, "gold_label");
  auto kind = required<std::string>(j, "annotator_kind");
  if (kind == "expert") {
    p.annotator_kind = AnnotatorKind::kExpert;
  } else if (kind == "crowd") {
    p.annotator_kind = AnnotatorKind::kCrowd;
  } else {
    throw std::invalid_argument("unknown annotator kind '" + kind + "'");
  }
  return p;
}

LampSample lamp_from_json(const json& j) {
  LampSample s;
  s.id = required<std::string>(j, "id");
  s.instruction = required<std::string>(j, "instruction");
  s.draft = required<std::string>(j, "draft");
  s.edited = required<std::string>(j, "edited");
  s.draft_score = required<double>(j, "draft_score");
  s.edited_score = required<double>(j, "edited_score");
  s.split = parse_split(j.contains("split") ? j.at("split").get<std::string>() : "train");
  for (double v : {s.draft_score, s.edited_score}) {
    if (!(v >= 1.0 && v <= 10.0)) {
      throw std::invalid_argument("sample '" + s.id + "': score " + format_double(v) + " outside [1, 10]");
    }
  }
  if (auto it = j.find("edit_trace"); it != j.end() && !it->is_null()) {
    edits::EditTrace t;
    t.draft = s.draft;
    for (const auto& e : it->at("edits")) t.edits.push_back(edits::edit_from_json(e));
    t.final_text = s.edited;
    if (edits::apply_all(t) != s.edited) {
      throw std::invalid_argument("sample '" + s.id + "': edit trace does not reproduce the edited text");
    }
    s.edit_trace = std::move(t);
  }
  return s;
}

BenchmarkManifest manifest_from_json(const json& j) {
  BenchmarkManifest m;
  for (const auto& [name, n] : j.at("counts").items()) m.counts[parse_dataset(name)] = n.get<std::size_t>();
  m.total = required<std::size_t>(j, "total");
  return m;
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  for (const auto& line : read_lines(path)) {
    try {
      pairs.push_back(pair_from_json(json::parse(line.text)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return pairs;
}

void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
  std::vector<json> records;
  records.reserve(pairs.size());
  for (const auto& p : pairs) records.push_back(to_json(p));
  write_jsonl(path, records);
}

std::vector<LampSample> read_lamp(const std::filesystem::path& path) {
  std::vector<LampSample> out;
  for (const auto& line : read_lines(path)) {
    try {
      out.push_back(lamp_from_json(json::parse(line.text)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace wq::corpus
