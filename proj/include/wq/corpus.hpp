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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wq/common.hpp"
#include "wq/edits.hpp"

namespace wq::corpus {

enum class Dataset { kArtOrArtifice, kLampTest, kStyleMimic, kSyntheticMirror, kLmArena };
inline constexpr std::array<Dataset, 5> kAllDatasets = {
    Dataset::kArtOrArtifice, Dataset::kLampTest, Dataset::kStyleMimic,
    Dataset::kSyntheticMirror, Dataset::kLmArena};

enum class AnnotatorKind { kExpert, kCrowd };
enum class HumanCategory { kAwardAuthor, kMfaStudent, kCrowd };
enum class Domain { kFiction, kNonfiction, kMarketing, kOther };
enum class Split { kTrain, kValidation, kTest };

struct Origin {
  enum class Kind { kAi, kHuman };
  Kind kind = Kind::kAi;
  std::string model;                               // kAi only
  HumanCategory category = HumanCategory::kCrowd;  // kHuman only

  static Origin ai(std::string model_name) { return {Kind::kAi, std::move(model_name), {}}; }
  static Origin human(HumanCategory c) { return {Kind::kHuman, {}, c}; }
  bool operator==(const Origin&) const = default;
};

struct WritingSample {
  std::string id;
  std::string instruction;
  std::string response;
  Origin origin;
  Domain domain = Domain::kOther;
  std::size_t word_count = 0;

  bool operator==(const WritingSample&) const = default;
};

WritingSample make_sample(std::string id, std::string instruction, std::string response,
                          Origin origin, Domain domain);

struct PreferencePair {
  std::string id;
  Dataset dataset = Dataset::kLmArena;
  std::string instruction;
  WritingSample response_1;
  WritingSample response_2;
  int gold_label = 1;
  AnnotatorKind annotator_kind = AnnotatorKind::kExpert;

  const WritingSample& preferred() const { return gold_label == 1 ? response_1 : response_2; }
  const WritingSample& rejected() const { return gold_label == 1 ? response_2 : response_1; }
  bool operator==(const PreferencePair&) const = default;
};

// Swaps response order and remaps the gold label. Involution; the id is kept.
PreferencePair swap_order(const PreferencePair& pair);

struct LampSample {
  std::string id;
  std::string instruction;
  std::string draft;
  std::string edited;
  double draft_score = 0;
  double edited_score = 0;
  std::optional<edits::EditTrace> edit_trace;
  Split split = Split::kTrain;
};

struct BenchmarkManifest {
  std::map<Dataset, std::size_t> counts;
  std::size_t total = 0;

  // The published benchmark composition: 144/1206/300/1120/1959, 4729 in total.
  static BenchmarkManifest reference();
  static BenchmarkManifest from_pairs(const std::vector<PreferencePair>& pairs);
};

enum class RejectReason {
  kMalformedRecord,
  kMissingField,
  kEmptyResponse,
  kIdenticalResponses,
  kDuplicateResponseId,
  kDuplicateRecordId,
  kTiedPreference,
  kInvalidRanking,
  kNonEnglish,
  kWordCountOutOfRange,
  kNotInAllowlist,
};

struct Rejection {
  std::size_t line = 0;
  std::string record_id;
  RejectReason reason = RejectReason::kMalformedRecord;
  std::string detail;
};

using LanguagePredicate = std::function<bool(std::string_view)>;

// Default English filter: at least `min_ratio` of alphabetic code points are
// ASCII or Latin-1 letters. Invalid UTF-8 is never English.
bool looks_english(std::string_view text, double min_ratio = 0.9);

struct WordBounds {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct AdapterConfig {
  std::uint64_t seed = 0;
  // Per-response word bounds. Unset means the dataset default (LM Arena only).
  std::optional<WordBounds> word_bounds;
  // LM Arena: ids kept by the external noise filter. Unset disables the filter.
  std::optional<std::set<std::string>> allowlist;
  LanguagePredicate is_english = [](std::string_view t) { return looks_english(t); };
};

std::optional<WordBounds> default_word_bounds(Dataset dataset);

struct IngestResult {
  std::vector<PreferencePair> pairs;
  std::vector<Rejection> rejections;
  bool preduplicated = false;
};

// Parses a raw line-delimited dataset file. Malformed records are rejected
// individually; the whole call only throws if the file can't be read.
IngestResult ingest_dataset(const std::filesystem::path& source, Dataset dataset,
                            const AdapterConfig& config);
IngestResult ingest_lines(const std::vector<Line>& lines, Dataset dataset,
                          const AdapterConfig& config);

enum class BalanceMode { kDuplicate, kShuffleBalance };

struct BalanceOutcome {
  std::vector<PreferencePair> pairs;
  // Every input pair already had its swapped twin; output equals input.
  bool preduplicated = false;
  std::size_t mirrored = 0;
};

BalanceOutcome balance_orders(const std::vector<PreferencePair>& pairs, BalanceMode mode,
                              std::uint64_t seed = 0);

struct DatasetCount {
  std::size_t expected = 0;
  std::size_t actual = 0;
  long long delta() const {
    return static_cast<long long>(expected) - static_cast<long long>(actual);
  }
};

struct ValidationReport {
  std::map<Dataset, DatasetCount> counts;
  std::size_t expected_total = 0;
  std::size_t actual_total = 0;
  std::vector<std::string> violations;
  bool passed = false;
};

ValidationReport validate_manifest(const std::vector<PreferencePair>& pairs,
                                   const BenchmarkManifest& expected);

// Invariant violations of a single pair, empty if valid.
std::vector<std::string> check_pair(const PreferencePair& pair);

AnnotatorKind annotator_for(Dataset dataset);

std::string_view to_string(Dataset d);
std::string_view to_string(AnnotatorKind k);
std::string_view to_string(HumanCategory c);
std::string_view to_string(Domain d);
std::string_view to_string(Split s);
std::string_view to_string(RejectReason r);
Dataset parse_dataset(std::string_view name);  // throws std::invalid_argument
HumanCategory parse_human_category(std::string_view name);
Domain parse_domain(std::string_view name);
Split parse_split(std::string_view name);

json to_json(const Origin& o);
json to_json(const WritingSample& s);
json to_json(const PreferencePair& p);
json to_json(const LampSample& s);
json to_json(const BenchmarkManifest& m);
json to_json(const ValidationReport& r);
json to_json(const Rejection& r);
Origin origin_from_json(const json& j);
WritingSample sample_from_json(const json& j);
PreferencePair pair_from_json(const json& j);
LampSample lamp_from_json(const json& j);  // validates scores and the edit trace
BenchmarkManifest manifest_from_json(const json& j);

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);
std::vector<LampSample> read_lamp(const std::filesystem::path& path);

}  // namespace wq::corpus
