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
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "wq/common.hpp"
#include "wq/corpus.hpp"
#include "wq/edits.hpp"
#include "wq/scoring.hpp"

// Best-of-N: draw edited candidates for a draft, score them, drop those below
// the draft and keep the argmax plus one random survivor.
namespace wq::select {

struct Candidate {
  std::string text;
  std::optional<double> score;
  std::string generator_id;
  std::optional<edits::EditTrace> trace;
  std::vector<std::string> warnings;  // e.g. unparseable completion kept as raw text

  bool operator==(const Candidate&) const = default;
};

class GenerationError : public std::runtime_error {
 public:
  enum class Code { kUnreachable, kProtocolViolation, kAllUnparseable, kNoGenerator, kMissingRecording };
  GenerationError(Code code, const std::string& what);
  Code code() const { return code_; }

 private:
  Code code_;
};

class Generator {
 public:
  explicit Generator(std::string id) : id_(std::move(id)) {}
  virtual ~Generator() = default;
  const std::string& id() const { return id_; }

  // Up to n raw completions for the editing prompt built from `draft`.
  virtual std::vector<std::string> generate(const std::string& prompt, const std::string& draft,
                                            std::size_t n) = 0;

 private:
  std::string id_;
};

// One JSON object per line: {"draft": "...", "completions": [...]} or
// {"key": sha256(draft), "completions": [...]}. Returns the first n.
class ReplayGenerator : public Generator {
 public:
  ReplayGenerator(std::string id, const std::filesystem::path& path);
  ReplayGenerator(std::string id, std::unordered_map<std::string, std::vector<std::string>> by_key);
  std::vector<std::string> generate(const std::string& prompt, const std::string& draft, std::size_t n) override;

 private:
  std::unordered_map<std::string, std::vector<std::string>> by_key_;
};

// POST /generate {prompt, n} -> {completions: [text]}
class RemoteGenerator : public Generator {
 public:
  RemoteGenerator(std::string id, std::string endpoint, std::chrono::milliseconds timeout,
                  scoring::RetryPolicy retry = {});
  std::vector<std::string> generate(const std::string& prompt, const std::string& draft, std::size_t n) override;

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  scoring::RetryPolicy retry_;
};

struct GeneratorConfig {
  enum class Kind { kReplay, kRemote } kind = Kind::kReplay;
  std::string id;
  std::string endpoint;
  std::filesystem::path completions;
  std::chrono::milliseconds timeout{60000};
  scoring::RetryPolicy retry;
};

// Pairs each draft's source model with the editor fine-tuned on that model's
// drafts. `fallback` serves models with no explicit pairing.
struct GeneratorSpec {
  std::map<std::string, GeneratorConfig> by_source_model;
  std::optional<GeneratorConfig> fallback;
};

// Accepts {"generators": {model: config}, "default": config} or a bare config.
GeneratorSpec generator_spec_from_json(const json& j, const std::filesystem::path& base_dir = {});
GeneratorSpec load_generator_spec(const std::filesystem::path& path);
std::unique_ptr<Generator> make_generator(const GeneratorConfig& config);

class GeneratorPool {
 public:
  explicit GeneratorPool(const GeneratorSpec& spec);
  GeneratorPool(std::map<std::string, std::shared_ptr<Generator>> by_model, std::shared_ptr<Generator> fallback);
  // Throws GenerationError(kNoGenerator) for an unpaired model without fallback.
  Generator& for_model(const std::string& source_model) const;

 private:
  std::map<std::string, std::shared_ptr<Generator>> by_model_;
  std::shared_ptr<Generator> fallback_;
};

struct GenerateOptions {
  bool retain_raw = true;
};

// Parsed completions use the executed edit text; when the edits do not apply,
// the Part 3 text is used and a warning attached.
std::vector<Candidate> generate_candidates(Generator& generator, const std::string& draft, std::size_t n,
                                           const GenerateOptions& options = {});
Candidate candidate_from_completion(const std::string& completion, const std::string& draft,
                                    const std::string& generator_id);

struct Selection {
  Candidate best;
  Candidate random_pick;
  std::size_t best_index = 0;    // into the candidate list
  std::size_t random_index = 0;
  std::size_t survivors = 0;
};

struct Degenerate {
  std::size_t n_candidates = 0;
  std::size_t n_failed = 0;
};

struct ScoringFailure {
  std::size_t candidate_index = 0;
  std::string reason;
};

struct SelectOutcome {
  Candidate draft;  // scored
  std::vector<Candidate> candidates;  // scored where scoring succeeded
  std::variant<Selection, Degenerate> result;
  std::vector<ScoringFailure> failures;

  bool degenerate() const { return std::holds_alternative<Degenerate>(result); }
  const Selection& selection() const { return std::get<Selection>(result); }
};

// Candidates that already carry a score are not rescored. Survivors score at
// least the draft score; a failed candidate is excluded and reported.
SelectOutcome filter_and_select(Candidate draft, std::vector<Candidate> candidates, scoring::Scorer& scorer,
                                const std::string& instruction, std::uint64_t seed);

struct Draft {
  std::string id;
  std::string instruction;
  corpus::Domain domain = corpus::Domain::kFiction;
  std::string text;
  std::string source_model;
};

struct TripletRecord {
  std::string id;
  std::string instruction;
  corpus::Domain domain = corpus::Domain::kFiction;
  Candidate first_draft;
  Candidate random_edit;
  Candidate best_edit;
  std::size_t n_generated = 0;
  std::size_t n_surviving = 0;
  std::uint64_t seed = 0;  // per-draft selection seed

  bool operator==(const TripletRecord&) const = default;
};

struct DegenerateEntry {
  std::string draft_id;
  std::string reason;
  std::size_t n_generated = 0;
  std::size_t n_failed = 0;
};

struct DraftError {
  std::string draft_id;
  std::string message;
};

struct BuildOptions {
  std::size_t n = 20;
  std::uint64_t seed = 0;
  int workers = 1;
  bool retain_raw = true;
};

struct BuildResult {
  std::vector<TripletRecord> triplets;     // input order
  std::vector<DegenerateEntry> degenerate; // sidecar
  std::vector<DraftError> errors;
};

// Draft i selects under derive_seed(options.seed, i).
BuildResult build_triplets(const std::vector<Draft>& drafts, const GeneratorPool& generators,
                           scoring::Scorer& scorer, const BuildOptions& options);

json to_json(const Candidate& c);
json to_json(const TripletRecord& t);
json to_json(const DegenerateEntry& d);
Candidate candidate_from_json(const json& j);
TripletRecord triplet_from_json(const json& j);
Draft draft_from_json(const json& j);
std::vector<Draft> read_drafts(const std::filesystem::path& path);
std::vector<TripletRecord> read_triplets(const std::filesystem::path& path);
void write_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets);

}  // namespace wq::select
