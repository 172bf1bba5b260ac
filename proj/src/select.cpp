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

#include "wq/select.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

namespace wq::select {
namespace {

std::string draft_key(const std::string& draft) { return sha256_hex(draft); }

}  // namespace

GenerationError::GenerationError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

ReplayGenerator::ReplayGenerator(std::string id, const std::filesystem::path& path) : Generator(std::move(id)) {
  if (!std::filesystem::exists(path)) {
    throw GenerationError(GenerationError::Code::kMissingRecording, "completion file not found: " + path.string());
  }
  for (const auto& line : read_lines(path)) {
    json j = json::parse(line.text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw GenerationError(GenerationError::Code::kProtocolViolation,
                            path.string() + ":" + std::to_string(line.number) + ": not a JSON object");
    }
    std::string key = j.contains("draft") ? draft_key(j.at("draft").get<std::string>())
                                          : required<std::string>(j, "key");
    by_key_[key] = j.at("completions").get<std::vector<std::string>>();
  }
}

ReplayGenerator::ReplayGenerator(std::string id, std::unordered_map<std::string, std::vector<std::string>> by_key)
    : Generator(std::move(id)), by_key_(std::move(by_key)) {}

std::vector<std::string> ReplayGenerator::generate(const std::string&, const std::string& draft, std::size_t n) {
  auto it = by_key_.find(draft_key(draft));
  if (it == by_key_.end()) {
    throw GenerationError(GenerationError::Code::kMissingRecording, id() + ": no recorded completions for draft");
  }
  const auto& all = it->second;
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(n, all.size()))};
}

RemoteGenerator::RemoteGenerator(std::string id, std::string endpoint, std::chrono::milliseconds timeout,
                                 scoring::RetryPolicy retry)
    : Generator(std::move(id)), endpoint_(std::move(endpoint)), timeout_(timeout), retry_(retry) {}

std::vector<std::string> RemoteGenerator::generate(const std::string& prompt, const std::string&, std::size_t n) {
  json body = {{"prompt", prompt}, {"n", n}};
  auto backoff = retry_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(endpoint_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Post("/generate", body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json reply = json::parse(res->body, nullptr, false);
    if (res->status != 200 || reply.is_discarded() || !reply.contains("completions") ||
        !reply.at("completions").is_array()) {
      throw GenerationError(GenerationError::Code::kProtocolViolation,
                            id() + ": bad reply from /generate (HTTP " + std::to_string(res->status) + ")");
    }
    std::vector<std::string> out;
    for (const auto& c : reply.at("completions")) {
      if (!c.is_string()) throw GenerationError(GenerationError::Code::kProtocolViolation, id() + ": non-text completion");
      if (out.size() < n) out.push_back(c.get<std::string>());
    }
    return out;
  }
  throw GenerationError(GenerationError::Code::kUnreachable, id() + ": " + endpoint_ + " unreachable (" + last_error + ")");
}

GeneratorConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  GeneratorConfig c;
  auto kind = required<std::string>(j, "kind");
  if (kind == "replay") {
    c.kind = GeneratorConfig::Kind::kReplay;
    std::filesystem::path p = required<std::string>(j, "completions");
    c.completions = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else if (kind == "remote") {
    c.kind = GeneratorConfig::Kind::kRemote;
    c.endpoint = required<std::string>(j, "endpoint");
  } else {
    throw std::invalid_argument("unknown generator kind: " + kind);
  }
  c.id = j.value("id", kind);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
  if (j.contains("retry")) {
    c.retry.attempts = j.at("retry").value("attempts", 3);
    c.retry.initial_backoff = std::chrono::milliseconds(j.at("retry").value("backoff_ms", 250));
  }
  return c;
}

GeneratorSpec generator_spec_from_json(const json& j, const std::filesystem::path& base_dir) {
  GeneratorSpec spec;
  if (j.contains("kind")) {
    spec.fallback = config_from_json(j, base_dir);
    return spec;
  }
  if (j.contains("generators")) {
    for (const auto& [model, cfg] : j.at("generators").items()) {
      spec.by_source_model[model] = config_from_json(cfg, base_dir);
    }
  }
  if (j.contains("default")) spec.fallback = config_from_json(j.at("default"), base_dir);
  if (spec.by_source_model.empty() && !spec.fallback) {
    throw std::invalid_argument("generator spec declares no generators");
  }
  return spec;
}

GeneratorSpec load_generator_spec(const std::filesystem::path& path) {
  return generator_spec_from_json(json::parse(read_file(path)), path.parent_path());
}

std::unique_ptr<Generator> make_generator(const GeneratorConfig& config) {
  if (config.kind == GeneratorConfig::Kind::kReplay) {
    return std::make_unique<ReplayGenerator>(config.id, config.completions);
  }
  return std::make_unique<RemoteGenerator>(config.id, config.endpoint, config.timeout, config.retry);
}

GeneratorPool::GeneratorPool(const GeneratorSpec& spec) {
  for (const auto& [model, cfg] : spec.by_source_model) by_model_[model] = make_generator(cfg);
  if (spec.fallback) fallback_ = make_generator(*spec.fallback);
}

GeneratorPool::GeneratorPool(std::map<std::string, std::shared_ptr<Generator>> by_model,
                             std::shared_ptr<Generator> fallback)
    : by_model_(std::move(by_model)), fallback_(std::move(fallback)) {}

Generator& GeneratorPool::for_model(const std::string& source_model) const {
  auto it = by_model_.find(source_model);
  if (it != by_model_.end()) return *it->second;
  if (fallback_) return *fallback_;
  throw GenerationError(GenerationError::Code::kNoGenerator, "no generator paired with source model '" + source_model + "'");
}

Candidate candidate_from_completion(const std::string& completion, const std::string& draft,
                                    const std::string& generator_id) {
  Candidate c;
  c.generator_id = generator_id;
  edits::EditTrace trace;
  try {
    trace = edits::parse_cot_completion(completion);
  } catch (const edits::CotParseError& e) {
    c.text = completion;
    c.warnings.push_back(std::string("unparseable: ") + std::string(edits::to_string(e.code())));
    return c;
  }
  trace.draft = draft;
  auto v = edits::verify(trace);
  if (v.ok) {
    c.text = v.result;
    if (!v.final_matches) c.warnings.emplace_back("final-text-differs-from-executed-edits");
  } else {
    c.text = trace.final_text.value_or(draft);
    c.warnings.push_back("edit " + std::to_string(*v.failed_index + 1) + " not executable; using stated final text");
  }
  c.trace = std::move(trace);
  return c;
}

std::vector<Candidate> generate_candidates(Generator& generator, const std::string& draft, std::size_t n,
                                           const GenerateOptions& options) {
  if (n == 0) throw std::invalid_argument("generate_candidates: n must be at least 1");
  auto completions = generator.generate(edits::build_cot_prompt(draft), draft, n);
  std::vector<Candidate> out;
  for (const auto& completion : completions) {
    auto c = candidate_from_completion(completion, draft, generator.id());
    if (!c.trace && !options.retain_raw) continue;
    out.push_back(std::move(c));
  }
  if (out.empty() && !completions.empty()) {
    throw GenerationError(GenerationError::Code::kAllUnparseable,
                          generator.id() + ": all " + std::to_string(completions.size()) +
                              " completions unparseable and raw retention disabled");
  }
  return out;
}

SelectOutcome filter_and_select(Candidate draft, std::vector<Candidate> candidates, scoring::Scorer& scorer,
                                const std::string& instruction, std::uint64_t seed) {
  SelectOutcome out;
  if (!draft.score) draft.score = scoring::score(scorer, instruction, draft.text).score;
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    if (!c.score) {
      try {
        c.score = scoring::score(scorer, instruction, c.text).score;
      } catch (const std::exception& e) {
        out.failures.push_back({i, e.what()});
        continue;
      }
    }
    if (*c.score >= *draft.score) survivors.push_back(i);
  }
  if (survivors.empty()) {
    out.result = Degenerate{candidates.size(), out.failures.size()};
  } else {
    Selection s;
    s.survivors = survivors.size();
    s.best_index = survivors.front();
    for (auto i : survivors) {
      if (*candidates[i].score > *candidates[s.best_index].score) s.best_index = i;
    }
    std::uint64_t state = seed;
    s.random_index = survivors[bounded_draw(state, survivors.size())];
    s.best = candidates[s.best_index];
    s.random_pick = candidates[s.random_index];
    out.result = std::move(s);
  }
  out.draft = std::move(draft);
  out.candidates = std::move(candidates);
  return out;
}

BuildResult build_triplets(const std::vector<Draft>& drafts, const GeneratorPool& generators,
                           scoring::Scorer& scorer, const BuildOptions& options) {
  struct Slot {
    std::optional<TripletRecord> triplet;
    std::optional<DegenerateEntry> degenerate;
    std::optional<DraftError> error;
  };
  std::vector<Slot> slots(drafts.size());
  parallel_for(drafts.size(), options.workers, [&](std::size_t i) {
    const auto& d = drafts[i];
    try {
      auto& gen = generators.for_model(d.source_model);
      auto candidates = generate_candidates(gen, d.text, options.n, {options.retain_raw});
      Candidate first{d.text, std::nullopt, d.source_model, std::nullopt, {}};
      std::uint64_t seed = derive_seed(options.seed, i);
      auto outcome = filter_and_select(std::move(first), std::move(candidates), scorer, d.instruction, seed);
      if (outcome.degenerate()) {
        const auto& dg = std::get<Degenerate>(outcome.result);
        slots[i].degenerate = DegenerateEntry{d.id, "no candidate scored at or above the draft", dg.n_candidates,
                                              dg.n_failed};
        return;
      }
      const auto& s = outcome.selection();
      TripletRecord t;
      t.id = d.id;
      t.instruction = d.instruction;
      t.domain = d.domain;
      t.first_draft = outcome.draft;
      t.random_edit = s.random_pick;
      t.best_edit = s.best;
      t.n_generated = outcome.candidates.size();
      t.n_surviving = s.survivors;
      t.seed = seed;
      slots[i].triplet = std::move(t);
    } catch (const std::exception& e) {
      slots[i].error = DraftError{d.id, e.what()};
    }
  });
  BuildResult r;
  for (auto& s : slots) {
    if (s.triplet) r.triplets.push_back(std::move(*s.triplet));
    if (s.degenerate) r.degenerate.push_back(std::move(*s.degenerate));
    if (s.error) r.errors.push_back(std::move(*s.error));
  }
  return r;
}

json to_json(const Candidate& c) {
  json j = {{"text", c.text}};
  if (c.score) j["score"] = *c.score;
  j["generator_id"] = c.generator_id;
  if (c.trace) {
    json t = json::array();
    for (const auto& e : c.trace->edits) t.push_back(edits::to_json(e));
    j["edits"] = std::move(t);
  }
  if (!c.warnings.empty()) j["warnings"] = c.warnings;
  return j;
}

json to_json(const TripletRecord& t) {
  return {{"id", t.id},
          {"instruction", t.instruction},
          {"domain", corpus::to_string(t.domain)},
          {"first_draft", to_json(t.first_draft)},
          {"random_edit", to_json(t.random_edit)},
          {"best_edit", to_json(t.best_edit)},
          {"n_generated", t.n_generated},
          {"n_surviving", t.n_surviving},
          {"seed", t.seed}};
}

json to_json(const DegenerateEntry& d) {
  return {{"draft_id", d.draft_id}, {"reason", d.reason}, {"n_generated", d.n_generated}, {"n_failed", d.n_failed}};
}

Candidate candidate_from_json(const json& j, const std::string& draft) {
  Candidate c;
  c.text = required<std::string>(j, "text");
  if (j.contains("score")) {
    double s = j.at("score").get<double>();
    if (s < scoring::kMinScore || s > scoring::kMaxScore) {
      throw std::invalid_argument("candidate score out of [1,10]: " + format_double(s));
    }
    c.score = s;
  }
  c.generator_id = j.value("generator_id", std::string());
  if (j.contains("edits")) {
    edits::EditTrace t;
    t.draft = draft;
    for (const auto& e : j.at("edits")) t.edits.push_back(edits::edit_from_json(e));
    t.final_text = c.text;
    c.trace = std::move(t);
  }
  if (j.contains("warnings")) c.warnings = j.at("warnings").get<std::vector<std::string>>();
  return c;
}

Candidate candidate_from_json(const json& j) { return candidate_from_json(j, std::string()); }

TripletRecord triplet_from_json(const json& j) {
  TripletRecord t;
  t.id = required<std::string>(j, "id");
  t.instruction = required<std::string>(j, "instruction");
  t.domain = corpus::parse_domain(required<std::string>(j, "domain"));
  t.first_draft = candidate_from_json(j.at("first_draft"));
  t.random_edit = candidate_from_json(j.at("random_edit"), t.first_draft.text);
  t.best_edit = candidate_from_json(j.at("best_edit"), t.first_draft.text);
  t.n_generated = required<std::size_t>(j, "n_generated");
  t.n_surviving = required<std::size_t>(j, "n_surviving");
  t.seed = required<std::uint64_t>(j, "seed");
  if (t.n_surviving > t.n_generated) throw std::invalid_argument(t.id + ": n_surviving exceeds n_generated");
  return t;
}

Draft draft_from_json(const json& j) {
  Draft d;
  d.id = required<std::string>(j, "id");
  d.instruction = required<std::string>(j, "instruction");
  d.domain = corpus::parse_domain(j.value("domain", std::string("fiction")));
  d.text = required<std::string>(j, "text");
  d.source_model = j.value("source_model", std::string());
  if (d.text.empty()) throw std::invalid_argument(d.id + ": empty draft");
  return d;
}

std::vector<Draft> read_drafts(const std::filesystem::path& path) {
  std::vector<Draft> out;
  for (const auto& line : read_lines(path)) {
    try {
      out.push_back(draft_from_json(json::parse(line.text)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TripletRecord> read_triplets(const std::filesystem::path& path) {
  std::vector<TripletRecord> out;
  for (const auto& line : read_lines(path)) {
    try {
      out.push_back(triplet_from_json(json::parse(line.text)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

void write_triplets(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets) {
  std::vector<json> rows;
  rows.reserve(triplets.size());
  for (const auto& t : triplets) rows.push_back(to_json(t));
  write_jsonl(path, rows);
}

}  // namespace wq::select
