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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wq/common.hpp"

// Executable edits: ordered (original span -> replacement) string operations
// over a draft, the three-part chain-of-thought editing prompt, and gradual
// edit sequences.
namespace wq::edits {

struct Edit {
  std::string original;
  std::string replacement;
  std::optional<std::string> category;

  bool operator==(const Edit&) const = default;
};

struct EditTrace {
  std::string draft;
  std::vector<Edit> edits;
  std::optional<std::string> final_text;

  bool operator==(const EditTrace&) const = default;
};

enum class Direction { kForward, kReverse };

struct GradualState {
  std::size_t applied_count = 0;
  std::string text;
  std::optional<double> score;

  bool operator==(const GradualState&) const = default;
};

struct GradualCurve {
  Direction direction = Direction::kForward;
  std::vector<GradualState> states;
};

class SpanNotFound : public std::runtime_error {
 public:
  SpanNotFound(std::size_t index, Edit edit);
  std::size_t index() const { return index_; }
  const Edit& edit() const { return edit_; }

 private:
  std::size_t index_;
  Edit edit_;
};

class InvalidEdit : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TraceError : public std::runtime_error {
 public:
  enum class Code {
    kFinalMismatch,       // apply_all(draft, edits) != final
    kDeletionNotReversible,
    kUnapplyMismatch,     // first-occurrence un-apply does not reproduce the prior state
  };
  TraceError(Code code, std::size_t index, const std::string& what);
  Code code() const { return code_; }
  std::size_t index() const { return index_; }

 private:
  Code code_;
  std::size_t index_;
};

class CotParseError : public std::runtime_error {
 public:
  enum class Code {
    kMissingHeader,
    kCountMismatch,
    kBacktickImbalance,
    kMalformedEntry,
    kSpanMismatch,  // Part 2 original differs from the Part 1 span with the same number
  };
  CotParseError(Code code, const std::string& what);
  Code code() const { return code_; }

 private:
  Code code_;
};

std::string_view to_string(CotParseError::Code code);

// Throws InvalidEdit if the edit violates its invariants.
void validate(const Edit& edit);

// Replaces the first (leftmost) occurrence of edit.original. `index` is only
// used to label SpanNotFound.
std::string apply_edit(std::string_view text, const Edit& edit, std::size_t index = 0);

// Left fold of apply_edit. Does not compare against trace.final_text.
std::string apply_all(const EditTrace& trace);

struct Verification {
  bool ok = false;
  std::string result;
  std::optional<std::size_t> failed_index;  // first edit whose span was absent
  bool final_matches = true;                // vacuously true without final_text
  std::vector<std::size_t> ambiguous;       // spans occurring more than once when applied
};

Verification verify(const EditTrace& trace);

GradualCurve gradual_sequence(const EditTrace& trace, Direction direction);

// Prompt half of the editing scaffold: instructions plus the inlined draft.
std::string build_cot_prompt(std::string_view draft);

// Parts 1-3 for a trace whose final text is known (falls back to apply_all).
std::string render_cot_completion(const EditTrace& trace);

// Accepts either a bare completion (Parts 1-3) or a full prompt+completion
// transcript, in which case the draft is recovered too. Every failure is a
// CotParseError.
EditTrace parse_cot_completion(std::string_view text);

json to_json(const Edit& edit);
json to_json(const EditTrace& trace);
json to_json(const GradualCurve& curve);
Edit edit_from_json(const json& j);
EditTrace trace_from_json(const json& j);

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view name);

}  // namespace wq::edits
