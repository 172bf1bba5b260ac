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

#include "wq/edits.hpp"

#include <algorithm>
#include <charconv>

namespace wq::edits {
namespace {

constexpr std::string_view kCotIntro =
    "You are given a paragraph of creative writing. Your task is to improve the quality of the "
    "writing. You must identify specific spans that can be improved, then propose rewriting for "
    "each identified span, and finally return the entire paragraph with the proposed changes "
    "implemented.\n\nHere is the paragraph you are editing:\n";
constexpr std::string_view kPart1 = "Part 1: Identifying Problematic Spans";
constexpr std::string_view kPart2 = "Part 2: Proposing Rewriting for Problematic Spans";
constexpr std::string_view kPart3 = "Part 3: Implementing Proposed Edits";
constexpr std::string_view kArrow = "\xE2\x86\x92";  // U+2192
constexpr std::string_view kAsciiArrow = "->";
constexpr std::string_view kCategoryOpen = "` (Category: `";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

std::string replace_first(std::string_view text, std::size_t pos, std::size_t len,
                          std::string_view with) {
  std::string out;
  out.reserve(text.size() - len + with.size());
  out.append(text.substr(0, pos));
  out.append(with);
  out.append(text.substr(pos + len));
  return out;
}

// Splits a Part body ("Span 1: ...\nSpan 2: ...\n") into entry payloads.
std::vector<std::string_view> split_entries(std::string_view body, std::string_view part) {
  std::vector<std::string_view> entries;
  if (body.empty()) return entries;
  if (body.back() != '\n') {
    throw CotParseError(CotParseError::Code::kMalformedEntry,
                        std::string(part) + ": entries must be newline terminated");
  }
  body.remove_suffix(1);
  std::size_t k = 1;
  std::string head = "Span 1: ";
  if (!body.starts_with(head)) {
    throw CotParseError(CotParseError::Code::kMalformedEntry,
                        std::string(part) + ": expected 'Span 1: '");
  }
  std::size_t start = head.size();
  while (true) {
    std::string next = "\nSpan " + std::to_string(k + 1) + ": ";
    auto pos = body.find(next, start);
    if (pos == std::string_view::npos) {
      entries.push_back(body.substr(start));
      break;
    }
    entries.push_back(body.substr(start, pos - start));
    start = pos + next.size();
    ++k;
  }
  return entries;
}

Edit parse_span_entry(std::string_view entry, std::size_t number) {
  const std::string where = "Part 1 span " + std::to_string(number);
  if (entry.size() < 2 || entry.front() != '`') {
    throw CotParseError(CotParseError::Code::kBacktickImbalance, where + ": missing opening backtick");
  }
  Edit e;
  if (entry.ends_with("`)")) {
    auto cat = entry.rfind(kCategoryOpen);
    if (cat == std::string_view::npos || cat == 0) {
      throw CotParseError(CotParseError::Code::kBacktickImbalance, where + ": unbalanced category");
    }
    e.original = std::string(entry.substr(1, cat - 1));
    auto cat_start = cat + kCategoryOpen.size();
    auto cat_len = entry.size() - 2 - cat_start;
    e.category = std::string(entry.substr(cat_start, cat_len));
  } else if (entry.back() == '`') {
    e.original = std::string(entry.substr(1, entry.size() - 2));
  } else {
    throw CotParseError(CotParseError::Code::kBacktickImbalance, where + ": missing closing backtick");
  }
  if (e.original.empty()) {
    throw CotParseError(CotParseError::Code::kMalformedEntry, where + ": empty span");
  }
  return e;
}

std::string parse_rewrite_entry(std::string_view entry, std::string_view expected_original,
                                std::size_t number) {
  const std::string where = "Part 2 span " + std::to_string(number);
  if (entry.size() < 2 || entry.front() != '`' || entry.back() != '`') {
    throw CotParseError(CotParseError::Code::kBacktickImbalance, where + ": unbalanced backticks");
  }
  for (auto arrow : {kArrow, kAsciiArrow}) {
    std::string lead = "`" + std::string(expected_original) + "` " + std::string(arrow) + " `";
    if (entry.starts_with(lead) && entry.size() >= lead.size() + 1) {
      return std::string(entry.substr(lead.size(), entry.size() - lead.size() - 1));
    }
  }
  for (auto arrow : {kArrow, kAsciiArrow}) {
    std::string sep = "` " + std::string(arrow) + " `";
    if (entry.find(sep) != std::string_view::npos) {
      throw CotParseError(CotParseError::Code::kSpanMismatch,
                          where + ": original does not match the Part 1 span");
    }
  }
  throw CotParseError(CotParseError::Code::kMalformedEntry, where + ": missing rewrite arrow");
}

}  // namespace

SpanNotFound::SpanNotFound(std::size_t index, Edit edit)
    : std::runtime_error("edit " + std::to_string(index) + ": span not found: \"" +
                         edit.original.substr(0, 60) + "\""),
      index_(index),
      edit_(std::move(edit)) {}

TraceError::TraceError(Code code, std::size_t index, const std::string& what)
    : std::runtime_error(what), code_(code), index_(index) {}

CotParseError::CotParseError(Code code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::string_view to_string(CotParseError::Code code) {
  switch (code) {
    case CotParseError::Code::kMissingHeader: return "MissingHeader";
    case CotParseError::Code::kCountMismatch: return "CountMismatch";
    case CotParseError::Code::kBacktickImbalance: return "BacktickImbalance";
    case CotParseError::Code::kMalformedEntry: return "MalformedEntry";
    case CotParseError::Code::kSpanMismatch: return "SpanMismatch";
  }
  return "Unknown";
}

void validate(const Edit& edit) {
  if (edit.original.empty()) throw InvalidEdit("edit original span is empty");
  if (edit.original == edit.replacement) throw InvalidEdit("edit replacement equals original span");
}

std::string apply_edit(std::string_view text, const Edit& edit, std::size_t index) {
  validate(edit);
  auto pos = text.find(edit.original);
  if (pos == std::string_view::npos) throw SpanNotFound(index, edit);
  return replace_first(text, pos, edit.original.size(), edit.replacement);
}

std::string apply_all(const EditTrace& trace) {
  std::string text = trace.draft;
  for (std::size_t i = 0; i < trace.edits.size(); ++i) {
    text = apply_edit(text, trace.edits[i], i);
  }
  return text;
}

Verification verify(const EditTrace& trace) {
  Verification v;
  std::string text = trace.draft;
  for (std::size_t i = 0; i < trace.edits.size(); ++i) {
    const auto& e = trace.edits[i];
    if (e.original.empty() || e.original == e.replacement) {
      v.failed_index = i;
      v.result = text;
      return v;
    }
    auto n = count_occurrences(text, e.original);
    if (n == 0) {
      v.failed_index = i;
      v.result = text;
      return v;
    }
    if (n > 1) v.ambiguous.push_back(i);
    text = apply_edit(text, e, i);
  }
  v.result = text;
  v.final_matches = !trace.final_text || *trace.final_text == text;
  v.ok = v.final_matches;
  return v;
}

GradualCurve gradual_sequence(const EditTrace& trace, Direction direction) {
  std::vector<std::string> forward;
  forward.reserve(trace.edits.size() + 1);
  forward.push_back(trace.draft);
  for (std::size_t i = 0; i < trace.edits.size(); ++i) {
    forward.push_back(apply_edit(forward.back(), trace.edits[i], i));
  }
  if (trace.final_text && *trace.final_text != forward.back()) {
    throw TraceError(TraceError::Code::kFinalMismatch, trace.edits.size(),
                     "applying the edits does not reproduce the final text");
  }

  GradualCurve curve;
  curve.direction = direction;
  const std::size_t n = trace.edits.size();
  if (direction == Direction::kForward) {
    for (std::size_t k = 0; k <= n; ++k) curve.states.push_back({k, std::move(forward[k]), {}});
    return curve;
  }

  std::string text = forward.back();
  curve.states.push_back({n, text, {}});
  for (std::size_t k = n; k-- > 0;) {
    const auto& e = trace.edits[k];
    if (e.replacement.empty()) {
      throw TraceError(TraceError::Code::kDeletionNotReversible, k,
                       "edit " + std::to_string(k) + " is a deletion and cannot be un-applied by search");
    }
    auto pos = text.find(e.replacement);
    if (pos == std::string::npos) {
      throw TraceError(TraceError::Code::kUnapplyMismatch, k,
                       "edit " + std::to_string(k) + ": replacement not found while un-applying");
    }
    text = replace_first(text, pos, e.replacement.size(), e.original);
    if (text != forward[k]) {
      throw TraceError(TraceError::Code::kUnapplyMismatch, k,
                       "edit " + std::to_string(k) + ": un-applying the first occurrence does not "
                       "restore the prior state");
    }
    curve.states.push_back({k, text, {}});
  }
  return curve;
}

std::string build_cot_prompt(std::string_view draft) {
  if (draft.empty()) throw std::invalid_argument("build_cot_prompt: empty draft");
  std::string out(kCotIntro);
  out += draft;
  out += "\n\n";
  return out;
}

std::string render_cot_completion(const EditTrace& trace) {
  std::string out(kPart1);
  out += "\n\n";
  for (std::size_t i = 0; i < trace.edits.size(); ++i) {
    const auto& e = trace.edits[i];
    out += "Span " + std::to_string(i + 1) + ": `" + e.original + "`";
    if (e.category) out += " (Category: `" + *e.category + "`)";
    out += '\n';
  }
  out += '\n';
  out += kPart2;
  out += "\n\n";
  for (std::size_t i = 0; i < trace.edits.size(); ++i) {
    const auto& e = trace.edits[i];
    out += "Span " + std::to_string(i + 1) + ": `" + e.original + "` ";
    out += kArrow;
    out += " `" + e.replacement + "`\n";
  }
  out += '\n';
  out += kPart3;
  out += "\n\n";
  out += trace.final_text ? *trace.final_text : apply_all(trace);
  return out;
}

EditTrace parse_cot_completion(std::string_view text) {
  EditTrace trace;
  std::string h1 = std::string(kPart1) + "\n\n";
  std::size_t body1_start = 0;
  if (text.starts_with(kCotIntro)) {
    std::string marker = "\n\n" + h1;
    auto pos = text.find(marker, kCotIntro.size());
    if (pos == std::string_view::npos) {
      throw CotParseError(CotParseError::Code::kMissingHeader, "Part 1 header not found");
    }
    trace.draft = std::string(text.substr(kCotIntro.size(), pos - kCotIntro.size()));
    body1_start = pos + marker.size();
  } else {
    auto lead = text.find_first_not_of(" \t\r\n");
    if (lead == std::string_view::npos || text.substr(lead).substr(0, h1.size()) != h1) {
      throw CotParseError(CotParseError::Code::kMissingHeader, "Part 1 header not found");
    }
    body1_start = lead + h1.size();
  }

  std::string h2 = "\n" + std::string(kPart2) + "\n\n";
  auto h2_pos = text.find(h2, body1_start > 0 ? body1_start - 1 : 0);
  if (h2_pos == std::string_view::npos) {
    throw CotParseError(CotParseError::Code::kMissingHeader, "Part 2 header not found");
  }
  std::string h3 = "\n" + std::string(kPart3) + "\n\n";
  auto h3_pos = text.find(h3, h2_pos + h2.size() - 1);
  if (h3_pos == std::string_view::npos) {
    throw CotParseError(CotParseError::Code::kMissingHeader, "Part 3 header not found");
  }

  auto body1 = text.substr(body1_start, h2_pos < body1_start ? 0 : h2_pos - body1_start);
  auto body2_start = h2_pos + h2.size();
  auto body2 = text.substr(body2_start, h3_pos < body2_start ? 0 : h3_pos - body2_start);

  auto spans = split_entries(body1, "Part 1");
  auto rewrites = split_entries(body2, "Part 2");
  if (spans.size() != rewrites.size()) {
    throw CotParseError(CotParseError::Code::kCountMismatch,
                        "Part 1 lists " + std::to_string(spans.size()) + " spans but Part 2 lists " +
                            std::to_string(rewrites.size()) + " rewrites");
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    Edit e = parse_span_entry(spans[i], i + 1);
    e.replacement = parse_rewrite_entry(rewrites[i], e.original, i + 1);
    trace.edits.push_back(std::move(e));
  }
  trace.final_text = std::string(text.substr(h3_pos + h3.size()));
  return trace;
}

json to_json(const Edit& edit) {
  json j = {{"original", edit.original}, {"replacement", edit.replacement}};
  if (edit.category) j["category"] = *edit.category;
  return j;
}

json to_json(const EditTrace& trace) {
  json edits = json::array();
  for (const auto& e : trace.edits) edits.push_back(to_json(e));
  json j = {{"draft", trace.draft}, {"edits", std::move(edits)}};
  if (trace.final_text) j["final"] = *trace.final_text;
  return j;
}

json to_json(const GradualCurve& curve) {
  json states = json::array();
  for (const auto& s : curve.states) {
    json st = {{"applied_count", s.applied_count}, {"text", s.text}};
    st["score"] = s.score ? json(*s.score) : json(nullptr);
    states.push_back(std::move(st));
  }
  return {{"direction", to_string(curve.direction)}, {"states", std::move(states)}};
}

Edit edit_from_json(const json& j) {
  Edit e;
  e.original = required<std::string>(j, "original");
  e.replacement = required<std::string>(j, "replacement");
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
    e.category = it->get<std::string>();
  }
  return e;
}

EditTrace trace_from_json(const json& j) {
  EditTrace t;
  t.draft = required<std::string>(j, "draft");
  for (const auto& e : j.at("edits")) t.edits.push_back(edit_from_json(e));
  if (auto it = j.find("final"); it != j.end() && !it->is_null()) t.final_text = it->get<std::string>();
  return t;
}

std::string_view to_string(Direction d) {
  return d == Direction::kForward ? "forward" : "reverse";
}

Direction parse_direction(std::string_view name) {
  if (name == "forward") return Direction::kForward;
  if (name == "reverse" || name == "reverse-of-application") return Direction::kReverse;
  throw std::invalid_argument("unknown direction '" + std::string(name) + "'");
}

}  // namespace wq::edits
