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

#include "wq/transform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace wq::transform {
namespace {

TrainingPoint make_point(PointKind kind, std::string user, std::string assistant,
                         const std::string& sample_id, int order_index) {
  TrainingPoint p;
  p.kind = kind;
  p.system_text = std::string(kSystemPrompt);
  p.user_text = std::move(user);
  p.assistant_text = std::move(assistant);
  p.source_sample_id = sample_id;
  p.order_index = order_index;
  return p;
}

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<int> answer_value(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.empty() || s.size() > 2 || !std::all_of(s.begin(), s.end(), ::isdigit)) return std::nullopt;
    return std::stoi(s);
  }
  return std::nullopt;
}

}  // namespace

std::string pairwise_user_text(std::string_view paragraph_1, std::string_view paragraph_2) {
  std::string out(kPairwiseHead);
  out += paragraph_1;
  out += kPairwiseMiddle;
  out += paragraph_2;
  out += kPairwiseTail;
  return out;
}

std::string scalar_user_text(std::string_view paragraph) {
  std::string out(kScalarHead);
  out += paragraph;
  out += kScalarTail;
  return out;
}

std::string preference_completion(int preference) {
  if (preference != 1 && preference != 2) throw TransformError("preference must be 1 or 2");
  return "{\"preference\": \"" + std::to_string(preference) + "\"}";
}

std::string score_completion(int score) {
  if (score < 1 || score > 10) throw TransformError("score must be within 1..10");
  return "{\"score\": \"" + std::to_string(score) + "\"}";
}

int rounded_score(double score) {
  if (!(score >= 1.0 && score <= 10.0)) {
    throw TransformError("score " + format_double(score) + " outside [1, 10]");
  }
  return static_cast<int>(std::lround(score));
}

std::vector<TrainingPoint> to_pairwise(const corpus::LampSample& sample) {
  if (sample.draft.empty() || sample.edited.empty()) {
    throw TransformError("sample '" + sample.id + "' lacks a draft or edited text");
  }
  if (sample.draft == sample.edited) {
    throw TransformError("sample '" + sample.id + "': draft and edited texts are identical");
  }
  return {make_point(PointKind::kP, pairwise_user_text(sample.draft, sample.edited),
                     preference_completion(2), sample.id, 0),
          make_point(PointKind::kP, pairwise_user_text(sample.edited, sample.draft),
                     preference_completion(1), sample.id, 1)};
}

std::vector<TrainingPoint> to_scalar(const corpus::LampSample& sample) {
  int draft = rounded_score(sample.draft_score);
  int edited = rounded_score(sample.edited_score);
  return {make_point(PointKind::kR, scalar_user_text(sample.draft), score_completion(draft), sample.id, 0),
          make_point(PointKind::kR, scalar_user_text(sample.edited), score_completion(edited), sample.id, 1)};
}

std::vector<TrainingPoint> to_combined(const std::vector<corpus::LampSample>& samples) {
  return to_variant(samples, Variant::kPR);
}

std::vector<TrainingPoint> to_variant(const std::vector<corpus::LampSample>& samples, Variant variant) {
  std::vector<TrainingPoint> out;
  out.reserve(samples.size() * (variant == Variant::kPR ? 4 : 2));
  for (const auto& s : samples) {
    if (variant != Variant::kR) {
      for (auto& p : to_pairwise(s)) out.push_back(std::move(p));
    }
    if (variant != Variant::kP) {
      for (auto& p : to_scalar(s)) out.push_back(std::move(p));
    }
  }
  canonical_order(out);
  return out;
}

double anchor_score(corpus::HumanCategory category) {
  switch (category) {
    case corpus::HumanCategory::kAwardAuthor: return kAwardAuthorScore;
    case corpus::HumanCategory::kMfaStudent: return kMfaStudentScore;
    case corpus::HumanCategory::kCrowd: break;
  }
  throw TransformError("no anchor score for crowd-written text");
}

TrainingPoint anchored_scalar_point(std::string id, std::string_view paragraph,
                                    corpus::HumanCategory category) {
  if (paragraph.empty()) throw TransformError("empty paragraph");
  return make_point(PointKind::kR, scalar_user_text(paragraph),
                    score_completion(rounded_score(anchor_score(category))), id, 0);
}

std::vector<TrainingPoint> attach_rationales(const std::vector<TrainingPoint>& points,
                                             const std::vector<RationaleRecord>& rationales,
                                             RationaleMode mode) {
  if (mode == RationaleMode::kNone) throw TransformError("attach_rationales needs a rationale mode");
  std::map<std::pair<std::string, RationaleStyle>, const RationaleRecord*> index;
  for (const auto& r : rationales) {
    if (r.text.empty()) throw TransformError("empty rationale for sample '" + r.sample_id + "'");
    index[{r.sample_id, r.style}] = &r;
  }
  std::set<std::string> missing;
  std::vector<TrainingPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    auto style = p.kind == PointKind::kP ? RationaleStyle::kContrastive : RationaleStyle::kCritique;
    auto it = index.find({p.source_sample_id, style});
    if (it == index.end()) {
      missing.insert(p.source_sample_id);
      continue;
    }
    TrainingPoint q = p;
    if (mode == RationaleMode::kInputRationale) {
      q.user_text += kInputRationaleDelimiter;
      q.user_text += it->second->text;
    } else {
      q.assistant_text = it->second->text + std::string(kOutputRationaleDelimiter) + p.assistant_text;
    }
    q.rationale_mode = mode;
    out.push_back(std::move(q));
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw TransformError("missing rationale for samples: " + ids);
  }
  return out;
}

std::string build_mirror_prompt(int n_words, std::string_view author, std::string_view voice,
                                std::string_view plot) {
  if (n_words <= 0) throw TransformError("n_words must be positive");
  if (author.empty() || voice.empty() || plot.empty()) {
    throw TransformError("author, voice and plot must be non-empty");
  }
  std::string out = "Write a " + std::to_string(n_words) + " word paragraph in the style of ";
  out += author;
  out += " in ";
  out += voice;
  out += " voice given the content below.\n";
  out += plot;
  return out;
}

ParsedAnswer parse_assistant(std::string_view assistant_text) {
  auto body = trim(assistant_text);
  for (auto pos = body.rfind('{'); pos != std::string_view::npos; pos = pos == 0 ? std::string_view::npos : body.rfind('{', pos - 1)) {
    json j = json::parse(body.substr(pos), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (auto it = j.find("preference"); it != j.end()) {
      auto v = answer_value(*it);
      if (!v || (*v != 1 && *v != 2)) throw TransformError("preference must be \"1\" or \"2\"");
      return {PointKind::kP, *v};
    }
    if (auto it = j.find("score"); it != j.end()) {
      auto v = answer_value(*it);
      if (!v || *v < 1 || *v > 10) throw TransformError("score must be an integer 1..10");
      return {PointKind::kR, *v};
    }
  }
  throw TransformError("no structured answer in assistant text");
}

void canonical_order(std::vector<TrainingPoint>& points) {
  std::stable_sort(points.begin(), points.end(), [](const TrainingPoint& a, const TrainingPoint& b) {
    if (a.source_sample_id != b.source_sample_id) return a.source_sample_id < b.source_sample_id;
    if (a.kind != b.kind) return a.kind == PointKind::kP;
    return a.order_index < b.order_index;
  });
}

json to_json(const TrainingPoint& p) {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", p.system_text}});
  messages.push_back({{"role", "user"}, {"content", p.user_text}});
  messages.push_back({{"role", "assistant"}, {"content", p.assistant_text}});
  return {{"kind", to_string(p.kind)},
          {"messages", std::move(messages)},
          {"source_sample_id", p.source_sample_id},
          {"rationale_mode", to_string(p.rationale_mode)},
          {"order_index", p.order_index}};
}

TrainingPoint point_from_json(const json& j) {
  TrainingPoint p;
  auto kind = required<std::string>(j, "kind");
  if (kind == "P") {
    p.kind = PointKind::kP;
  } else if (kind == "R") {
    p.kind = PointKind::kR;
  } else {
    throw TransformError("unknown point kind '" + kind + "'");
  }
  const auto& messages = j.at("messages");
  if (!messages.is_array() || messages.size() != 3) throw TransformError("expected three messages");
  p.system_text = required<std::string>(messages[0], "content");
  p.user_text = required<std::string>(messages[1], "content");
  p.assistant_text = required<std::string>(messages[2], "content");
  p.source_sample_id = required<std::string>(j, "source_sample_id");
  p.rationale_mode = parse_rationale_mode(required<std::string>(j, "rationale_mode"));
  p.order_index = j.value("order_index", 0);
  return p;
}

RationaleRecord rationale_from_json(const json& j) {
  RationaleRecord r;
  r.sample_id = required<std::string>(j, "sample_id");
  auto mode = required<std::string>(j, "mode");
  if (mode == "P" || mode == "contrastive") {
    r.style = RationaleStyle::kContrastive;
  } else if (mode == "R" || mode == "critique") {
    r.style = RationaleStyle::kCritique;
  } else {
    throw TransformError("unknown rationale mode '" + mode + "'");
  }
  r.text = required<std::string>(j, "text");
  if (r.text.empty()) throw TransformError("empty rationale for sample '" + r.sample_id + "'");
  return r;
}

std::vector<RationaleRecord> read_rationales(const std::filesystem::path& path) {
  std::vector<RationaleRecord> out;
  for (const auto& line : read_lines(path)) out.push_back(rationale_from_json(json::parse(line.text)));
  return out;
}

std::string_view to_string(PointKind k) { return k == PointKind::kP ? "P" : "R"; }

std::string_view to_string(RationaleMode m) {
  switch (m) {
    case RationaleMode::kNone: return "none";
    case RationaleMode::kInputRationale: return "input-rationale";
    case RationaleMode::kOutputRationale: return "output-rationale";
  }
  return "none";
}

std::string_view to_string(RationaleStyle s) {
  return s == RationaleStyle::kContrastive ? "contrastive" : "critique";
}

RationaleMode parse_rationale_mode(std::string_view name) {
  if (name == "none") return RationaleMode::kNone;
  if (name == "input-rationale" || name == "ir-o") return RationaleMode::kInputRationale;
  if (name == "output-rationale" || name == "i-ro") return RationaleMode::kOutputRationale;
  throw TransformError("unknown rationale mode '" + std::string(name) + "'");
}

Variant parse_variant(std::string_view name) {
  if (name == "p" || name == "P") return Variant::kP;
  if (name == "r" || name == "R") return Variant::kR;
  if (name == "pr" || name == "PR") return Variant::kPR;
  throw TransformError("unknown variant '" + std::string(name) + "'");
}

}  // namespace wq::transform
