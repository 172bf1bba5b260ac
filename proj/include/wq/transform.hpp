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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wq/common.hpp"
#include "wq/corpus.hpp"

// LAMP samples -> pairwise (P), scalar (R) and combined (PR) training points.
namespace wq::transform {

enum class PointKind { kP, kR };
enum class RationaleMode { kNone, kInputRationale, kOutputRationale };
enum class RationaleStyle { kContrastive, kCritique };  // P-style / R-style
enum class Variant { kP, kR, kPR };

struct TrainingPoint {
  PointKind kind = PointKind::kP;
  std::string system_text;
  std::string user_text;
  std::string assistant_text;
  std::string source_sample_id;
  RationaleMode rationale_mode = RationaleMode::kNone;
  // P: 0 = (draft, edited), 1 = (edited, draft). R: 0 = draft, 1 = edited.
  int order_index = 0;

  bool operator==(const TrainingPoint&) const = default;
};

struct RationaleRecord {
  std::string sample_id;
  RationaleStyle style = RationaleStyle::kContrastive;
  std::string text;
};

class TransformError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Template text. The same strings are checked in under templates/.
inline constexpr std::string_view kSystemPrompt =
    "You are an AI assistant who has knowledge about creative writing.";
inline constexpr std::string_view kPairwiseHead =
    "You are given two paragraphs of writing for a given instruction.\n"
    "Your task is to determine which paragraph is overall better in terms of writing quality.\n\n"
    " Paragraph 1:\n";
inline constexpr std::string_view kPairwiseMiddle = "\n\nParagraph 2:\n";
inline constexpr std::string_view kPairwiseTail =
    "\n\nYou must produce your answer in the following JSON format:\n"
    "{\"preference\": \"1|2\"}\n\n"
    " where 'preference' should be \"1\" if you think Paragraph 1 is better, \"2\" if you think "
    "Paragraph 2 is better.\n";
inline constexpr std::string_view kScalarHead =
    "You are given a paragraph of creative writing. You must score it on a scale from 1 to 10, "
    "where 1 is the lowest quality and 10 is the highest quality.\n\nParagraph:\n";
inline constexpr std::string_view kScalarTail =
    "\n\nYou must produce your answer in the following JSON format:\n"
    "{\"score\": 1}\n\n"
    " where 'score' is an integer between 1 and 10.";
inline constexpr std::string_view kInputRationaleDelimiter = "\n\nRationale:\n";
inline constexpr std::string_view kOutputRationaleDelimiter = "\n\n";
inline constexpr std::string_view kMirrorTemplate =
    "Write a {n} word paragraph in the style of {author} in {voice} voice given the content below.\n{plot}";

// Fixed scores for human-written paragraphs added to R training data.
inline constexpr double kAwardAuthorScore = 10.0;
inline constexpr double kMfaStudentScore = 7.5;

std::string pairwise_user_text(std::string_view paragraph_1, std::string_view paragraph_2);
std::string scalar_user_text(std::string_view paragraph);
std::string preference_completion(int preference);
std::string score_completion(int score);

// Half away from zero. Throws TransformError outside [1, 10].
int rounded_score(double score);

std::vector<TrainingPoint> to_pairwise(const corpus::LampSample& sample);
std::vector<TrainingPoint> to_scalar(const corpus::LampSample& sample);
std::vector<TrainingPoint> to_combined(const std::vector<corpus::LampSample>& samples);
std::vector<TrainingPoint> to_variant(const std::vector<corpus::LampSample>& samples, Variant variant);

// R point for a human-written paragraph scored by category anchor.
TrainingPoint anchored_scalar_point(std::string id, std::string_view paragraph,
                                    corpus::HumanCategory category);
double anchor_score(corpus::HumanCategory category);

std::vector<TrainingPoint> attach_rationales(const std::vector<TrainingPoint>& points,
                                             const std::vector<RationaleRecord>& rationales,
                                             RationaleMode mode);

std::string build_mirror_prompt(int n_words, std::string_view author, std::string_view voice,
                                std::string_view plot);

struct ParsedAnswer {
  PointKind kind = PointKind::kP;
  int value = 0;  // preference 1|2 or score 1..10
};

// Reads the structured answer at the end of an assistant message; a rationale
// may precede it. Throws TransformError when absent or out of range.
ParsedAnswer parse_assistant(std::string_view assistant_text);

// Stable sort on (source_sample_id, kind, order_index).
void canonical_order(std::vector<TrainingPoint>& points);

json to_json(const TrainingPoint& p);
TrainingPoint point_from_json(const json& j);
RationaleRecord rationale_from_json(const json& j);
std::vector<RationaleRecord> read_rationales(const std::filesystem::path& path);

std::string_view to_string(PointKind k);
std::string_view to_string(RationaleMode m);
std::string_view to_string(RationaleStyle s);
RationaleMode parse_rationale_mode(std::string_view name);
Variant parse_variant(std::string_view name);

}  // namespace wq::transform
