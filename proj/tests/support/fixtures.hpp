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
#include <random>
#include <string>
#include <vector>

#include "wq/corpus.hpp"
#include "wq/edits.hpp"

namespace wqtest {

std::filesystem::path source_dir();
std::string golden(const std::string& name);
std::string template_text(const std::string& name);
std::string replace_all(std::string s, const std::string& from, const std::string& to);

// The Table 5 draft and its twelve edits; scores 3.3 -> 7.0.
wq::edits::EditTrace table5_trace();
wq::edits::EditTrace table8_trace();

// The Table 7 comparison: first draft, random edit and best edit with their
// recorded scores (3.30, 4.43, 6.84).
struct Table7 {
  std::string instruction;
  std::array<std::string, 3> texts;
  std::array<double, 3> scores;
};
Table7 table7_triplet();

struct OracleTrace {
  wq::edits::EditTrace trace;
  std::string expected_final;  // computed by positional splicing, not by apply_all
};

// Table 5 plus 49 synthetic traces with unique, disjoint spans.
std::vector<OracleTrace> fixture_traces(std::uint64_t seed = 7);

std::string random_words(std::mt19937_64& rng, std::size_t n, const std::string& tag);

// Raw adapter input lines shaped like each source dataset.
std::vector<wq::Line> raw_records(wq::corpus::Dataset dataset, std::size_t n_records, std::uint64_t seed);

// Record counts that reproduce Table 1 after ingestion and order balancing.
std::size_t reference_record_count(wq::corpus::Dataset dataset);

// Every dataset ingested through its adapter: 4729 pairs.
std::vector<wq::corpus::PreferencePair> table1_corpus(std::uint64_t seed = 0);

std::vector<wq::corpus::LampSample> lamp_fixture(std::size_t n, std::uint64_t seed = 0);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace wqtest
