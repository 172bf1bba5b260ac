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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace wq {

using json = nlohmann::ordered_json;

// One physical line of a line-delimited file, with its 1-based line number.
struct Line {
  std::size_t number = 0;
  std::string text;
};

// Reads every non-blank line. Throws std::runtime_error if the file can't be opened.
std::vector<Line> read_lines(const std::filesystem::path& path);

// Writes one compact JSON object per line, '\n' terminated.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Whitespace-delimited token count.
std::size_t word_count(std::string_view text);

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Stable content key for an (instruction, response) pair. Length-prefixed so
// that no two distinct pairs can collide by concatenation.
std::string content_key(std::string_view instruction, std::string_view response);

// SplitMix64 finalizer. Used to derive independent per-index streams from a
// run seed so that parallel workers stay deterministic.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Unbiased draw in [0, n) from a 64-bit generator state. n must be > 0.
std::uint64_t bounded_draw(std::uint64_t& state, std::uint64_t n);

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

template <typename T>
T required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw std::invalid_argument(std::string("missing field '") + key + "'");
  }
  return it->get<T>();
}

}  // namespace wq
