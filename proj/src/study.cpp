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

#include "wq/study.hpp"

#include <fcntl.h>
#include <httplib.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <numeric>
#include <system_error>

namespace wq::study {
namespace {

constexpr std::array<std::string_view, 3> kArmNames = {"first_draft", "random_edit", "best_edit"};

int idx(Arm a) { return static_cast<int>(a); }

std::string now_utc() {
  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string padded(std::size_t n, int width) {
  std::string s = std::to_string(n);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

void write_all(int fd, std::string_view data, const std::string& what) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno(what);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void fsync_dir(const std::filesystem::path& dir) {
  int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

struct LogScan {
  std::vector<AnnotationRecord> records;
  std::size_t valid_bytes = 0;
};

// A final line without a newline or with unparseable content is a torn write.
LogScan scan_log(const std::filesystem::path& path) {
  LogScan scan;
  if (!std::filesystem::exists(path)) return scan;
  std::string data = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    ++line_no;
    auto nl = data.find('\n', pos);
    bool last = nl == std::string::npos || nl + 1 == data.size();
    std::string_view line(data.data() + pos, (nl == std::string::npos ? data.size() : nl) - pos);
    if (nl == std::string::npos) break;  // torn tail
    if (!line.empty()) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        if (last) break;
        throw StudyError(path.string() + ":" + std::to_string(line_no) + ": corrupt record");
      }
      scan.records.push_back(record_from_json(j));
    }
    pos = nl + 1;
    scan.valid_bytes = pos;
  }
  return scan;
}

bool ranks_better(const RankVector& r, Arm a, Arm b) { return r[idx(a)] < r[idx(b)]; }

}  // namespace

std::string_view to_string(Arm a) { return kArmNames[static_cast<std::size_t>(a)]; }

Arm parse_arm(std::string_view name) {
  for (std::size_t i = 0; i < kArmNames.size(); ++i) {
    if (kArmNames[i] == name) return static_cast<Arm>(i);
  }
  throw std::invalid_argument("unknown arm: " + std::string(name));
}

bool is_permutation_of_ranks(const RankVector& ranks) {
  std::array<bool, 3> seen{};
  for (int r : ranks) {
    if (r < 1 || r > 3 || seen[r - 1]) return false;
    seen[r - 1] = true;
  }
  return true;
}

bool is_arm_permutation(const Presentation& p) {
  std::array<bool, 3> seen{};
  for (Arm a : p) {
    if (seen[idx(a)]) return false;
    seen[idx(a)] = true;
  }
  return true;
}

AnnotationRecord record_from_positional(std::string triplet_id, std::string annotator_id,
                                        const Presentation& presented, const RankVector& positional,
                                        std::string timestamp) {
  if (!is_permutation_of_ranks(positional)) throw StudyError("ranking is not a permutation of 1,2,3");
  if (!is_arm_permutation(presented)) throw StudyError("presented order repeats an arm");
  AnnotationRecord r;
  r.triplet_id = std::move(triplet_id);
  r.annotator_id = std::move(annotator_id);
  r.presented_order = presented;
  for (std::size_t pos = 0; pos < 3; ++pos) r.ranking[idx(presented[pos])] = positional[pos];
  r.timestamp = std::move(timestamp);
  return r;
}

std::size_t AssignmentPlan::n_assignments() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.items.size();
  return n;
}

const Assignment* AssignmentPlan::find(const std::string& annotator_id, const std::string& triplet_id) const {
  for (const auto& b : batches) {
    if (b.annotator_id != annotator_id) continue;
    for (const auto& a : b.items) {
      if (a.triplet_id == triplet_id) return &a;
    }
  }
  return nullptr;
}

AssignmentPlan assign_batches(const std::vector<std::string>& triplet_ids, const std::vector<std::string>& annotators,
                              int k_per_triplet, std::size_t batch_size, std::uint64_t seed) {
  if (k_per_triplet < 1) throw StudyError("k_per_triplet must be at least 1");
  if (batch_size < 1) throw StudyError("batch_size must be at least 1");
  if (static_cast<std::size_t>(k_per_triplet) > annotators.size()) {
    throw StudyError("infeasible coverage: k=" + std::to_string(k_per_triplet) + " but only " +
                     std::to_string(annotators.size()) + " annotator(s)");
  }
  if (std::set<std::string>(annotators.begin(), annotators.end()).size() != annotators.size()) {
    throw StudyError("duplicate annotator id");
  }
  if (std::set<std::string>(triplet_ids.begin(), triplet_ids.end()).size() != triplet_ids.size()) {
    throw StudyError("duplicate triplet id");
  }

  AssignmentPlan plan;
  plan.seed = seed;
  plan.k_per_triplet = k_per_triplet;
  plan.batch_size = batch_size;
  std::vector<std::size_t> load(annotators.size(), 0);
  std::size_t n_groups = (triplet_ids.size() + batch_size - 1) / batch_size;
  std::size_t assignment_index = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::uint64_t group_seed = derive_seed(seed, g);
    std::vector<std::size_t> order(annotators.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      auto ka = std::pair{load[a], derive_seed(group_seed, a)};
      auto kb = std::pair{load[b], derive_seed(group_seed, b)};
      return ka < kb || (ka == kb && a < b);
    });
    std::vector<std::size_t> chosen(order.begin(), order.begin() + k_per_triplet);
    std::sort(chosen.begin(), chosen.end());
    auto first = triplet_ids.begin() + static_cast<std::ptrdiff_t>(g * batch_size);
    auto last = triplet_ids.begin() + static_cast<std::ptrdiff_t>(std::min(triplet_ids.size(), (g + 1) * batch_size));
    for (auto a : chosen) {
      Batch b;
      b.batch_id = "g" + padded(g + 1, 3) + "-" + annotators[a];
      b.annotator_id = annotators[a];
      for (auto it = first; it != last; ++it) {
        Presentation p{Arm::kFirstDraft, Arm::kRandomEdit, Arm::kBestEdit};
        std::uint64_t state = derive_seed(group_seed, 0x10000 + assignment_index++);
        for (std::size_t i = 2; i > 0; --i) std::swap(p[i], p[bounded_draw(state, i + 1)]);
        b.items.push_back({*it, p});
      }
      load[a] += b.items.size();
      plan.batches.push_back(std::move(b));
    }
  }
  return plan;
}

const std::array<RankVector, 6>& all_rankings() {
  static const std::array<RankVector, 6> kAll = [] {
    std::array<RankVector, 6> out{};
    RankVector r{1, 2, 3};
    std::size_t i = 0;
    do {
      out[i++] = r;
    } while (std::next_permutation(r.begin(), r.end()));
    return out;
  }();
  return kAll;
}

int kendall_distance(const RankVector& a, const RankVector& b) {
  int d = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if ((a[i] < a[j]) != (b[i] < b[j])) ++d;
    }
  }
  return d;
}

AggregateResult aggregate(const std::vector<AnnotationRecord>& records, const std::string& triplet_id) {
  if (records.empty()) throw StudyError(triplet_id + ": no annotation records");
  std::set<std::string> annotators;
  std::array<int, 3> sums{};
  for (const auto& r : records) {
    if (r.triplet_id != triplet_id) throw StudyError("record for " + r.triplet_id + " passed with " + triplet_id);
    if (!annotators.insert(r.annotator_id).second) {
      throw StudyError("duplicate record for triplet " + triplet_id + " by annotator " + r.annotator_id);
    }
    if (!is_permutation_of_ranks(r.ranking)) throw StudyError(triplet_id + ": ranking is not a permutation");
    for (int a = 0; a < 3; ++a) sums[a] += r.ranking[a];
  }
  AggregateResult out;
  out.triplet_id = triplet_id;
  out.n_annotators = records.size();
  const double n = static_cast<double>(records.size());
  auto& m = out.per_arm_mean_rank;
  for (int a = 0; a < 3; ++a) m[a] = sums[a] / n;
  // Independent rounding can leave the sum a few ulp off 6; absorb that in
  // the last arm so the sum in arm order is exactly 6.
  if (m[0] + m[1] + m[2] != 6.0) m[2] = 6.0 - (m[0] + m[1]);

  auto lex_key = [](const RankVector& r) {
    return std::array<int, 3>{r[idx(Arm::kBestEdit)], r[idx(Arm::kRandomEdit)], r[idx(Arm::kFirstDraft)]};
  };
  // Integer form of sum(rank * mean) so the comparison is exact.
  auto mean_key = [&](const RankVector& r) { return r[0] * sums[0] + r[1] * sums[1] + r[2] * sums[2]; };
  const RankVector* best = nullptr;
  int best_dist = 0;
  for (const auto& cand : all_rankings()) {
    int dist = 0;
    for (const auto& r : records) dist += kendall_distance(cand, r.ranking);
    bool better = best == nullptr || dist < best_dist;
    if (!better && dist == best_dist) {
      int mc = mean_key(cand), mb = mean_key(*best);
      better = mc < mb || (mc == mb && lex_key(cand) < lex_key(*best));
    }
    if (better) {
      best = &cand;
      best_dist = dist;
    }
  }
  out.majority_rank = *best;
  return out;
}

std::vector<AggregateResult> aggregate_all(const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::vector<AnnotationRecord>> by_triplet;
  for (const auto& r : records) by_triplet[r.triplet_id].push_back(r);
  std::vector<AggregateResult> out;
  for (const auto& [id, rs] : by_triplet) out.push_back(aggregate(rs, id));
  return out;
}

StudySummary summarize(const std::vector<AnnotationRecord>& records) {
  StudySummary s;
  std::array<long long, 3> sums{};
  for (const auto& r : records) {
    for (int a = 0; a < 3; ++a) sums[a] += r.ranking[a];
  }
  s.n_records = records.size();
  if (!records.empty()) {
    for (int a = 0; a < 3; ++a) s.mean_rank[a] = static_cast<double>(sums[a]) / static_cast<double>(records.size());
  }
  for (const auto& agg : aggregate_all(records)) {
    ++s.n_triplets;
    for (int a = 0; a < 3; ++a) {
      if (agg.majority_rank[a] == 1) ++s.majority_first[a];
    }
  }
  return s;
}

CalibrationReport calibration(const std::vector<AnnotationRecord>& records,
                              const std::vector<select::TripletRecord>& triplets,
                              const CalibrationOptions& options) {
  const auto& edges = options.bin_edges;
  if (edges.size() < 2 || edges.front() != 0.0 || !std::isinf(edges.back())) {
    throw std::invalid_argument("bin edges must start at 0 and end at infinity");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("bin edges must be strictly increasing");
  }

  std::map<std::string, const select::TripletRecord*> by_id;
  for (const auto& t : triplets) by_id[t.id] = &t;
  std::map<std::string, std::vector<AnnotationRecord>> grouped;
  for (const auto& r : records) grouped[r.triplet_id].push_back(r);

  std::vector<std::pair<Arm, Arm>> arm_pairs;
  if (options.subset == PairSubset::kBestVsDraft) {
    arm_pairs = {{Arm::kBestEdit, Arm::kFirstDraft}};
  } else {
    arm_pairs = {{Arm::kBestEdit, Arm::kRandomEdit}, {Arm::kBestEdit, Arm::kFirstDraft},
                 {Arm::kRandomEdit, Arm::kFirstDraft}};
  }

  CalibrationReport report;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    CalibrationBin bin;
    bin.gap_lo = edges[i];
    bin.gap_hi = edges[i + 1];
    report.bins.push_back(bin);
  }
  std::vector<std::size_t> agree(report.bins.size(), 0), majority_agree(report.bins.size(), 0);

  std::vector<std::string> missing;
  for (const auto& [tid, rs] : grouped) {
    auto it = by_id.find(tid);
    if (it == by_id.end()) {
      missing.push_back(tid + " (unknown triplet)");
      continue;
    }
    const auto& t = *it->second;
    std::array<std::optional<double>, 3> score;
    score[idx(Arm::kFirstDraft)] = t.first_draft.score;
    score[idx(Arm::kRandomEdit)] = t.random_edit.score;
    score[idx(Arm::kBestEdit)] = t.best_edit.score;
    bool complete = true;
    for (auto [x, y] : arm_pairs) {
      if (!score[idx(x)] || !score[idx(y)]) {
        missing.push_back(tid + " " + std::string(to_string(x)) + "/" + std::string(to_string(y)));
        complete = false;
      }
    }
    if (!complete) continue;
    auto majority = aggregate(rs, tid);
    for (auto [x, y] : arm_pairs) {
      double sx = *score[idx(x)], sy = *score[idx(y)];
      if (sx == sy) {
        ++report.n_equal_score_pairs;
        continue;
      }
      Arm hi = sx > sy ? x : y, lo = sx > sy ? y : x;
      double gap = std::abs(sx - sy);
      std::size_t b = 0;
      while (gap > edges[b + 1]) ++b;
      auto& bin = report.bins[b];
      ++bin.n_pairs;
      ++report.n_pairs;
      for (const auto& r : rs) {
        ++bin.n_judgments;
        if (ranks_better(r.ranking, hi, lo)) ++agree[b];
      }
      if (ranks_better(majority.majority_rank, hi, lo)) ++majority_agree[b];
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing scores for " + std::to_string(missing.size()) + " pair(s):";
    for (const auto& m : missing) msg += " " + m + ";";
    throw StudyError(msg);
  }
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    auto& bin = report.bins[b];
    if (bin.n_pairs == 0) continue;
    bin.individual_agreement = static_cast<double>(agree[b]) / static_cast<double>(bin.n_judgments);
    bin.majority_agreement = static_cast<double>(majority_agree[b]) / static_cast<double>(bin.n_pairs);
  }
  return report;
}

json to_json(const AnnotationRecord& r) {
  json order = json::array();
  for (Arm a : r.presented_order) order.push_back(to_string(a));
  json ranking = json::object();
  for (Arm a : kArmOrder) ranking[std::string(to_string(a))] = r.rank_of(a);
  return {{"triplet_id", r.triplet_id},
          {"annotator_id", r.annotator_id},
          {"presented_order", std::move(order)},
          {"ranking", std::move(ranking)},
          {"timestamp", r.timestamp}};
}

AnnotationRecord record_from_json(const json& j) {
  AnnotationRecord r;
  r.triplet_id = required<std::string>(j, "triplet_id");
  r.annotator_id = required<std::string>(j, "annotator_id");
  const auto& order = j.at("presented_order");
  if (!order.is_array() || order.size() != 3) throw StudyError("presented_order must list three arms");
  for (std::size_t i = 0; i < 3; ++i) r.presented_order[i] = parse_arm(order[i].get<std::string>());
  if (!is_arm_permutation(r.presented_order)) throw StudyError("presented_order repeats an arm");
  for (Arm a : kArmOrder) r.ranking[idx(a)] = j.at("ranking").at(std::string(to_string(a))).get<int>();
  if (!is_permutation_of_ranks(r.ranking)) throw StudyError("ranking is not a permutation of 1,2,3");
  r.timestamp = j.value("timestamp", std::string());
  return r;
}

json to_json(const AssignmentPlan& p) {
  json batches = json::array();
  for (const auto& b : p.batches) {
    json items = json::array();
    for (const auto& a : b.items) {
      json order = json::array();
      for (Arm arm : a.presented_order) order.push_back(to_string(arm));
      items.push_back({{"triplet_id", a.triplet_id}, {"presented_order", std::move(order)}});
    }
    batches.push_back({{"batch_id", b.batch_id}, {"annotator_id", b.annotator_id}, {"items", std::move(items)}});
  }
  return {{"seed", p.seed},
          {"k_per_triplet", p.k_per_triplet},
          {"batch_size", p.batch_size},
          {"batches", std::move(batches)}};
}

AssignmentPlan plan_from_json(const json& j) {
  AssignmentPlan p;
  p.seed = required<std::uint64_t>(j, "seed");
  p.k_per_triplet = required<int>(j, "k_per_triplet");
  p.batch_size = required<std::size_t>(j, "batch_size");
  for (const auto& b : j.at("batches")) {
    Batch batch;
    batch.batch_id = required<std::string>(b, "batch_id");
    batch.annotator_id = required<std::string>(b, "annotator_id");
    for (const auto& item : b.at("items")) {
      Assignment a;
      a.triplet_id = required<std::string>(item, "triplet_id");
      for (std::size_t i = 0; i < 3; ++i) a.presented_order[i] = parse_arm(item.at("presented_order").at(i).get<std::string>());
      if (!is_arm_permutation(a.presented_order)) throw StudyError(a.triplet_id + ": presented_order repeats an arm");
      batch.items.push_back(std::move(a));
    }
    p.batches.push_back(std::move(batch));
  }
  return p;
}

json to_json(const AggregateResult& a) {
  json majority = json::object(), means = json::object();
  for (Arm arm : kArmOrder) {
    majority[std::string(to_string(arm))] = a.majority_rank[idx(arm)];
    means[std::string(to_string(arm))] = a.per_arm_mean_rank[idx(arm)];
  }
  return {{"triplet_id", a.triplet_id},
          {"majority_rank", std::move(majority)},
          {"per_arm_mean_rank", std::move(means)},
          {"n_annotators", a.n_annotators}};
}

json to_json(const StudySummary& s) {
  json means = json::object(), first = json::object();
  for (Arm arm : kArmOrder) {
    means[std::string(to_string(arm))] = s.mean_rank[idx(arm)];
    first[std::string(to_string(arm))] = s.majority_first[idx(arm)];
  }
  return {{"mean_rank", std::move(means)},
          {"majority_first", std::move(first)},
          {"n_triplets", s.n_triplets},
          {"n_records", s.n_records}};
}

json to_json(const CalibrationReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins) {
    json hi = std::isinf(b.gap_hi) ? json("inf") : json(b.gap_hi);
    bins.push_back({{"gap_lo", b.gap_lo},
                    {"gap_hi", hi},
                    {"n_pairs", b.n_pairs},
                    {"n_judgments", b.n_judgments},
                    {"individual_agreement", b.individual_agreement ? json(*b.individual_agreement) : json()},
                    {"majority_agreement", b.majority_agreement ? json(*b.majority_agreement) : json()}});
  }
  return {{"bins", std::move(bins)}, {"n_pairs", r.n_pairs}, {"n_equal_score_pairs", r.n_equal_score_pairs}};
}

std::vector<AnnotationRecord> read_records(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  for (const auto& line : read_lines(path)) {
    try {
      out.push_back(record_from_json(json::parse(line.text)));
    } catch (const std::exception& e) {
      throw StudyError(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

RecordStore::RecordStore(std::filesystem::path log_path, std::filesystem::path snapshot_path,
                         std::size_t snapshot_every)
    : log_path_(std::move(log_path)), snapshot_path_(std::move(snapshot_path)), snapshot_every_(snapshot_every) {
  std::vector<AnnotationRecord> base;
  if (std::filesystem::exists(snapshot_path_)) base = read_records(snapshot_path_);
  auto scan = scan_log(log_path_);
  for (auto* list : {&base, &scan.records}) {
    for (auto& r : *list) {
      if (seen_.insert({r.annotator_id, r.triplet_id}).second) records_.push_back(std::move(r));
    }
  }
  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw_errno("open " + log_path_.string());
  if (std::filesystem::file_size(log_path_) > scan.valid_bytes) {
    if (::ftruncate(fd_, static_cast<off_t>(scan.valid_bytes)) != 0) throw_errno("truncate torn log tail");
    ::fdatasync(fd_);
  }
  since_snapshot_ = scan.records.size();
}

RecordStore::~RecordStore() {
  if (fd_ >= 0) ::close(fd_);
}

RecordStore::AppendStatus RecordStore::try_append(const AnnotationRecord& record) {
  std::lock_guard lock(mu_);
  if (seen_.count({record.annotator_id, record.triplet_id})) return AppendStatus::kDuplicate;
  std::string line = to_json(record).dump() + "\n";
  write_all(fd_, line, "append " + log_path_.string());
  if (::fdatasync(fd_) != 0) throw_errno("fdatasync " + log_path_.string());
  seen_.insert({record.annotator_id, record.triplet_id});
  records_.push_back(record);
  if (snapshot_every_ > 0 && ++since_snapshot_ >= snapshot_every_) snapshot_locked();
  return AppendStatus::kStored;
}

bool RecordStore::contains(const std::string& annotator_id, const std::string& triplet_id) const {
  std::lock_guard lock(mu_);
  return seen_.count({annotator_id, triplet_id}) > 0;
}

std::vector<AnnotationRecord> RecordStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t RecordStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

void RecordStore::snapshot() {
  std::lock_guard lock(mu_);
  snapshot_locked();
}

void RecordStore::snapshot_locked() {
  auto tmp = snapshot_path_;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + tmp.string());
  std::string data;
  for (const auto& r : records_) data += to_json(r).dump() + "\n";
  write_all(fd, data, "write " + tmp.string());
  if (::fsync(fd) != 0) throw_errno("fsync " + tmp.string());
  ::close(fd);
  std::filesystem::rename(tmp, snapshot_path_);
  fsync_dir(snapshot_path_.parent_path());
  // A crash before the truncate leaves records in both files; load dedupes.
  if (::ftruncate(fd_, 0) != 0) throw_errno("truncate " + log_path_.string());
  ::fdatasync(fd_);
  since_snapshot_ = 0;
}

std::vector<AnnotationRecord> RecordStore::load(const std::filesystem::path& log_path,
                                                const std::filesystem::path& snapshot_path) {
  std::vector<AnnotationRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<AnnotationRecord> base;
  if (std::filesystem::exists(snapshot_path)) base = read_records(snapshot_path);
  auto scan = scan_log(log_path);
  for (auto* list : {&base, &scan.records}) {
    for (auto& r : *list) {
      if (seen.insert({r.annotator_id, r.triplet_id}).second) out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<Annotator> read_annotators(const std::filesystem::path& path) {
  std::vector<Annotator> out;
  for (const auto& line : read_lines(path)) {
    json j = json::parse(line.text);
    out.push_back({required<std::string>(j, "id"), required<std::string>(j, "token")});
  }
  return out;
}

StudyService::StudyService(AssignmentPlan plan, std::vector<select::TripletRecord> triplets,
                           std::vector<Annotator> annotators, ServiceConfig config)
    : plan_(std::move(plan)), config_(std::move(config)) {
  for (auto& t : triplets) {
    auto id = t.id;
    triplets_.emplace(std::move(id), std::move(t));
  }
  std::set<std::string> ids;
  for (const auto& a : annotators) {
    if (a.token.empty()) throw StudyError("annotator " + a.id + " has an empty token");
    if (!token_to_annotator_.emplace(a.token, a.id).second) throw StudyError("duplicate annotator token");
    ids.insert(a.id);
  }
  for (const auto& b : plan_.batches) {
    if (!ids.count(b.annotator_id)) throw StudyError("plan annotator without a token: " + b.annotator_id);
    for (const auto& item : b.items) {
      if (!triplets_.count(item.triplet_id)) throw StudyError("plan references unknown triplet " + item.triplet_id);
    }
    total_for_[b.annotator_id] += b.items.size();
  }
  store_ = std::make_unique<RecordStore>(config_.log_path, config_.snapshot_path, config_.snapshot_every);
  server_ = std::make_unique<httplib::Server>();
  routes();
}

StudyService::~StudyService() { stop(); }

json StudyService::progress_for(const std::string& annotator_id) const {
  std::size_t done = 0;
  for (const auto& b : plan_.batches) {
    if (b.annotator_id != annotator_id) continue;
    for (const auto& item : b.items) done += store_->contains(annotator_id, item.triplet_id) ? 1 : 0;
  }
  auto it = total_for_.find(annotator_id);
  return {{"completed", done}, {"total", it == total_for_.end() ? 0 : it->second}};
}

void StudyService::routes() {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto token_of = [](const httplib::Request& req, const json* body) -> std::string {
    if (req.has_param("annotator")) return req.get_param_value("annotator");
    if (req.has_header("X-Annotator-Token")) return req.get_header_value("X-Annotator-Token");
    if (body && body->is_object() && body->contains("annotator") && body->at("annotator").is_string()) {
      return body->at("annotator").get<std::string>();
    }
    return {};
  };

  server_->Get("/api/batch", [=, this](const httplib::Request& req, httplib::Response& res) {
    auto who = token_to_annotator_.find(token_of(req, nullptr));
    if (who == token_to_annotator_.end()) return reply(res, 401, {{"error", "unknown annotator token"}});
    const auto& annotator = who->second;
    for (const auto& b : plan_.batches) {
      if (b.annotator_id != annotator) continue;
      bool pending = false;
      json items = json::array();
      for (const auto& a : b.items) {
        const auto& t = triplets_.at(a.triplet_id);
        json responses = json::array();
        for (Arm arm : a.presented_order) {
          const auto& c = arm == Arm::kFirstDraft ? t.first_draft : arm == Arm::kRandomEdit ? t.random_edit : t.best_edit;
          responses.push_back(c.text);
        }
        bool done = store_->contains(annotator, a.triplet_id);
        pending = pending || !done;
        items.push_back({{"triplet_id", a.triplet_id},
                         {"instruction", t.instruction},
                         {"responses", std::move(responses)},
                         {"completed", done}});
      }
      if (pending) {
        return reply(res, 200, {{"batch_id", b.batch_id}, {"items", std::move(items)}, {"progress", progress_for(annotator)}});
      }
    }
    reply(res, 200, {{"batch_id", nullptr}, {"items", json::array()}, {"progress", progress_for(annotator)}});
  });

  server_->Post("/api/ranking", [=, this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    auto who = token_to_annotator_.find(token_of(req, body.is_discarded() ? nullptr : &body));
    if (who == token_to_annotator_.end()) return reply(res, 401, {{"error", "unknown annotator token"}});
    const auto& annotator = who->second;
    if (body.is_discarded() || !body.is_object() || !body.contains("triplet_id") || !body["triplet_id"].is_string()) {
      return reply(res, 400, {{"error", "body must be {triplet_id, ranking}"}});
    }
    auto triplet_id = body["triplet_id"].get<std::string>();
    const Assignment* a = plan_.find(annotator, triplet_id);
    if (!a) return reply(res, 404, {{"error", "triplet not assigned to this annotator"}});
    const auto& ranking = body.contains("ranking") ? body["ranking"] : json();
    RankVector positional{};
    bool valid = ranking.is_array() && ranking.size() == 3;
    for (std::size_t i = 0; valid && i < 3; ++i) {
      valid = ranking[i].is_number_integer();
      if (valid) positional[i] = ranking[i].get<int>();
    }
    if (!valid || !is_permutation_of_ranks(positional)) {
      return reply(res, 400, {{"error", "ranking must be a permutation of 1,2,3 in presented order"}});
    }
    auto record = record_from_positional(triplet_id, annotator, a->presented_order, positional, now_utc());
    try {
      if (store_->try_append(record) == RecordStore::AppendStatus::kDuplicate) {
        return reply(res, 409, {{"error", "ranking already submitted for this triplet"}});
      }
    } catch (const std::exception& e) {
      return reply(res, 500, {{"error", std::string("record not persisted: ") + e.what()}});
    }
    reply(res, 200, {{"status", "stored"}, {"progress", progress_for(annotator)}});
  });

  server_->Get("/api/progress", [=, this](const httplib::Request& req, httplib::Response& res) {
    auto token = token_of(req, nullptr);
    if (!token.empty()) {
      auto who = token_to_annotator_.find(token);
      if (who == token_to_annotator_.end()) return reply(res, 401, {{"error", "unknown annotator token"}});
      return reply(res, 200, progress_for(who->second));
    }
    reply(res, 200, {{"completed", store_->size()}, {"total", plan_.n_assignments()}});
  });

  if (!config_.static_dir.empty()) {
    if (!server_->set_mount_point("/", config_.static_dir.string())) {
      throw StudyError("static directory not found: " + config_.static_dir.string());
    }
  }
}

int StudyService::bind() {
  port_ = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                            : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port_ < 0) throw StudyError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  return port_;
}

void StudyService::listen() { server_->listen_after_bind(); }

void StudyService::start() {
  bind();
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
}

void StudyService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace wq::study
