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
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wq/common.hpp"
#include "wq/select.hpp"

namespace httplib {
class Server;
}

// Expert ranking campaign: batch assignment, record collection over HTTP,
// majority-rank aggregation and score-gap calibration.
namespace wq::study {

enum class Arm { kFirstDraft = 0, kRandomEdit = 1, kBestEdit = 2 };

// Fixed arm order for reports and the final majority tie-break.
inline constexpr std::array<Arm, 3> kArmOrder = {Arm::kBestEdit, Arm::kRandomEdit, Arm::kFirstDraft};

// Indexed by static_cast<int>(Arm).
using RankVector = std::array<int, 3>;
using Presentation = std::array<Arm, 3>;  // arm shown at each position

std::string_view to_string(Arm a);
Arm parse_arm(std::string_view name);
bool is_permutation_of_ranks(const RankVector& ranks);

struct AnnotationRecord {
  std::string triplet_id;
  std::string annotator_id;
  Presentation presented_order{Arm::kFirstDraft, Arm::kRandomEdit, Arm::kBestEdit};
  RankVector ranking{};  // by arm
  std::string timestamp;

  int rank_of(Arm a) const { return ranking[static_cast<int>(a)]; }
  bool operator==(const AnnotationRecord&) const = default;
};

// De-blinds ranks given per presented position.
AnnotationRecord record_from_positional(std::string triplet_id, std::string annotator_id,
                                        const Presentation& presented, const RankVector& positional,
                                        std::string timestamp);

class StudyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Assignment {
  std::string triplet_id;
  Presentation presented_order{};
  bool operator==(const Assignment&) const = default;
};

struct Batch {
  std::string batch_id;
  std::string annotator_id;
  std::vector<Assignment> items;
  bool operator==(const Batch&) const = default;
};

struct AssignmentPlan {
  std::uint64_t seed = 0;
  int k_per_triplet = 0;
  std::size_t batch_size = 0;
  std::vector<Batch> batches;

  std::size_t n_assignments() const;
  const Assignment* find(const std::string& annotator_id, const std::string& triplet_id) const;
  bool operator==(const AssignmentPlan&) const = default;
};

// Triplets are cut into consecutive groups of batch_size; each group goes to
// the k least-loaded annotators (seeded tie-break) as one batch per annotator.
// Presentation order is shuffled per annotator-triplet.
AssignmentPlan assign_batches(const std::vector<std::string>& triplet_ids, const std::vector<std::string>& annotators,
                              int k_per_triplet, std::size_t batch_size, std::uint64_t seed);

struct AggregateResult {
  std::string triplet_id;
  RankVector majority_rank{};
  std::array<double, 3> per_arm_mean_rank{};
  std::size_t n_annotators = 0;
};

// Kendall-tau medoid over the six permutations. Ties go to the permutation
// with the smallest sum of rank * mean rank, then to the lexicographically
// smallest rank vector read in best/random/draft order.
AggregateResult aggregate(const std::vector<AnnotationRecord>& records, const std::string& triplet_id);

// Number of discordant arm pairs between two rank vectors (0..3).
int kendall_distance(const RankVector& a, const RankVector& b);
const std::array<RankVector, 6>& all_rankings();

// Groups records by triplet and aggregates each; throws on duplicates.
std::vector<AggregateResult> aggregate_all(const std::vector<AnnotationRecord>& records);

struct StudySummary {
  std::array<double, 3> mean_rank{};           // over every judgment
  std::array<std::size_t, 3> majority_first{}; // triplets where the arm is majority rank 1
  std::size_t n_triplets = 0;
  std::size_t n_records = 0;
};

StudySummary summarize(const std::vector<AnnotationRecord>& records);

enum class PairSubset { kAllPairs, kBestVsDraft };

struct CalibrationOptions {
  std::vector<double> bin_edges{0.0, 0.5, 1.0, 2.0, 3.0, std::numeric_limits<double>::infinity()};
  PairSubset subset = PairSubset::kAllPairs;
};

// First bin is [lo, hi], later bins (lo, hi].
struct CalibrationBin {
  double gap_lo = 0;
  double gap_hi = 0;
  std::size_t n_pairs = 0;
  std::size_t n_judgments = 0;
  std::optional<double> individual_agreement;  // empty bin -> none
  std::optional<double> majority_agreement;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  std::size_t n_pairs = 0;               // pairs placed in bins
  std::size_t n_equal_score_pairs = 0;   // excluded: no higher-scoring side
};

// Each unordered arm pair of an annotated triplet is one pair; every annotator
// contributes one judgment on it. Scores come from the triplet records.
CalibrationReport calibration(const std::vector<AnnotationRecord>& records,
                              const std::vector<select::TripletRecord>& triplets,
                              const CalibrationOptions& options = {});

json to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(const json& j);
json to_json(const AssignmentPlan& p);
AssignmentPlan plan_from_json(const json& j);
json to_json(const AggregateResult& a);
json to_json(const StudySummary& s);
json to_json(const CalibrationReport& r);
std::vector<AnnotationRecord> read_records(const std::filesystem::path& path);

// Append-only record log with periodic snapshots. Every accepted record is
// fdatasync'd before try_append returns.
class RecordStore {
 public:
  RecordStore(std::filesystem::path log_path, std::filesystem::path snapshot_path, std::size_t snapshot_every = 1000);
  ~RecordStore();
  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  enum class AppendStatus { kStored, kDuplicate };
  AppendStatus try_append(const AnnotationRecord& record);

  bool contains(const std::string& annotator_id, const std::string& triplet_id) const;
  std::vector<AnnotationRecord> records() const;
  std::size_t size() const;
  void snapshot();

  // Snapshot plus log, deduplicated on (annotator, triplet). A torn final log
  // line is dropped.
  static std::vector<AnnotationRecord> load(const std::filesystem::path& log_path,
                                            const std::filesystem::path& snapshot_path);

 private:
  void snapshot_locked();

  std::filesystem::path log_path_;
  std::filesystem::path snapshot_path_;
  std::size_t snapshot_every_;
  std::size_t since_snapshot_ = 0;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::vector<AnnotationRecord> records_;
  std::set<std::pair<std::string, std::string>> seen_;
};

struct Annotator {
  std::string id;
  std::string token;
};

std::vector<Annotator> read_annotators(const std::filesystem::path& path);

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;
  std::filesystem::path log_path = "records.log";
  std::filesystem::path snapshot_path = "records.snapshot.jsonl";
  std::size_t snapshot_every = 1000;
};

// GET /api/batch?annotator=<token>, POST /api/ranking, GET /api/progress.
// Responses carry texts in presented order only; no arms, scores or models.
class StudyService {
 public:
  StudyService(AssignmentPlan plan, std::vector<select::TripletRecord> triplets, std::vector<Annotator> annotators,
               ServiceConfig config);
  ~StudyService();

  int bind();  // returns the bound port
  void listen();  // blocks until stop()
  void start();   // bind + listen on a background thread
  void stop();
  int port() const { return port_; }
  RecordStore& store() { return *store_; }

 private:
  void routes();
  json progress_for(const std::string& annotator_id) const;

  AssignmentPlan plan_;
  std::map<std::string, select::TripletRecord> triplets_;
  std::map<std::string, std::string> token_to_annotator_;
  std::map<std::string, std::size_t> total_for_;
  ServiceConfig config_;
  std::unique_ptr<RecordStore> store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace wq::study
