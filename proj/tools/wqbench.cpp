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

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "wq/bench.hpp"
#include "wq/common.hpp"
#include "wq/corpus.hpp"
#include "wq/edits.hpp"
#include "wq/scoring.hpp"
#include "wq/select.hpp"
#include "wq/study.hpp"
#include "wq/transform.hpp"

namespace {

using namespace wq;

int ingest(const std::string& dataset_name, const std::string& in, const std::string& out, std::uint64_t seed,
           const std::string& allowlist, const std::string& rejections, std::size_t min_words,
           std::size_t max_words) {
  auto dataset = corpus::parse_dataset(dataset_name);
  corpus::AdapterConfig config;
  config.seed = seed;
  if (!allowlist.empty()) {
    std::set<std::string> ids;
    for (const auto& line : read_lines(allowlist)) ids.insert(line.text);
    config.allowlist = std::move(ids);
  }
  if (max_words > 0) config.word_bounds = corpus::WordBounds{min_words, max_words};
  auto result = corpus::ingest_dataset(in, dataset, config);
  corpus::write_pairs(out, result.pairs);
  if (!rejections.empty()) {
    std::vector<json> rows;
    for (const auto& r : result.rejections) rows.push_back(corpus::to_json(r));
    write_jsonl(rejections, rows);
  }
  std::cerr << dataset_name << ": " << result.pairs.size() << " pairs, " << result.rejections.size()
            << " rejected" << (result.preduplicated ? ", input already holds both orders" : "") << "\n";
  return 0;
}

int validate(const std::string& manifest_path, const std::string& pairs_path) {
  auto manifest = corpus::manifest_from_json(json::parse(read_file(manifest_path)));
  auto report = corpus::validate_manifest(corpus::read_pairs(pairs_path), manifest);
  std::cout << corpus::to_json(report).dump(2) << "\n";
  return report.passed ? 0 : 1;
}

int transform_cmd(const std::string& in, const std::string& variant, const std::string& rationales,
                  const std::string& mode, const std::string& out) {
  auto points = transform::to_variant(corpus::read_lamp(in), transform::parse_variant(variant));
  if (!rationales.empty()) {
    auto m = transform::parse_rationale_mode(mode.empty() ? "ir-o" : mode);
    points = transform::attach_rationales(points, transform::read_rationales(rationales), m);
  } else if (!mode.empty()) {
    throw std::invalid_argument("--rationale-mode needs --rationales");
  }
  std::vector<json> rows;
  rows.reserve(points.size());
  for (const auto& p : points) rows.push_back(transform::to_json(p));
  write_jsonl(out, rows);
  std::cerr << points.size() << " training points\n";
  return 0;
}

std::vector<std::pair<json, edits::EditTrace>> read_traces(const std::string& path) {
  std::vector<std::pair<json, edits::EditTrace>> out;
  for (const auto& line : read_lines(path)) {
    json j = json::parse(line.text);
    out.emplace_back(j, edits::trace_from_json(j));
  }
  return out;
}

int edits_cmd(const std::string& action, const std::string& in, const std::string& out, const std::string& direction,
              const std::string& scorer_spec, const std::string& summary) {
  std::vector<json> rows;
  int status = 0;
  std::vector<edits::GradualCurve> curves;
  std::unique_ptr<scoring::Scorer> scorer;
  if (!scorer_spec.empty()) scorer = scoring::make_scorer(scoring::load_scorer_spec(scorer_spec));
  for (auto& [raw, trace] : read_traces(in)) {
    json row = {{"id", raw.value("id", std::string())}};
    if (action == "apply") {
      row["final"] = edits::apply_all(trace);
    } else if (action == "verify") {
      auto v = edits::verify(trace);
      row["ok"] = v.ok && v.final_matches;
      row["final_matches"] = v.final_matches;
      if (v.failed_index) row["failed_index"] = *v.failed_index;
      if (!v.ambiguous.empty()) row["ambiguous"] = v.ambiguous;
      if (!(v.ok && v.final_matches)) status = 1;
    } else {
      auto curve = edits::gradual_sequence(trace, edits::parse_direction(direction));
      if (scorer) bench::score_curve(curve, *scorer, raw.value("instruction", std::string()));
      row["curve"] = edits::to_json(curve);
      curves.push_back(std::move(curve));
    }
    rows.push_back(std::move(row));
  }
  write_jsonl(out, rows);
  if (scorer && !summary.empty()) write_file(summary, bench::to_json(bench::summarize_sensitivity(curves)).dump(2) + "\n");
  return status;
}

scoring::Scorer& load_scorer(const std::string& path, std::unique_ptr<scoring::Scorer>& holder) {
  holder = scoring::make_scorer(scoring::load_scorer_spec(path));
  return *holder;
}

int run_cmd(const std::string& pairs, const std::string& scorer_spec, std::uint64_t seed, int workers,
            const std::string& out, bool skip_errors) {
  std::unique_ptr<scoring::Scorer> holder;
  auto& scorer = load_scorer(scorer_spec, holder);
  bench::BenchOptions options{seed, workers, skip_errors};
  try {
    auto report = bench::run_benchmark(corpus::read_pairs(pairs), scorer, options);
    std::cout << bench::render_report(report, bench::ReportFormat::kTableText);
    if (!out.empty()) write_file(out, bench::render_report(report, bench::ReportFormat::kMachineReadable));
  } catch (const bench::BenchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& f : e.failures()) std::cerr << "  " << f.pair_id << ": " << f.reason << "\n";
    return 1;
  }
  return 0;
}

int gaps_cmd(const std::string& pairs, const std::string& scorer_spec, int workers, const std::string& out) {
  std::unique_ptr<scoring::Scorer> holder;
  auto& scorer = load_scorer(scorer_spec, holder);
  auto report = bench::gap_analysis(corpus::read_pairs(pairs), scorer, workers);
  std::cout << bench::render_report(report, bench::ReportFormat::kTableText);
  if (!out.empty()) write_file(out, bench::render_report(report, bench::ReportFormat::kMachineReadable));
  return 0;
}

int select_cmd(const std::string& drafts, const std::string& generator, const std::string& scorer_spec,
               std::size_t n, std::uint64_t seed, int workers, const std::string& out, std::string degenerate,
               bool no_raw) {
  std::unique_ptr<scoring::Scorer> holder;
  auto& scorer = load_scorer(scorer_spec, holder);
  select::GeneratorPool pool(select::load_generator_spec(generator));
  select::BuildOptions options{n, seed, workers, !no_raw};
  auto result = select::build_triplets(select::read_drafts(drafts), pool, scorer, options);
  select::write_triplets(out, result.triplets);
  if (degenerate.empty()) degenerate = out + ".degenerate.jsonl";
  std::vector<json> rows;
  for (const auto& d : result.degenerate) rows.push_back(select::to_json(d));
  write_jsonl(degenerate, rows);
  std::cerr << result.triplets.size() << " triplets, " << result.degenerate.size() << " degenerate, "
            << result.errors.size() << " failed\n";
  for (const auto& e : result.errors) std::cerr << "  " << e.draft_id << ": " << e.message << "\n";
  return result.errors.empty() ? 0 : 1;
}

std::vector<double> parse_edges(const std::string& text) {
  std::vector<double> edges;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    edges.push_back(item == "inf" ? std::numeric_limits<double>::infinity() : std::stod(item));
  }
  return edges;
}

int study_assign(const std::string& triplets, const std::string& annotators, int k, std::size_t batch,
                 std::uint64_t seed, const std::string& out) {
  std::vector<std::string> tids, aids;
  for (const auto& t : select::read_triplets(triplets)) tids.push_back(t.id);
  for (const auto& a : study::read_annotators(annotators)) aids.push_back(a.id);
  auto plan = study::assign_batches(tids, aids, k, batch, seed);
  write_file(out, study::to_json(plan).dump(2) + "\n");
  std::cerr << plan.n_assignments() << " assignments in " << plan.batches.size() << " batches\n";
  return 0;
}

study::StudyService* g_service = nullptr;

int study_serve(const std::string& plan, const std::string& triplets, const std::string& annotators,
                study::ServiceConfig config) {
  study::StudyService service(study::plan_from_json(json::parse(read_file(plan))), select::read_triplets(triplets),
                              study::read_annotators(annotators), std::move(config));
  int port = service.bind();
  std::cerr << "study service on port " << port << " (" << service.store().size() << " records loaded)\n";
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  service.listen();
  g_service = nullptr;
  return 0;
}

int study_aggregate(const std::string& records, const std::string& out) {
  auto rs = study::read_records(records);
  std::vector<json> rows;
  for (const auto& a : study::aggregate_all(rs)) rows.push_back(study::to_json(a));
  if (!out.empty()) write_jsonl(out, rows);
  std::cout << study::to_json(study::summarize(rs)).dump(2) << "\n";
  return 0;
}

int study_calibrate(const std::string& records, const std::string& triplets, const std::string& edges,
                    const std::string& subset, const std::string& out) {
  study::CalibrationOptions options;
  if (!edges.empty()) options.bin_edges = parse_edges(edges);
  if (subset == "best-vs-draft") {
    options.subset = study::PairSubset::kBestVsDraft;
  } else if (subset != "all") {
    throw std::invalid_argument("--pairs must be all or best-vs-draft");
  }
  auto report = study::calibration(study::read_records(records), select::read_triplets(triplets), options);
  std::string text = study::to_json(report).dump(2) + "\n";
  if (!out.empty()) write_file(out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wqbench: writing-quality benchmark, edit and study toolkit"};
  app.require_subcommand(1);
  int status = 0;

  std::string dataset, in, out, allowlist, rejections;
  std::uint64_t seed = 0;
  std::size_t min_words = 0, max_words = 0;
  auto* ingest_cmd = app.add_subcommand("ingest", "Standardize a raw dataset into preference pairs");
  ingest_cmd->add_option("--dataset", dataset)->required();
  ingest_cmd->add_option("--in", in)->required();
  ingest_cmd->add_option("--out", out)->required();
  ingest_cmd->add_option("--seed", seed);
  ingest_cmd->add_option("--allowlist", allowlist, "File of record ids to keep (one per line)");
  ingest_cmd->add_option("--rejections", rejections, "Write per-record rejections here");
  ingest_cmd->add_option("--min-words", min_words);
  ingest_cmd->add_option("--max-words", max_words, "Override per-response word bounds");
  ingest_cmd->callback([&] { status = ingest(dataset, in, out, seed, allowlist, rejections, min_words, max_words); });

  std::string manifest, pairs;
  auto* validate_cmd = app.add_subcommand("validate", "Check a pair file against a manifest");
  validate_cmd->add_option("--manifest", manifest)->required();
  validate_cmd->add_option("--pairs", pairs)->required();
  validate_cmd->callback([&] { status = validate(manifest, pairs); });

  std::string variant, rationales, rationale_mode;
  auto* transform_sub = app.add_subcommand("transform", "Build P/R/PR training points from LAMP samples");
  transform_sub->add_option("--in", in)->required();
  transform_sub->add_option("--variant", variant)->required()->check(CLI::IsMember({"p", "r", "pr"}));
  transform_sub->add_option("--rationales", rationales);
  transform_sub->add_option("--rationale-mode", rationale_mode)->check(CLI::IsMember({"ir-o", "i-ro"}));
  transform_sub->add_option("--out", out)->required();
  transform_sub->callback([&] { status = transform_cmd(in, variant, rationales, rationale_mode, out); });

  auto* edits_app = app.add_subcommand("edits", "Execute and inspect edit traces");
  edits_app->require_subcommand(1);
  std::string direction = "forward", scorer, summary;
  for (const char* action : {"apply", "verify", "gradual"}) {
    auto* sub = edits_app->add_subcommand(action);
    sub->add_option("--in", in)->required();
    sub->add_option("--out", out)->required();
    if (std::string(action) == "gradual") {
      sub->add_option("--direction", direction)->check(CLI::IsMember({"forward", "reverse"}));
      sub->add_option("--scorer", scorer, "Score every intermediate state");
      sub->add_option("--summary", summary, "Write the sensitivity summary here");
    }
    sub->callback([&, action] { status = edits_cmd(action, in, out, direction, scorer, summary); });
  }
  std::string draft, completion;
  auto* build_prompt = edits_app->add_subcommand("build-prompt", "Print the editing prompt for a draft");
  build_prompt->add_option("--draft", draft)->required();
  build_prompt->callback([&] { std::cout << edits::build_cot_prompt(read_file(draft)); });
  auto* parse = edits_app->add_subcommand("parse", "Parse an editing completion into a trace");
  parse->add_option("--completion", completion)->required();
  parse->callback([&] { std::cout << edits::to_json(edits::parse_cot_completion(read_file(completion))).dump(2) << "\n"; });

  int workers = 1;
  bool skip_errors = false;
  auto* run = app.add_subcommand("run", "Score a pair file and report accuracy");
  run->add_option("--pairs", pairs)->required();
  run->add_option("--scorer", scorer)->required();
  run->add_option("--seed", seed);
  run->add_option("--workers", workers)->check(CLI::PositiveNumber);
  run->add_option("--out", out);
  run->add_flag("--skip-errors", skip_errors);
  run->callback([&] { status = run_cmd(pairs, scorer, seed, workers, out, skip_errors); });

  auto* gaps = app.add_subcommand("gaps", "Mean preferred/rejected scores per dataset");
  gaps->add_option("--pairs", pairs)->required();
  gaps->add_option("--scorer", scorer)->required();
  gaps->add_option("--workers", workers)->check(CLI::PositiveNumber);
  gaps->add_option("--out", out);
  gaps->callback([&] { status = gaps_cmd(pairs, scorer, workers, out); });

  std::string drafts, generator, degenerate;
  std::size_t n = 20;
  bool no_raw = false;
  auto* select_app = app.add_subcommand("select", "Best-of-N candidate selection into triplets");
  select_app->add_option("--drafts", drafts)->required();
  select_app->add_option("--generator", generator)->required();
  select_app->add_option("--scorer", scorer)->required();
  select_app->add_option("--n", n)->check(CLI::PositiveNumber);
  select_app->add_option("--seed", seed);
  select_app->add_option("--workers", workers)->check(CLI::PositiveNumber);
  select_app->add_option("--out", out)->required();
  select_app->add_option("--degenerate", degenerate, "Sidecar for drafts with no surviving candidate");
  select_app->add_flag("--no-raw", no_raw, "Drop unparseable completions instead of keeping raw text");
  select_app->callback([&] { status = select_cmd(drafts, generator, scorer, n, seed, workers, out, degenerate, no_raw); });

  auto* study_app = app.add_subcommand("study", "Annotation campaign");
  study_app->require_subcommand(1);
  std::string triplets, annotators, plan, records, edges, subset = "all";
  int k = 3;
  std::size_t batch = 10;
  auto* assign = study_app->add_subcommand("assign", "Assign triplets to annotators in batches");
  assign->add_option("--triplets", triplets)->required();
  assign->add_option("--annotators", annotators)->required();
  assign->add_option("--k", k);
  assign->add_option("--batch-size", batch);
  assign->add_option("--seed", seed);
  assign->add_option("--out", out)->required();
  assign->callback([&] { status = study_assign(triplets, annotators, k, batch, seed, out); });

  study::ServiceConfig config;
  std::string static_dir;
  auto* serve = study_app->add_subcommand("serve", "Serve the annotation API");
  serve->add_option("--plan", plan)->required();
  serve->add_option("--triplets", triplets)->required();
  serve->add_option("--annotators", annotators)->required();
  serve->add_option("--records", config.log_path, "Append-only record log");
  serve->add_option("--snapshot", config.snapshot_path);
  serve->add_option("--snapshot-every", config.snapshot_every);
  serve->add_option("--host", config.host);
  serve->add_option("--port", config.port);
  serve->add_option("--static", static_dir, "UI assets served at /");
  serve->callback([&] {
    config.static_dir = static_dir;
    status = study_serve(plan, triplets, annotators, config);
  });

  auto* aggregate = study_app->add_subcommand("aggregate", "Majority ranks per triplet and mean ranks");
  aggregate->add_option("--records", records)->required();
  aggregate->add_option("--out", out);
  aggregate->callback([&] { status = study_aggregate(records, out); });

  auto* calibrate = study_app->add_subcommand("calibrate", "Agreement with the scorer by score gap");
  calibrate->add_option("--records", records)->required();
  calibrate->add_option("--triplets", triplets)->required();
  calibrate->add_option("--edges", edges, "Comma-separated bin edges, e.g. 0,0.5,1,2,3,inf");
  calibrate->add_option("--pairs", subset)->check(CLI::IsMember({"all", "best-vs-draft"}));
  calibrate->add_option("--out", out);
  calibrate->callback([&] { status = study_calibrate(records, triplets, edges, subset, out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}
