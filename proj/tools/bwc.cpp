// SPDX-License-Identifier: Apache-2.0
//
// bwc: operator command line for the footage analysis pipeline.
//
// Exit codes: 0 success, 1 internal error, 2 usage or validation error
// (including unpaired quality corpora).

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "bwc/config.hpp"
#include "bwc/corpus.hpp"
#include "bwc/ensemble.hpp"
#include "bwc/error.hpp"
#include "bwc/http_server.hpp"
#include "bwc/pipeline.hpp"
#include "bwc/quality.hpp"
#include "bwc/review_service.hpp"
#include "bwc/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

int exit_code_for(bwc::Errc code) {
  switch (code) {
    case bwc::Errc::invalid_argument:
    case bwc::Errc::pairing:
    case bwc::Errc::malformed_filter:
    case bwc::Errc::empty_dataset:
    case bwc::Errc::no_dictionary:
    case bwc::Errc::degenerate_labels:
    case bwc::Errc::unknown_stage: return kExitUsage;
    default: return kExitInternal;
  }
}

// Config file (optional), then $BWC_STORE, then an explicit --store flag.
bwc::RunConfig resolve_config(const std::string& config_path, const std::string& store_flag) {
  bwc::RunConfig config = config_path.empty() ? bwc::RunConfig{} : bwc::load_config(config_path);
  bwc::apply_environment(config);
  if (!store_flag.empty()) config.store_path = store_flag;
  return config;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bwc::Error(bwc::Errc::io, "cannot write " + path.string());
  out << text;
}

struct Options {
  std::string config;
  std::string store;
  std::string root;
  std::string out;
  std::size_t parallelism = 0;
  std::optional<double> chunk_len;
  std::optional<double> overlap;
  std::string report;

  std::string corpus_a, corpus_b, dict;
  std::string name_a = "model_a", name_b = "model_b";
  std::string counting = "unique";
  std::size_t threshold = bwc::quality::kDefaultRepeatThreshold;

  std::string manifest;
  bool json_output = false;

  std::string examples;
  double grid_step = 0.1;
  std::size_t fusion_length = 8;

  std::string bind = "127.0.0.1:8080";
};

int cmd_ingest(const Options& o) {
  const auto manifest = bwc::scan_dataset(o.root, std::max<std::size_t>(o.parallelism, 1));
  if (!o.out.empty()) {
    bwc::save_manifest(o.out, manifest);
  } else {
    bwc::write_manifest(std::cout, manifest);
  }
  if (!o.store.empty() || std::getenv(bwc::kStoreEnvVar) != nullptr) {
    const auto config = resolve_config({}, o.store);
    bwc::store::Store store(config.store_path);
    for (const auto& asset : manifest) store.put_asset(asset);
  }
  std::size_t flagged = 0;
  for (const auto& a : manifest) flagged += a.flagged() ? 1 : 0;
  std::cerr << manifest.size() << " assets (" << flagged << " flagged)\n";
  return kExitOk;
}

int cmd_run(const Options& o) {
  auto config = resolve_config(o.config, o.store);
  if (!o.root.empty()) config.dataset_root = o.root;
  if (o.parallelism > 0) config.parallelism = o.parallelism;
  if (o.chunk_len) config.chunk_len = *o.chunk_len;
  if (o.overlap) config.overlap = *o.overlap;
  if (config.transcription.sidecar_root.empty()) config.transcription.sidecar_root = config.dataset_root;
  bwc::validate(config);

  bwc::store::Store store(config.store_path);
  const auto report = bwc::run_pipeline(config, store);
  const auto text = bwc::to_json(report).dump(2);
  if (!o.report.empty()) write_file(o.report, text + "\n");
  std::cout << text << "\n";
  return kExitOk;
}

int cmd_quality_compare(const Options& o) {
  bwc::quality::CompareOptions options;
  options.model_a_name = o.name_a;
  options.model_b_name = o.name_b;
  options.repeat_threshold = o.threshold;
  options.counting =
      o.counting == "tokens" ? bwc::quality::GapCounting::tokens : bwc::quality::GapCounting::unique_types;
  options.parallelism = std::max<std::size_t>(o.parallelism, 1);

  const auto dictionary = bwc::quality::Dictionary::load(o.dict);
  const auto a = bwc::quality::load_corpus(o.corpus_a);
  const auto b = bwc::quality::load_corpus(o.corpus_b);
  const auto report = bwc::quality::compare_models(a, b, dictionary, options);
  const auto doc = bwc::quality::report_to_json(report);

  write_file(o.out + ".json", doc.dump(2) + "\n");
  write_file(o.out + ".tsv", bwc::quality::plot_table(report));
  if (!o.store.empty() || std::getenv(bwc::kStoreEnvVar) != nullptr) {
    const auto config = resolve_config({}, o.store);
    bwc::store::Store store(config.store_path);
    store.put_document(bwc::kQualityReportDocument, doc);
  }
  std::cout << bwc::quality::plot_table(report);
  return kExitOk;
}

int cmd_stats(const Options& o) {
  bwc::Manifest manifest;
  if (!o.manifest.empty()) {
    manifest = bwc::load_manifest(o.manifest);
  } else if (!o.root.empty()) {
    manifest = bwc::scan_dataset(o.root, std::max<std::size_t>(o.parallelism, 1));
  } else {
    throw bwc::Error(bwc::Errc::invalid_argument, "stats needs --manifest or --root");
  }
  const auto summary = bwc::dataset_stats(manifest);
  if (o.json_output) {
    std::cout << json{{"total_videos", summary.total_videos},
                      {"shortest_s", summary.shortest},
                      {"longest_s", summary.longest},
                      {"mean_length_s", summary.mean_length},
                      {"total_time_s", summary.total_time}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << bwc::format_summary_table(summary);
  }
  return kExitOk;
}

int cmd_calibrate(const Options& o) {
  const auto examples = bwc::ensemble::load_labeled_examples(o.examples);
  if (examples.empty()) throw bwc::Error(bwc::Errc::invalid_argument, "no labeled examples");
  bwc::ensemble::FusionConfig fusion;
  fusion.length = o.fusion_length;
  const auto result =
      bwc::ensemble::calibrate(examples, o.grid_step, fusion, std::max<std::size_t>(o.parallelism, 1));
  std::cout << json{{"alpha", result.weights.alpha},
                    {"beta", result.weights.beta},
                    {"gamma", result.weights.gamma},
                    {"correct", result.correct},
                    {"total", result.total},
                    {"accuracy", result.accuracy()},
                    {"grid_points", result.grid_points}}
                   .dump(2)
            << "\n";
  return kExitOk;
}

int cmd_serve(const Options& o) {
  const auto config = resolve_config(o.config, o.store);
  const auto colon = o.bind.rfind(':');
  if (colon == std::string::npos) throw bwc::Error(bwc::Errc::invalid_argument, "--bind must be host:port");
  const std::string host = o.bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(o.bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw bwc::Error(bwc::Errc::invalid_argument, "--bind port is not a number");
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  bwc::store::Store store(config.store_path);
  bwc::ReviewService service(store, config);
  bwc::ReviewServer server(service);
  const int bound = server.bind(host, port);
  std::cout << "listening on " << host << ":" << bound << std::endl;

  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  kill(getpid(), SIGTERM);  // releases the waiter when listen() ended on its own
  return kExitOk;
}

int cmd_export(const Options& o) {
  const auto config = resolve_config(o.config, o.store);
  if (!fs::exists(config.store_path))
    throw bwc::Error(bwc::Errc::invalid_argument, "no store at " + config.store_path.string());
  bwc::store::Store store(config.store_path);
  if (o.out.empty()) {
    store.export_records(std::cout);
  } else {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw bwc::Error(bwc::Errc::io, "cannot write " + o.out);
    store.export_records(out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Body-worn camera footage analysis pipeline"};
  app.require_subcommand(1);
  Options o;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* ingest = app.add_subcommand("ingest", "Scan a dataset directory and write its manifest");
  ingest->add_option("--root", o.root, "Dataset root")->required();
  ingest->add_option("--out", o.out, "Manifest file (default: stdout)");
  ingest->add_option("--store", o.store, "Also register assets in this store");
  ingest->add_option("--parallelism", o.parallelism, "Probe threads");

  auto* run = app.add_subcommand("run", "Run the full analysis pipeline");
  run->add_option("--config", o.config, "YAML run configuration")->check(CLI::ExistingFile);
  run->add_option("--root", o.root, "Dataset root (overrides config)");
  run->add_option("--store", o.store, "Store path (overrides config and $BWC_STORE)");
  run->add_option("--parallelism", o.parallelism, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--chunk-len", o.chunk_len, "Chunk length in seconds");
  run->add_option("--overlap", o.overlap, "Chunk overlap in seconds");
  run->add_option("--report", o.report, "Also write the run report here");

  auto* quality = app.add_subcommand("quality", "Transcript quality evaluation");
  quality->require_subcommand(1);
  auto* compare = quality->add_subcommand("compare", "Compare two transcription models");
  compare->add_option("--corpus-a", o.corpus_a, "Directory of model A transcripts (*.txt)")->required();
  compare->add_option("--corpus-b", o.corpus_b, "Directory of model B transcripts (*.txt)")->required();
  compare->add_option("--dict", o.dict, "Word list, one word per line")->required();
  compare->add_option("--out", o.out, "Output prefix for <out>.json and <out>.tsv")->required();
  compare->add_option("--name-a", o.name_a, "Model A name");
  compare->add_option("--name-b", o.name_b, "Model B name");
  compare->add_option("--counting", o.counting, "Coverage gap counting")
      ->check(CLI::IsMember({"unique", "tokens"}));
  compare->add_option("--threshold", o.threshold, "Repeated-line threshold")->check(CLI::Range(2, 1 << 30));
  compare->add_option("--store", o.store, "Also save the report in this store");
  compare->add_option("--parallelism", o.parallelism, "Worker threads");

  auto* stats = app.add_subcommand("stats", "Dataset summary table");
  stats->add_option("--manifest", o.manifest, "Manifest file")->check(CLI::ExistingFile);
  stats->add_option("--root", o.root, "Scan this directory instead");
  stats->add_flag("--json", o.json_output, "Emit JSON");

  auto* calibrate = app.add_subcommand("calibrate", "Grid-search the ensemble weights");
  calibrate->add_option("--examples", o.examples, "Labeled examples (JSONL)")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--grid-step", o.grid_step, "Simplex grid step");
  calibrate->add_option("--fusion-length", o.fusion_length, "Common fusion vector length");
  calibrate->add_option("--parallelism", o.parallelism, "Worker threads");

  auto* serve = app.add_subcommand("serve", "Serve the /v1 review API");
  serve->add_option("--config", o.config, "YAML run configuration")->check(CLI::ExistingFile);
  serve->add_option("--store", o.store, "Store path");
  serve->add_option("--bind", o.bind, "host:port (port 0 picks one)");

  auto* exp = app.add_subcommand("export", "Write all incident records as JSON lines");
  exp->add_option("--config", o.config, "YAML run configuration")->check(CLI::ExistingFile);
  exp->add_option("--store", o.store, "Store path");
  exp->add_option("--out", o.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("bwc"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*ingest) return cmd_ingest(o);
    if (*run) return cmd_run(o);
    if (*compare) return cmd_quality_compare(o);
    if (*stats) return cmd_stats(o);
    if (*calibrate) return cmd_calibrate(o);
    if (*serve) return cmd_serve(o);
    if (*exp) return cmd_export(o);
  } catch (const bwc::Error& e) {
    std::cerr << "bwc: " << bwc::to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "bwc: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
