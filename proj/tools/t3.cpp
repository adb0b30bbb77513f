// t3: train, precompute and serve transformer inspection runs.
//
//   t3 train --config <file> --corpus <jsonl> --out <runs-dir>
//   t3 precompute --run <id> [--runs <dir>]
//   t3 serve --runs <dir> --port <p>
//
// The runs root defaults to $T3_RUNS_ROOT; --out / --runs override it.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "t3/api/server.hpp"
#include "t3/store.hpp"

#include <CLI11.hpp>

namespace {

constexpr const char* kRunsEnv = "T3_RUNS_ROOT";

t3::fs::path runs_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kRunsEnv); env && *env) return env;
  t3::fail(t3::ErrorKind::kConfig, std::string("no runs directory: pass --runs/--out or set ") + kRunsEnv);
}

struct TrainArgs {
  std::string config, corpus, out, run_id;
  bool overwrite = false, precompute = false;
};

struct PrecomputeArgs {
  std::string run, runs;
  std::vector<std::size_t> epochs, layers;
  bool force = false;
};

struct ServeArgs {
  std::string runs, host = "127.0.0.1", static_dir;
  int port = 8080;
  std::size_t live_slots = 2, max_sessions = 256;
  double budget = 5e9, idle_minutes = 30;
};

void precompute_run(const t3::RunData& run, std::vector<std::size_t> epochs, const t3::PrecomputeOptions& opts) {
  if (epochs.empty()) epochs = t3::checkpoint_epochs(run.paths);
  t3::require(!epochs.empty(), t3::ErrorKind::kState, "run '" + run.id + "' has no checkpoints");
  for (auto e : epochs) {
    const auto outcome = t3::precompute_checkpoint(run, e, opts);
    std::cout << "checkpoint " << e << ": "
              << (outcome == t3::PrecomputeOutcome::kWritten ? "written" : "already complete, skipped") << "\n"
              << std::flush;
  }
}

int train(const TrainArgs& a) {
  const t3::RunConfig rc = t3::load_run_config_file(a.config);
  const t3::Corpus corpus = t3::ingest_corpus(a.corpus, rc.labels);
  const auto root = runs_root(a.out);
  const std::string id = a.run_id.empty() ? t3::fs::path(a.config).stem().string() : a.run_id;
  const auto summary = t3::train_to_run(rc, corpus, root, id, a.overwrite);
  std::cout << "run " << summary.run_id << ": " << summary.epochs.size() << " checkpoints in " << summary.dir.string()
            << "\nfinal train accuracy " << summary.final_train_accuracy << "\n"
            << std::flush;
  if (a.precompute) precompute_run(t3::load_run(root, id), {}, {});
  return 0;
}

int precompute(const PrecomputeArgs& a) {
  const t3::RunData run = t3::load_run(runs_root(a.runs), a.run);
  precompute_run(run, a.epochs, {a.force, a.layers});
  return 0;
}

int serve(const ServeArgs& a) {
  // Signals are handled on a dedicated thread so the server can stop cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  t3::api::ServiceOptions opts;
  opts.runs_root = runs_root(a.runs);
  opts.live_slots = a.live_slots;
  opts.max_sessions = a.max_sessions;
  opts.compute_budget = a.budget;
  opts.session_idle = std::chrono::seconds(static_cast<long long>(a.idle_minutes * 60));
  t3::api::Service service(opts);
  std::optional<t3::fs::path> static_dir;
  if (!a.static_dir.empty()) static_dir = a.static_dir;
  t3::api::HttpServer server(service, static_dir);
  const int port = server.bind(a.host, a.port);
  std::cout << "serving " << opts.runs_root.string() << " on http://" << a.host << ":" << port << "\n" << std::flush;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, precompute and serve transformer inspection runs"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* tc = app.add_subcommand("train", "Train a model and write a run directory");
  tc->add_option("--config", ta.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  tc->add_option("--corpus", ta.corpus, "Corpus (JSONL)")->required()->check(CLI::ExistingFile);
  tc->add_option("--out", ta.out, std::string("Runs root (default $") + kRunsEnv + ")");
  tc->add_option("--run-id", ta.run_id, "Run id (default: config file name)");
  tc->add_flag("--overwrite", ta.overwrite, "Replace an existing run directory");
  tc->add_flag("--precompute", ta.precompute, "Precompute every checkpoint after training");

  PrecomputeArgs pa;
  auto* pc = app.add_subcommand("precompute", "Write analysis artifacts for a run's checkpoints");
  pc->add_option("--run", pa.run, "Run id")->required();
  pc->add_option("--runs", pa.runs, std::string("Runs root (default $") + kRunsEnv + ")");
  pc->add_option("--epoch", pa.epochs, "Checkpoint epoch (repeatable; default all)");
  pc->add_option("--layers", pa.layers, "Projection layers, 1-based (default all)")->delimiter(',');
  pc->add_flag("--force", pa.force, "Recompute complete checkpoints");

  ServeArgs sa;
  auto* sc = app.add_subcommand("serve", "Serve the HTTP API");
  sc->add_option("--runs", sa.runs, std::string("Runs root (default $") + kRunsEnv + ")");
  sc->add_option("--port", sa.port, "Port (0 picks a free one)")->capture_default_str()->check(CLI::Range(0, 65535));
  sc->add_option("--host", sa.host, "Bind address")->capture_default_str();
  sc->add_option("--static", sa.static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
  sc->add_option("--live-slots", sa.live_slots, "Concurrent live computations")->capture_default_str();
  sc->add_option("--budget", sa.budget, "Per-request compute budget (estimated flops)")->capture_default_str();
  sc->add_option("--max-sessions", sa.max_sessions, "Session cap (LRU eviction)")->capture_default_str();
  sc->add_option("--session-idle-minutes", sa.idle_minutes, "Idle session timeout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tc) return train(ta);
    if (*pc) return precompute(pa);
    if (*sc) return serve(sa);
  } catch (const t3::Error& e) {
    std::cerr << "t3: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "t3: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
