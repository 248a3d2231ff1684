// upd: train, evaluate, inspect and play against cooperative agents.
#include <pthread.h>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "upd/env/transcript.hpp"
#include "upd/eval/diagnostics.hpp"
#include "upd/eval/evaluate.hpp"
#include "upd/levelgen/level_gen.hpp"
#include "upd/nn/checkpoint.hpp"
#include "upd/play/server.hpp"
#include "upd/trainer/train.hpp"

namespace fs = std::filesystem;
using namespace upd;

namespace {

trainer::TrainConfig build_config(const std::string& mode, const std::string& config_path, bool desk,
                                  std::uint64_t seed, bool seed_given,
                                  const std::vector<std::string>& overrides) {
  trainer::TrainConfig cfg = desk ? trainer::desk_config() : trainer::TrainConfig{};
  if (!config_path.empty()) cfg = trainer::load_config_file(config_path, cfg);
  if (!mode.empty()) cfg.mode = trainer::parse_mode(mode);
  if (seed_given) cfg.seed = seed;
  for (const auto& o : overrides) trainer::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& mode, const std::string& config_path, bool desk,
              std::uint64_t seed, bool seed_given, const std::vector<std::string>& overrides,
              const std::string& out, bool quiet) {
  const trainer::TrainConfig cfg = build_config(mode, config_path, desk, seed, seed_given, overrides);
  const fs::path dir = out.empty() ? fs::path("runs") / (trainer::mode_name(cfg.mode) + "_s" +
                                                         std::to_string(cfg.seed))
                                   : fs::path(out);
  std::cerr << "training " << trainer::mode_name(cfg.mode) << " seed " << cfg.seed << ": "
            << cfg.num_updates() << " updates of " << cfg.steps_per_update() << " steps -> "
            << dir.string() << '\n';
  const nn::Checkpoint ck = trainer::train(cfg, dir, [&](const trainer::UpdateMetrics& m) {
    if (quiet) return;
    std::cerr << std::fixed << std::setprecision(2) << "update " << m.update << " step " << m.step
              << " return " << m.mean_return << " sparse " << m.mean_sparse_return << " entropy "
              << m.ppo.loss.entropy << (m.refreshed ? " [refresh]" : "") << " (" << m.seconds
              << "s)\n";
  });
  std::cout << "checkpoint " << (dir / "final.ckpt").string() << " hash " << nn::checkpoint_hash(ck)
            << '\n';
  return 0;
}

int cmd_eval(const std::vector<std::string>& egos, std::vector<std::string> partners,
             const std::vector<std::string>& layouts, int episodes, std::uint64_t seed,
             int horizon, const std::string& out) {
  if (episodes < 1) throw CLI::ValidationError("--episodes", "must be at least 1");
  if (partners.empty()) partners = eval::default_suite();
  eval::EvalOptions opts;
  opts.episodes = episodes;
  opts.seed = seed;
  opts.horizon = horizon;
  eval::EvalReport report;
  for (const auto& e : egos) {
    auto ego = eval::make_agent(fs::is_regular_file(e) ? "ckpt:" + e : e);
    for (const auto& p : partners) {
      auto partner = eval::make_agent(p);
      for (const auto& l : layouts) {
        const env::LevelPtr level = trainer::resolve_layout(l);
        for (auto& c : eval::evaluate_both_seats(*ego, *partner, level, l, opts))
          report.cells.push_back(std::move(c));
      }
    }
  }
  std::cout << report.to_table();
  if (!out.empty()) {
    std::ofstream(out + ".tsv") << report.to_table();
    std::ofstream(out + ".json") << report.to_json();
  }
  return 0;
}

int cmd_gen_levels(int n, std::uint64_t seed, const std::string& out) {
  const levelgen::LevelGenConfig cfg;
  fs::create_directories(out);
  std::ofstream summary(fs::path(out) / "summary.tsv");
  summary << "seed\tfile\twall_budget\tinterior_walls\tdividing_wall\tside_narrowing\tcoop_solvable\n";
  int solvable = 0;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    const auto g = levelgen::generate_level_info(s, cfg);
    const auto rep = levelgen::analyze_level(g.level);
    const std::string file = "level_" + std::to_string(s) + ".layout";
    env::save_layout_file(g.level, (fs::path(out) / file).string());
    summary << s << '\t' << file << '\t' << g.wall_budget << '\t' << g.interior_walls << '\t'
            << g.dividing_wall << '\t' << g.side_narrowing << '\t' << rep.coop_solvable << '\n';
    solvable += rep.coop_solvable;
  }
  std::cout << n << " levels in " << out << ", " << solvable << " solvable\n";
  return 0;
}

int cmd_diagnose(const std::string& run, const std::string& checkpoint, int partners,
                 std::uint64_t seed) {
  const fs::path dir(run);
  const auto rows = eval::read_curriculum(dir / "metrics.jsonl");
  std::ofstream(dir / "eps_deciles.tsv") << eval::eps_decile_table(rows);
  std::ofstream(dir / "mask_means.tsv") << eval::mask_mean_table(rows);
  std::cout << "wrote eps_deciles.tsv and mask_means.tsv (" << rows.size() << " updates)\n";
  if (!checkpoint.empty()) {
    const trainer::TrainConfig cfg = trainer::load_config_file(dir / "config.cfg");
    const nn::Checkpoint ck = nn::load_checkpoint(checkpoint);
    const auto pts = eval::learnability_scatter(cfg, ck.params, partners, seed);
    const std::string name = "scatter_" + fs::path(checkpoint).stem().string() + ".tsv";
    std::ofstream(dir / name) << eval::scatter_table(pts);
    std::cout << "wrote " << name << ": " << std::setprecision(3)
              << 100.0 * eval::low_return_share(pts, 0.25)
              << "% of partners below a quarter of the best mean return\n";
  }
  return 0;
}

int cmd_play_serve(play::ServerConfig cfg) {
  // Ctrl-C is taken by a waiter thread; server threads inherit the mask.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
  const std::string host = cfg.host;
  play::PlayServer server(std::move(cfg));
  server.start();
  std::thread([&server, sigs] {
    int sig = 0;
    sigwait(&sigs, &sig);
    server.stop();
  }).detach();
  std::cout << "play server on http://" << host << ':' << server.port() << '\n' << std::flush;
  server.wait();
  return 0;
}

int cmd_replay(const std::string& path) {
  const env::Transcript t = env::load_transcript(path);
  const env::ReplayReport r = env::replay(t);
  std::cout << "steps " << t.steps.size() << " logged " << r.logged_return << " recomputed "
            << r.recomputed_return;
  if (r.first_mismatch) std::cout << " first mismatch at step " << *r.first_mismatch;
  std::cout << (r.ok() ? " OK" : " MISMATCH") << '\n';
  return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partner-curriculum training for cooperative gridworld agents"};
  app.require_subcommand(1);

  std::string mode, config_path, out;
  std::uint64_t seed = 0;
  bool desk = false, quiet = false;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "Train an ego agent");
  train->add_option("--mode", mode, "sp, e3t_fixed, upd, dr_dr, cec, sfl_e3t or jupd");
  train->add_option("--config", config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option("--seed", seed, "Run seed");
  train->add_flag("--desk", desk, "Start from the desk-scale profile");
  train->add_option("--set", overrides, "Override, key=value (repeatable)");
  train->add_option("--out", out, "Output directory");
  train->add_flag("--quiet", quiet, "No per-update log");

  std::vector<std::string> egos, partners, layouts{"cramped_room"};
  int episodes = eval::kDefaultEpisodes, horizon = env::kDefaultHorizon;
  std::uint64_t eval_seed = 0;
  std::string eval_out;
  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints against partners");
  ev->add_option("--ego", egos, "Checkpoint path or agent descriptor (repeatable)")->required();
  ev->add_option("--partner", partners, "Partner descriptor (repeatable; default: scripted suite)");
  ev->add_option("--layout", layouts, "Layout name or file (repeatable)");
  ev->add_option("--episodes", episodes, "Episodes per seat");
  ev->add_option("--horizon", horizon, "Episode length");
  ev->add_option("--seed", eval_seed, "Evaluation seed");
  ev->add_option("--out", eval_out, "Write <out>.tsv and <out>.json");

  int n_levels = 100;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "levels";
  auto* gen = app.add_subcommand("gen-levels", "Dump generated 5x5 levels");
  gen->add_option("-n,--count", n_levels, "Number of levels")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "First seed");
  gen->add_option("--out", gen_out, "Output directory");

  std::string run_dir, diag_ckpt;
  int diag_partners = 8192;
  std::uint64_t diag_seed = 0;
  auto* diag = app.add_subcommand("diagnose", "Curriculum tables and learnability scatter");
  diag->add_option("--run", run_dir, "Training output directory")->required()->check(CLI::ExistingDirectory);
  diag->add_option("--checkpoint", diag_ckpt, "Checkpoint for the scatter")->check(CLI::ExistingFile);
  diag->add_option("--partners", diag_partners, "Fresh partners to score")->check(CLI::PositiveNumber);
  diag->add_option("--seed", diag_seed, "Scatter seed");

  play::ServerConfig sc;
  std::string static_dir = "web", ckpt_dir, transcripts = "transcripts", default_ckpt;
  auto* serve = app.add_subcommand("play-serve", "Serve live human-agent sessions");
  serve->add_option("--host", sc.host, "Bind address");
  serve->add_option("--port", sc.port, "Port (0 picks one)");
  serve->add_option("--static", static_dir, "Client asset directory");
  serve->add_option("--checkpoint-dir", ckpt_dir, "Directory of selectable checkpoints");
  serve->add_option("--checkpoint", default_ckpt, "Default checkpoint");
  serve->add_option("--transcripts", transcripts, "Where finished sessions are saved");
  serve->add_option("--tick", sc.default_tick_ms, "Default tick in ms (0: turn-based)");

  std::string transcript_path;
  auto* rep = app.add_subcommand("replay", "Re-simulate a transcript and check its returns");
  rep->add_option("transcript", transcript_path, "Transcript file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(mode, config_path, desk, seed, seed_opt->count() > 0, overrides, out, quiet);
    if (*ev) return cmd_eval(egos, partners, layouts, episodes, eval_seed, horizon, eval_out);
    if (*gen) return cmd_gen_levels(n_levels, gen_seed, gen_out);
    if (*diag) return cmd_diagnose(run_dir, diag_ckpt, diag_partners, diag_seed);
    if (*serve) {
      sc.static_dir = static_dir;
      sc.checkpoint_dir = ckpt_dir;
      sc.transcript_dir = transcripts;
      sc.default_checkpoint = default_ckpt;
      return cmd_play_serve(sc);
    }
    if (*rep) return cmd_replay(transcript_path);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
