// Command-line front end. Exit codes: 0 success, 1 I/O or format failure,
// 2 usage or configuration error, 3 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "seqdiff/data/container.hpp"
#include "seqdiff/harness/experiments.hpp"
#include "seqdiff/harness/figures.hpp"
#include "seqdiff/io/binary.hpp"

using namespace seqdiff;
using namespace seqdiff::harness;

namespace {

struct ConfigFlags {
  std::string preset;
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--preset", f.preset, "Start from the defaults of a generator (bouncing, speaker, physio, correlated)");
  cmd->add_option("--config", f.config_file, "Config file to start from");
  cmd->add_option("--set", f.overrides, "Override one key, as key=value (repeatable)");
}

ExperimentConfig build_config(const ConfigFlags& f, const std::string& fallback_preset) {
  if (!f.preset.empty() && !f.config_file.empty()) throw ConfigError("--preset and --config are exclusive");
  ExperimentConfig cfg = !f.config_file.empty() ? ExperimentConfig::load(f.config_file)
                                                : preset(f.preset.empty() ? fallback_preset : f.preset);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void update_report(const RunDir& run, const std::string& section, const eval::MetricsReport& r,
                   const ExperimentConfig& cfg) {
  eval::MetricsReport all;
  if (std::filesystem::exists(run.report_path())) all = eval::MetricsReport::load(run.report_path());
  all.set_text("meta.seed", std::to_string(cfg.seed));
  all.set_text("meta.config_hash", cfg.hash());
  all.erase_prefix(section);
  all.merge(section, r);
  all.save(run.report_path());
}

void print_report(const eval::MetricsReport& r) {
  for (const auto& [k, v] : r.entries()) std::printf("  %-32s %s\n", k.c_str(), v.c_str());
}

Checkpoint load_run(const RunDir& run) {
  if (!run.exists()) throw ConfigError("no run at " + run.root + " (run `train` first)");
  return load_checkpoint(run.checkpoint_path());
}

data::SequenceBatch load_or_generate(const std::string& file, const data::SequenceBatch& generated) {
  if (file.empty()) return generated;
  return data::load_dataset(file);
}

std::vector<double> default_alphas(double kappa) { return {-kappa, -kappa / 2, 0.0, kappa / 2, kappa}; }

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential diffusion autoencoder: training, swaps, traversals and evaluation on synthetic data"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every verb");

  std::string run_path, data_file, test_file, out_file, generator = "bouncing", mode;
  std::size_t count = 8, frames = 8, seeds = 5, components = 3, log_every = 500;
  std::uint64_t seed = 0, world_seed = 0;
  std::vector<double> alphas;
  std::vector<std::size_t> ks{2, 16};
  ConfigFlags cf;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset file");
  gen->add_option("--generator", generator, "bouncing, speaker, physio or correlated")->required();
  gen->add_option("--count", count, "Number of sequences")->required();
  gen->add_option("--frames", frames, "Frames per sequence");
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--world-seed", world_seed, "Seed of the fixed per-generator world");
  gen->add_option("--out", out_file, "Output file")->required();

  auto* train = app.add_subcommand("train", "Train the encoder and denoiser jointly");
  train->add_option("--run", run_path, "Run directory")->required();
  add_config_flags(train, cf);
  train->add_option("--data", data_file, "Training dataset file (default: generated from the config)");
  train->add_option("--log-every", log_every, "Print the mean loss every N steps (0: silent)");

  auto* tprior = app.add_subcommand("train-prior", "Train the latent prior of a trained run");
  tprior->add_option("--run", run_path, "Run directory")->required();
  tprior->add_option("--data", data_file, "Training dataset file (default: generated from the config)");
  tprior->add_option("--log-every", log_every, "Print the mean loss every N iterations (0: silent)");

  auto* recon = app.add_subcommand("reconstruct", "Reconstruct test sequences through the stochastic encoding");
  recon->add_option("--run", run_path, "Run directory")->required();
  recon->add_option("--count", count, "Sequences drawn in the figure");
  recon->add_option("--test-data", test_file, "Test dataset file (default: generated from the config)");

  auto* swap = app.add_subcommand("swap", "Conditional swap on the fixed pair list");
  swap->add_option("--run", run_path, "Run directory")->required();
  swap->add_option("--mode", mode, "Stochastic encoding under own, swapped or none (default: config)");
  swap->add_option("--count", count, "Pairs drawn in the figure");
  swap->add_option("--test-data", test_file, "Test dataset file (default: generated from the config)");

  auto* sample = app.add_subcommand("sample", "Generate sequences from the latent prior");
  sample->add_option("--run", run_path, "Run directory")->required();
  sample->add_option("--count", count, "Number of sequences");
  sample->add_option("--seed", seed, "Sampling seed");

  auto* trav = app.add_subcommand("traverse", "Edit the static code along principal directions");
  trav->add_option("--run", run_path, "Run directory")->required();
  trav->add_option("--components", components, "Number of directions");
  trav->add_option("--alphas", alphas, "Edit strengths (default: -kappa, -kappa/2, 0, kappa/2, kappa)");

  auto* ev = app.add_subcommand("eval", "Reconstruction, swap, verification and probe metrics");
  ev->add_option("--run", run_path, "Run directory")->required();
  ev->add_option("--out", out_file, "Also write the evaluation report to this file");
  ev->add_option("--test-data", test_file, "Test dataset file (default: generated from the config)");

  auto* cmp = app.add_subcommand("compare-priors", "Joint versus factorized latent prior on correlated factors");
  cmp->add_option("--run", run_path, "Run directory (created)")->required();
  add_config_flags(cmp, cf);
  cmp->add_option("--seeds", seeds, "Number of seeds");

  auto* abl = app.add_subcommand("ablate", "Train the share_static x dynamic_dim grid and score swaps");
  abl->add_option("--run", run_path, "Run directory (created)")->required();
  add_config_flags(abl, cf);
  abl->add_option("--k", ks, "Dynamic dimensions to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const RunDir run(run_path);
  Timer timer;
  try {
    if (gen->parsed()) {
      const auto b = data::generate(generator, count, frames, seed, data::WorldParams{world_seed});
      data::save_dataset(b, out_file);
      std::printf("wrote %zu %s sequences of %zu frames to %s\n", count, generator.c_str(), frames, out_file.c_str());
    } else if (train->parsed()) {
      const auto cfg = build_config(cf, "bouncing");
      run.create();
      cfg.save(run.config_path());
      const auto d = make_datasets(cfg);
      const auto train_set = load_or_generate(data_file, d.train);
      double acc = 0;
      std::size_t n = 0;
      auto ck = train_model(cfg, train_set, [&](std::size_t step, double loss) {
        acc += loss;
        ++n;
        if (log_every > 0 && step % log_every == 0) {
          std::printf("step %zu  loss %.4f  %.1fs\n", step, acc / n, timer.seconds());
          std::fflush(stdout);
          acc = 0;
          n = 0;
        }
      });
      save_checkpoint(ck, run.checkpoint_path());
      write_line_plot(run.figure_path("loss.pgm"), {ck.state.losses});
      eval::write_csv(run.figure_path("loss.csv"), {"loss"}, [&] {
        std::vector<std::vector<double>> rows;
        for (const double l : ck.state.losses) rows.push_back({l});
        return rows;
      }());
      eval::MetricsReport r;
      r.set("steps", static_cast<double>(ck.state.step));
      r.set("final_loss", ck.state.losses.empty() ? 0.0 : ck.state.losses.back());
      r.set("parameters", static_cast<double>(ck.model->params().scalar_count()));
      update_report(run, "train", r, cfg);
      std::printf("trained %zu steps in %.1fs; checkpoint %s\n", ck.state.step, timer.seconds(),
                  run.checkpoint_path().c_str());
    } else if (tprior->parsed()) {
      auto ck = load_run(run);
      const auto d = make_datasets(ck.config());
      double acc = 0;
      std::size_t n = 0;
      train_prior(ck, load_or_generate(data_file, d.train), [&](std::size_t it, double loss) {
        acc += loss;
        ++n;
        if (log_every > 0 && it % log_every == 0) {
          std::printf("iteration %zu  loss %.4f\n", it, acc / n);
          acc = 0;
          n = 0;
        }
      });
      save_checkpoint(ck, run.checkpoint_path());
      write_line_plot(run.figure_path("prior_loss.pgm"), {ck.prior->losses});
      eval::MetricsReport r;
      r.set("iterations", static_cast<double>(ck.prior->losses.size()));
      r.set("final_loss", ck.prior->losses.empty() ? 0.0 : ck.prior->losses.back());
      update_report(run, "prior", r, ck.config());
      std::printf("trained latent prior in %.1fs\n", timer.seconds());
    } else if (recon->parsed()) {
      const auto ck = load_run(run);
      const auto d = make_datasets(ck.config());
      const auto test = load_or_generate(test_file, d.test);
      const auto rec = reconstruct_batch(ck, test, swap_seed(ck.config()));
      const std::size_t v = test.length, m = std::min(count, test.count);
      Tensor<double> grid(2 * m * v, test.shape.dim());
      const auto in_raw = to_raw(ck, rec.input), out_raw = to_raw(ck, rec.output);
      for (std::size_t i = 0; i < m; ++i) {
        std::copy(in_raw.row(i * v), in_raw.row((i + 1) * v), grid.row(2 * i * v));
        std::copy(out_raw.row(i * v), out_raw.row((i + 1) * v), grid.row((2 * i + 1) * v));
      }
      const auto fig = write_frames_figure(run.figure_path("reconstruct"), grid, v, test.shape);
      eval::MetricsReport r;
      r.set("mse", rec.mse);
      update_report(run, "recon", r, ck.config());
      print_report(r);
      std::printf("figure %s\n", fig.c_str());
    } else if (swap->parsed()) {
      const auto ck = load_run(run);
      const auto& cfg = ck.config();
      std::optional<sampler::SwapEncoding> m;
      if (!mode.empty()) m = sampler::parse_swap_encoding(mode);
      const auto d = make_datasets(cfg);
      const auto test = load_or_generate(test_file, d.test);
      const auto s = swap_experiment(ck, test, m);
      const auto pairs = eval::make_pair_list(test.require_labels(), cfg.eval.pairs, cfg.eval.pair_seed);
      pairs.save(run.figure_path("pairs.txt"));
      const std::size_t v = test.length, shown = std::min(count, pairs.pairs.size());
      std::vector<std::size_t> a_idx, b_idx;
      for (std::size_t i = 0; i < shown; ++i) {
        a_idx.push_back(pairs.pairs[i].static_src);
        b_idx.push_back(pairs.pairs[i].dyn_src);
      }
      const auto a = test.select(a_idx), b = test.select(b_idx);
      const auto out = swap_function(ck, v, swap_seed(cfg), m)(a.frames, b.frames);
      Tensor<double> grid(3 * shown * v, test.shape.dim());
      for (std::size_t i = 0; i < shown; ++i) {
        std::copy(a.frames.row(i * v), a.frames.row((i + 1) * v), grid.row(3 * i * v));
        std::copy(b.frames.row(i * v), b.frames.row((i + 1) * v), grid.row((3 * i + 1) * v));
        std::copy(out.row(i * v), out.row((i + 1) * v), grid.row((3 * i + 2) * v));
      }
      const auto fig = write_frames_figure(run.figure_path("swap"), grid, v, test.shape);
      auto r = s.report();
      r.set_text("mode", sampler::to_string(m.value_or(cfg.sampler.swap_encoding)));
      update_report(run, "swap", r, cfg);
      print_report(r);
      std::printf("figure %s (rows: static source, dynamics source, output)\n", fig.c_str());
    } else if (sample->parsed()) {
      const auto ck = load_run(run);
      const auto x = sample_sequences(ck, count, seed);
      const auto fig = write_frames_figure(run.figure_path("samples"), x, ck.config().data.frames, ck.model->frame());
      std::printf("figure %s\n", fig.c_str());
    } else if (trav->parsed()) {
      const auto ck = load_run(run);
      const auto& cfg = ck.config();
      if (alphas.empty()) alphas = default_alphas(cfg.eval.kappa);
      const auto t = traverse_experiment(ck, make_datasets(cfg), components, alphas);
      eval::MetricsReport r;
      r.set("alpha_zero_error", t.alpha_zero_error);
      r.set("affinity_error", t.affinity_error);
      for (std::size_t i = 0; i < t.components; ++i) r.set("explained" + std::to_string(i), t.spec.explained[i]);
      r.set("clamped_dims", static_cast<double>(t.spec.clamped.size()));
      update_report(run, "traverse", r, cfg);
      print_report(r);
      const auto fig = write_frames_figure(run.figure_path("traverse"), t.frames, cfg.data.frames, ck.model->frame());
      std::printf("figure %s (rows: component-major, alphas in order)\n", fig.c_str());
    } else if (ev->parsed()) {
      const auto ck = load_run(run);
      auto d = make_datasets(ck.config());
      if (!test_file.empty()) d.test = data::load_dataset(test_file);
      const auto r = eval_experiment(ck, d);
      update_report(run, "eval", r, ck.config());
      if (!out_file.empty()) r.save(out_file);
      print_report(r);
    } else if (cmp->parsed()) {
      const auto cfg = build_config(cf, "correlated");
      run.create();
      cfg.save(run.config_path());
      const auto pc = compare_priors(cfg, seeds);
      const auto r = pc.report();
      update_report(run, "compare_priors", r, cfg);
      print_report(r);
    } else if (abl->parsed()) {
      const auto cfg = build_config(cf, "speaker");
      run.create();
      cfg.save(run.config_path());
      const auto cells = ablate(cfg, ks, [&](const AblationCell& c) {
        std::printf("share_static=%d k=%zu  static_acc %.3f  dynamic_r %.3f  (%.1fs)\n", c.share_static ? 1 : 0,
                    c.dynamic_dim, c.scores.static_accuracy, c.scores.dynamic_r, timer.seconds());
        std::fflush(stdout);
      });
      const auto r = ablation_report(cells);
      std::vector<std::vector<double>> rows;
      for (const auto& c : cells) {
        rows.push_back({c.share_static ? 1.0 : 0.0, static_cast<double>(c.dynamic_dim), c.scores.static_accuracy,
                        c.scores.dynamic_r, c.combined});
      }
      eval::write_csv(run.figure_path("ablation.csv"), {"share_static", "k", "static_accuracy", "dynamic_r", "combined"},
                      rows);
      update_report(run, "ablate", r, cfg);
      print_report(r);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
