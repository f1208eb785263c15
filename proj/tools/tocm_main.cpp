// tocm - train and inspect the collective world model and its PPO agents.
//
// Subcommands: train, eval, predict, transfer, compare-runs.
// Exit code 0 on success; any failure prints one "error: ..." line.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tocm/checkpoint.hpp"
#include "tocm/config.hpp"
#include "tocm/trainer.hpp"

namespace fs = std::filesystem;
using namespace tocm;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  std::string actor;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_out_dir = true) {
  cmd->add_option("--config", opts.config_path, "configuration file");
  if (with_out_dir)
    cmd->add_option("--out-dir", opts.out_dir, "run directory")->envname("TOCM_RUN_DIR");
  cmd->add_option("--override", opts.overrides, "section.key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "root seed (shorthand for train.seed)");
  cmd->add_option("--actor", opts.actor, "actor kind: dense | spiking")
      ->check(CLI::IsMember({"dense", "spiking"}));
}

TrainConfig build_config(const CommonOpts& opts) {
  TrainConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  for (const auto& o : opts.overrides) apply_override(cfg, o);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.actor.empty()) cfg.actor = opts.actor;
  return cfg;
}

std::string require_out_dir(const CommonOpts& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  throw std::invalid_argument("missing --out-dir (or TOCM_RUN_DIR)");
}

// Loads the run configuration stored next to a checkpoint.
TrainConfig config_for_checkpoint(const std::string& ckpt, const CommonOpts& opts) {
  if (!opts.config_path.empty()) return build_config(opts);
  const auto sidecar = fs::path(ckpt).parent_path() / "config.cfg";
  if (!fs::exists(sidecar))
    throw std::runtime_error("no config.cfg next to checkpoint; pass --config");
  CommonOpts with_cfg = opts;
  with_cfg.config_path = sidecar.string();
  return build_config(with_cfg);
}

void print_iteration(const IterationMetrics& m) {
  std::printf("iter %d  env_steps %lld  reward %.3f  model %.4f (obs %.4f rew %.4f act %.4f "
              "kl %.4f)  entropy %.3f\n",
              m.iteration, m.env_steps, m.episode_reward_mean, m.total_model_loss, m.obs_loss,
              m.rew_loss, m.act_loss, m.kl_loss, m.entropy);
  std::fflush(stdout);
}

int cmd_train(const CommonOpts& opts, const std::string& transfer_source) {
  auto cfg = build_config(opts);
  validate_config(cfg);
  RunArtifacts artifacts(require_out_dir(opts));
  std::optional<std::string> source;
  if (!transfer_source.empty()) source = transfer_source;
  auto result = run_training(cfg, artifacts, source, print_iteration);
  std::printf("done: %d iterations, %lld env steps, final reward %.3f\n", result.iterations,
              result.env_steps, result.final_reward_mean);
  std::printf("artifacts: %s\n", artifacts.dir().c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt, int episodes, const std::string& mode,
             const CommonOpts& opts) {
  if (episodes <= 0) throw std::invalid_argument("--episodes must be positive");
  if (mode != "greedy" && mode != "sample")
    throw std::invalid_argument("--mode must be greedy or sample");
  auto cfg = config_for_checkpoint(ckpt, opts);
  validate_config(cfg);
  Trainer trainer(cfg);
  trainer.restore(load_checkpoint(ckpt));
  const uint64_t seed = uint64_t(opts.seed.value_or(cfg.seed + 1));
  auto totals = trainer.evaluate(episodes, mode == "greedy", seed);

  double mean = 0;
  for (float r : totals) mean += r;
  mean /= totals.size();
  double var = 0;
  for (float r : totals) var += (r - mean) * (r - mean);
  const double stddev = std::sqrt(var / totals.size());
  std::printf("eval: episodes=%d mode=%s mean=%.4f stddev=%.4f\n", episodes, mode.c_str(), mean,
              stddev);

  const std::string out_dir =
      opts.out_dir.empty() ? fs::path(ckpt).parent_path().string() : opts.out_dir;
  fs::create_directories(out_dir);
  std::ofstream out(out_dir + "/eval_summary.csv");
  out << "episodes,mode,mean,stddev\n"
      << episodes << ',' << mode << ',' << mean << ',' << stddev << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt, uint64_t seed, int prefix, std::string out_path,
                const CommonOpts& opts) {
  auto cfg = config_for_checkpoint(ckpt, opts);
  validate_config(cfg);
  if (prefix < 1 || prefix >= cfg.max_steps)
    throw std::invalid_argument("--prefix must lie in [1, " + std::to_string(cfg.max_steps - 1) +
                                "]");
  Trainer trainer(cfg);
  trainer.restore(load_checkpoint(ckpt));

  auto ep = trainer.rollout_episode(seed);
  std::vector<std::vector<std::vector<float>>> obs;
  std::vector<std::vector<int>> actions;
  for (int t = 0; t < ep.steps; ++t) obs.push_back(ep.obs_rows(t));
  for (int t = 0; t + 1 < ep.steps; ++t) actions.push_back(ep.joint_action(t));
  auto pred = open_loop_predict(trainer.world_model(), obs, actions, prefix, ep.n_agents);

  if (out_path.empty())
    out_path = (fs::path(ckpt).parent_path() / ("prediction_" + std::to_string(seed) + ".csv"))
                   .string();
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "agent,t,dim,real,predicted\n";
  for (int i = 0; i < ep.n_agents; ++i)
    for (int t = 0; t < ep.steps; ++t) {
      auto real = ep.obs_at(t, i);
      for (int d = 0; d < ep.d_obs; ++d)
        out << i << ',' << t << ',' << d << ',' << real[d] << ',' << pred[i][t][d] << "\n";
    }
  std::printf("prediction trace: %s (%d agents x %d steps x %d dims, prefix %d)\n",
              out_path.c_str(), ep.n_agents, ep.steps, ep.d_obs, prefix);
  return 0;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return int(i);
    throw std::invalid_argument("metric '" + name + "' not found in CSV");
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

int cmd_compare(const std::string& run_a, const std::string& run_b, const std::string& metric,
                double threshold, const std::string& out_path) {
  auto report = [&](const std::string& path) {
    auto t = read_csv(path);
    const int mcol = t.col(metric);
    const int icol = t.col("iteration");
    const int scol = t.col("env_steps");
    double final_v = t.rows.empty() ? 0.0 : t.rows.back()[mcol];
    long long iters_to = -1, steps_to = -1;
    for (const auto& row : t.rows)
      if (row[mcol] <= threshold) {
        iters_to = (long long)(row[icol]);
        steps_to = (long long)(row[scol]);
        break;
      }
    return std::tuple<double, long long, long long, size_t>(final_v, iters_to, steps_to,
                                                            t.rows.size());
  };
  auto [fa, ia, sa, na] = report(run_a);
  auto [fb, ib, sb, nb] = report(run_b);
  std::printf("run A: %s\n  rows=%zu final_%s=%.6g iterations_to_%.4g=%lld env_steps_to=%lld\n",
              run_a.c_str(), na, metric.c_str(), fa, threshold, ia, sa);
  std::printf("run B: %s\n  rows=%zu final_%s=%.6g iterations_to_%.4g=%lld env_steps_to=%lld\n",
              run_b.c_str(), nb, metric.c_str(), fb, threshold, ib, sb);
  if (ia > 0 && ib > 0)
    std::printf("iterations ratio A/B = %.3f\n", double(ia) / double(ib));
  else
    std::printf("iterations ratio A/B = n/a (threshold not reached by both)\n");
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << "run,final_" << metric << ",iterations_to_threshold,env_steps_to_threshold\n"
        << "A," << fa << ',' << ia << ',' << sa << "\n"
        << "B," << fb << ',' << ib << ',' << sb << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collective world model training for particle tasks"};
  app.require_subcommand(0, 1);
  bool show_reference = false;
  app.add_flag("--config-reference", show_reference,
               "print every configuration key with its default and exit");

  CommonOpts train_opts;
  auto* train = app.add_subcommand("train", "train world model and policies");
  add_common(train, train_opts);

  std::string eval_ckpt, eval_mode = "greedy";
  int eval_episodes = 100;
  CommonOpts eval_opts;
  auto* eval = app.add_subcommand("eval", "run evaluation episodes from a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--episodes", eval_episodes, "number of evaluation episodes");
  eval->add_option("--mode", eval_mode, "greedy | sample");
  add_common(eval, eval_opts);

  std::string pred_ckpt, pred_out;
  uint64_t pred_seed = 0;
  int pred_prefix = 5;
  CommonOpts pred_opts;
  auto* predict = app.add_subcommand("predict", "export open-loop observation predictions");
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  predict->add_option("--seed", pred_seed, "episode seed");
  predict->add_option("--prefix", pred_prefix, "observed prefix length k");
  predict->add_option("--out", pred_out, "output CSV path");
  predict->add_option("--config", pred_opts.config_path, "configuration file");
  predict->add_option("--override", pred_opts.overrides, "section.key=value (repeatable)");

  std::string transfer_source;
  CommonOpts transfer_opts;
  auto* transfer = app.add_subcommand("transfer", "initialize the model core from a checkpoint");
  transfer->add_option("--source", transfer_source, "source checkpoint")->required();
  add_common(transfer, transfer_opts);

  std::string cmp_a, cmp_b, cmp_metric = "obs_loss", cmp_out;
  double cmp_threshold = 0.1;
  auto* compare = app.add_subcommand("compare-runs", "compare two metrics CSVs");
  compare->add_option("run_a", cmp_a, "first metrics.csv")->required();
  compare->add_option("run_b", cmp_b, "second metrics.csv")->required();
  compare->add_option("--metric", cmp_metric, "metric column to compare");
  compare->add_option("--threshold", cmp_threshold, "threshold for time-to-reach");
  compare->add_option("--out", cmp_out, "write the comparison as CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (show_reference) {
      std::cout << config_reference();
      return 0;
    }
    if (train->parsed()) return cmd_train(train_opts, "");
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_episodes, eval_mode, eval_opts);
    if (predict->parsed())
      return cmd_predict(pred_ckpt, pred_seed, pred_prefix, pred_out, pred_opts);
    if (transfer->parsed()) return cmd_train(transfer_opts, transfer_source);
    if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_metric, cmp_threshold, cmp_out);
    std::cout << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
}
