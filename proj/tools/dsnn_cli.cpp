// Command-line front end: train, eval, analyze, plus the synapse-budget
// sweep and the structure/delay ablation protocols.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsnn/analysis.hpp"
#include "dsnn/checkpoint.hpp"
#include "dsnn/config.hpp"
#include "dsnn/dataio.hpp"
#include "dsnn/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct DataArgs {
  std::string data;       // "features.rft,labels.rft"
  std::string synthetic;  // spec file
};

void add_data_flags(CLI::App* cmd, DataArgs& args) {
  auto* d = cmd->add_option("--data", args.data,
                            "features and labels tensor files, comma separated");
  auto* s = cmd->add_option("--synthetic", args.synthetic,
                            "synthetic dataset spec file");
  d->excludes(s);
}

dsnn::Dataset load_data(const DataArgs& args) {
  if (!args.synthetic.empty())
    return dsnn::gen_synthetic(dsnn::load_synthetic_spec(args.synthetic));
  if (args.data.empty())
    throw dsnn::ConfigError("no dataset given (use --data or --synthetic)");
  const std::size_t comma = args.data.find(',');
  if (comma == std::string::npos)
    throw dsnn::ConfigError(
        "--data expects 'features.rft,labels.rft', got: " + args.data);
  return dsnn::load_dataset(args.data.substr(0, comma),
                            args.data.substr(comma + 1));
}

void require_writable_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const std::string probe = dir + "/.write_probe";
  std::ofstream out(probe, std::ios::trunc);
  if (!out) throw dsnn::FormatError("output directory not writable: " + dir);
  out.close();
  fs::remove(probe, ec);
}

double train_once(const dsnn::RunConfig& cfg, const dsnn::Dataset& data) {
  auto result = dsnn::train<float>(data, cfg.net, cfg.plan);
  return result.metrics.empty() ? 0.0 : result.metrics.back().test_acc;
}

int cmd_train(const std::string& config_path, const DataArgs& data_args,
              const std::string& out_dir) {
  dsnn::RunConfig cfg = dsnn::load_config(config_path);
  dsnn::Dataset data = load_data(data_args);
  require_writable_dir(out_dir);

  // Rolling checkpoint per epoch so an aborted run still leaves usable state.
  dsnn::TrainHooks<float> hooks;
  hooks.on_epoch = [&](const dsnn::NetState<float>& net,
                       const dsnn::MetricsRow&) {
    dsnn::save_checkpoint(out_dir + "/checkpoint", net, cfg);
  };
  auto result = dsnn::train<float>(data, cfg.net, cfg.plan, hooks);
  dsnn::save_checkpoint(out_dir + "/checkpoint", result.net, cfg);
  dsnn::write_metrics_csv(out_dir + "/metrics.csv", result.metrics);

  const double acc =
      result.metrics.empty() ? 0.0 : result.metrics.back().test_acc;
  std::printf("final test accuracy: %.9g\n", acc);
  return 0;
}

int cmd_eval(const std::string& ckpt_dir, const DataArgs& data_args,
             const std::string& split, bool round_delays) {
  dsnn::Checkpoint ck = dsnn::load_checkpoint(ckpt_dir);
  dsnn::Dataset data = load_data(data_args);
  if (data.t_steps != ck.cfg.net.t_steps || data.channels != ck.cfg.net.n_in)
    throw dsnn::ConfigError("eval: dataset shape does not match checkpoint");

  std::vector<int> idx;
  if (split == "all") {
    idx.resize(data.n);
    for (int i = 0; i < data.n; ++i) idx[i] = i;
  } else {
    auto [train_idx, test_idx] = dsnn::split_train_test(
        data.n, ck.cfg.plan.test_fraction, ck.cfg.net.seed);
    idx = (split == "train") ? train_idx : test_idx;
  }
  const double acc = dsnn::evaluate(ck.net, data, idx, ck.cfg.plan.batch_size,
                                    round_delays || ck.cfg.round_delays);
  std::printf("accuracy: %.9g\n", acc);
  return 0;
}

int cmd_analyze(const std::string& ckpt_dir, const std::string& out_dir) {
  dsnn::Checkpoint ck = dsnn::load_checkpoint(ckpt_dir);
  require_writable_dir(out_dir);
  dsnn::NetworkAnalysis na = dsnn::analyze_network(
      ck.net, out_dir, ck.cfg.morans_row_standardized);
  std::printf("mean morans_i: %.9g over %d classes\n", na.mean, na.n_defined);
  if (na.argmax_class >= 0)
    std::printf("max: class %d (%.9g), min: class %d (%.9g)\n",
                na.argmax_class, na.per_class[na.argmax_class],
                na.argmin_class, na.per_class[na.argmin_class]);
  return 0;
}

int cmd_sweep(const std::string& config_path, const DataArgs& data_args,
              const std::string& mode, const std::vector<double>& levels,
              const std::string& out_dir, int n_seeds) {
  const dsnn::RunConfig base = dsnn::load_config(config_path);
  dsnn::Dataset data = load_data(data_args);
  require_writable_dir(out_dir);

  std::ofstream csv(out_dir + "/sweep.csv", std::ios::trunc);
  if (!csv) throw dsnn::FormatError("cannot write sweep csv");
  csv << "synapses,acc_mean,acc_std,mode\n";

  for (double level : levels) {
    dsnn::RunConfig cfg = base;
    long synapses = 0;
    if (mode == "dense") {
      cfg.net.n_hidden =
          std::max(1, int(std::floor(base.net.n_hidden * (1.0 - level))));
      cfg.net.sparsity.mode = dsnn::SparsityMode::kDense;
      cfg.net.sparsity.p = 0.0;
      synapses = long(cfg.net.n_in) * cfg.net.n_hidden +
                 long(cfg.net.n_hidden) * cfg.net.n_out;
    } else if (mode == "sparse") {
      cfg.net.sparsity.p = level;
      if (cfg.net.sparsity.mode == dsnn::SparsityMode::kDense ||
          cfg.net.sparsity.mode == dsnn::SparsityMode::kFixed)
        cfg.net.sparsity.mode = dsnn::SparsityMode::kRigl;
      synapses =
          dsnn::er_target_active(level, cfg.net.n_in, cfg.net.n_hidden) +
          dsnn::er_target_active(level, cfg.net.n_hidden, cfg.net.n_out);
    } else {
      throw dsnn::ConfigError("sweep mode must be dense or sparse");
    }

    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
      cfg.net.seed = base.net.seed + std::uint64_t(s);
      const double acc = train_once(cfg, data);
      sum += acc;
      sum_sq += acc * acc;
    }
    const double mean = sum / n_seeds;
    const double var =
        n_seeds > 1 ? std::max(0.0, (sum_sq - n_seeds * mean * mean) /
                                        double(n_seeds - 1))
                    : 0.0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%s\n", synapses, mean,
                  std::sqrt(var), mode.c_str());
    csv << buf;
    csv.flush();
  }
  if (!csv) throw dsnn::FormatError("sweep csv write failed");
  return 0;
}

int cmd_ablation(const std::string& config_path, const DataArgs& data_args,
                 const std::string& out_dir, int n_seeds) {
  const dsnn::RunConfig base = dsnn::load_config(config_path);
  dsnn::Dataset data = load_data(data_args);
  require_writable_dir(out_dir);

  std::ofstream csv(out_dir + "/ablation.csv", std::ios::trunc);
  if (!csv) throw dsnn::FormatError("cannot write ablation csv");
  csv << "structure,delays";
  for (int s = 0; s < n_seeds; ++s) csv << ",acc_seed_" << s;
  csv << ",acc_mean\n";

  const bool conds[4][2] = {
      {false, false}, {false, true}, {true, false}, {true, true}};
  for (const auto& cond : conds) {
    const bool learn_structure = cond[0];
    const bool learn_delay = cond[1];
    dsnn::RunConfig cfg = base;
    cfg.net.dale = false;
    cfg.net.learn_delays = learn_delay;
    cfg.net.sparsity.mode = learn_structure ? dsnn::SparsityMode::kRigl
                                            : dsnn::SparsityMode::kFixed;

    csv << (learn_structure ? "learned" : "fixed") << ","
        << (learn_delay ? "learned" : "fixed");
    double sum = 0.0;
    char buf[48];
    for (int s = 0; s < n_seeds; ++s) {
      cfg.net.seed = base.net.seed + std::uint64_t(s);
      const double acc = train_once(cfg, data);
      sum += acc;
      std::snprintf(buf, sizeof(buf), ",%.9g", acc);
      csv << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.9g\n", sum / n_seeds);
    csv << buf;
    csv.flush();
  }
  if (!csv) throw dsnn::FormatError("ablation csv write failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking network trainer with learnable delays and dynamic "
               "sparsity"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt_dir;
  std::string split = "test", sweep_mode;
  std::vector<double> levels;
  bool round_delays = false;
  int n_seeds = 3;
  DataArgs data_args;

  auto* train = app.add_subcommand("train", "train a network");
  train->add_option("--config", config_path)->required();
  train->add_option("--out", out_dir)->required();
  add_data_flags(train, data_args);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", ckpt_dir)->required();
  eval->add_option("--split", split)
      ->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_flag("--round-delays", round_delays,
                 "snap delays to integers for inference");
  add_data_flags(eval, data_args);

  auto* analyze = app.add_subcommand("analyze",
                                     "receptive fields and autocorrelation");
  analyze->add_option("--checkpoint", ckpt_dir)->required();
  analyze->add_option("--out", out_dir)->required();

  auto* sweep = app.add_subcommand("sweep", "synapse-budget sweep");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--mode", sweep_mode)
      ->required()
      ->check(CLI::IsMember({"dense", "sparse"}));
  sweep->add_option("--levels", levels)->required()->delimiter(',');
  sweep->add_option("--out", out_dir)->required();
  sweep->add_option("--seeds", n_seeds);
  add_data_flags(sweep, data_args);

  auto* ablation =
      app.add_subcommand("ablation", "structure x delay learning grid");
  ablation->add_option("--config", config_path)->required();
  ablation->add_option("--out", out_dir)->required();
  ablation->add_option("--seeds", n_seeds);
  add_data_flags(ablation, data_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, data_args, out_dir);
    if (eval->parsed())
      return cmd_eval(ckpt_dir, data_args, split, round_delays);
    if (analyze->parsed()) return cmd_analyze(ckpt_dir, out_dir);
    if (sweep->parsed())
      return cmd_sweep(config_path, data_args, sweep_mode, levels, out_dir,
                       n_seeds);
    if (ablation->parsed())
      return cmd_ablation(config_path, data_args, out_dir, n_seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
