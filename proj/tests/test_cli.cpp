#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "dsnn/checkpoint.hpp"
#include "dsnn/config.hpp"
#include "test_util.hpp"

using namespace dsnn;

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(DSNN_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  CmdResult res;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) res.out.append(buf, n);
  const int rc = pclose(p);
  res.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return res;
}

std::string small_config_text() {
  RunConfig cfg;
  cfg.net.n_in = 6;
  cfg.net.n_hidden = 8;
  cfg.net.n_out = 2;
  cfg.net.t_steps = 16;
  cfg.net.t_d_max = 6;
  cfg.net.sigma_start = 3.0;
  cfg.net.sigma_final = 0.5;
  cfg.net.dropout_p = 0.1;
  cfg.net.l1_strength = 1e-4;
  cfg.net.seed = 300;
  cfg.plan.epochs = 2;
  cfg.plan.batch_size = 16;
  return serialize_config(cfg);
}

std::string small_synth_text() {
  SyntheticSpec spec;
  spec.n_classes = 2;
  spec.pulses_per_class = 4;
  spec.channels = 6;
  spec.t_steps = 16;
  spec.jitter = 0.5;
  spec.noise_std = 0.05;
  spec.samples_per_class = 30;
  spec.seed = 5;
  return serialize_synthetic_spec(spec);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("checkpoint save/load round trip is exact") {
  SyntheticSpec spec;
  spec.n_classes = 2;
  spec.pulses_per_class = 4;
  spec.channels = 6;
  spec.t_steps = 16;
  spec.samples_per_class = 20;
  spec.seed = 5;
  auto data = gen_synthetic(spec);

  RunConfig cfg = parse_config_text(small_config_text());
  cfg.net.sparsity.mode = SparsityMode::kRigl;
  cfg.net.sparsity.p = 0.5;
  cfg.net.dale = true;
  cfg.plan.epochs = 2;
  auto result = train<float>(data, cfg.net, cfg.plan);

  const auto dir = dsnn_test::fresh_dir("ckpt");
  save_checkpoint(dir, result.net, cfg);
  Checkpoint ck = load_checkpoint(dir);

  CHECK(ck.cfg == cfg);
  CHECK(ck.net.sigma == result.net.sigma);
  CHECK(ck.net.epochs_done == result.net.epochs_done);
  CHECK(ck.net.l1.theta == result.net.l1.theta);
  CHECK(ck.net.l1.delay == result.net.l1.delay);
  CHECK(ck.net.l1.sign == result.net.l1.sign);
  CHECK(ck.net.l1.mask == result.net.l1.mask);
  CHECK(ck.net.l2.theta == result.net.l2.theta);
  CHECK(ck.net.l2.delay == result.net.l2.delay);
  CHECK(ck.net.bn.run_mean == result.net.bn.run_mean);
  CHECK(ck.net.bn.run_var == result.net.bn.run_var);
  CHECK(ck.net.l1.target_active == result.net.l1.target_active);

  // a second save of the loaded state reproduces the bytes
  const auto dir2 = dsnn_test::fresh_dir("ckpt2");
  save_checkpoint(dir2, ck.net, ck.cfg);
  for (const char* name :
       {"manifest.txt", "l1_theta.rft", "l1_delay.rft", "l2_sign.rft",
        "bn_mean.rft"}) {
    std::ifstream a(dir + "/" + name, std::ios::binary);
    std::ifstream b(dir2 + "/" + name, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)),
                   std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)),
                   std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
}

TEST_CASE("delay learning can be frozen") {
  SyntheticSpec spec;
  spec.n_classes = 2;
  spec.channels = 6;
  spec.t_steps = 16;
  spec.samples_per_class = 20;
  auto data = gen_synthetic(spec);

  RunConfig cfg = parse_config_text(small_config_text());
  cfg.net.learn_delays = false;
  cfg.plan.epochs = 2;
  auto result = train<float>(data, cfg.net, cfg.plan);
  auto reference = init_net<float>(cfg.net);
  CHECK(result.net.l1.delay == reference.l1.delay);
  CHECK(result.net.l2.delay == reference.l2.delay);

  cfg.net.learn_delays = true;
  auto moved = train<float>(data, cfg.net, cfg.plan);
  CHECK(moved.net.l1.delay != reference.l1.delay);
}

TEST_CASE("cli: train, eval, analyze pipeline") {
  const auto dir = dsnn_test::fresh_dir("cli_pipeline");
  write_file(dir + "/config.txt", small_config_text());
  write_file(dir + "/synth.txt", small_synth_text());

  auto tr = run_cli("train --config " + dir + "/config.txt --synthetic " +
                    dir + "/synth.txt --out " + dir + "/run");
  CHECK(tr.status == 0);
  CHECK(tr.out.find("final test accuracy:") != std::string::npos);

  auto metrics = read_lines(dir + "/run/metrics.csv");
  REQUIRE(metrics.size() == 3);  // header + 2 epochs
  CHECK(metrics[0] ==
        "epoch,train_loss,test_acc,active_synapses_l1,active_synapses_l2,"
        "sigma");

  // eval on the same split reproduces the final metrics row exactly
  std::string last = metrics.back();
  std::stringstream ss(last);
  std::string field;
  std::getline(ss, field, ',');  // epoch
  std::getline(ss, field, ',');  // train_loss
  std::getline(ss, field, ',');  // test_acc
  const double logged_acc = std::stod(field);

  auto ev = run_cli("eval --checkpoint " + dir + "/run/checkpoint --synthetic " +
                    dir + "/synth.txt");
  CHECK(ev.status == 0);
  const auto pos = ev.out.find("accuracy: ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(ev.out.substr(pos + 10)) == logged_acc);

  auto ev_round =
      run_cli("eval --checkpoint " + dir + "/run/checkpoint --synthetic " +
              dir + "/synth.txt --round-delays");
  CHECK(ev_round.status == 0);

  auto an = run_cli("analyze --checkpoint " + dir + "/run/checkpoint --out " +
                    dir + "/analysis");
  CHECK(an.status == 0);
  auto csv = read_lines(dir + "/analysis/morans.csv");
  CHECK(csv.size() == 4);  // header + 2 classes + mean
  CHECK(csv[0] == "class,morans_i");
  for (int k = 0; k < 2; ++k) {
    std::ifstream ppm(dir + "/analysis/rf_class_" + std::to_string(k) +
                      ".ppm");
    CHECK(ppm.good());
  }
}

TEST_CASE("cli: repeated runs produce byte-identical metrics") {
  const auto dir = dsnn_test::fresh_dir("cli_determinism");
  write_file(dir + "/config.txt", small_config_text());
  write_file(dir + "/synth.txt", small_synth_text());
  for (const char* run : {"a", "b"}) {
    auto r = run_cli("train --config " + dir + "/config.txt --synthetic " +
                     dir + "/synth.txt --out " + dir + "/" + run);
    CHECK(r.status == 0);
  }
  std::ifstream fa(dir + "/a/metrics.csv"), fb(dir + "/b/metrics.csv");
  std::string sa((std::istreambuf_iterator<char>(fa)),
                 std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)),
                 std::istreambuf_iterator<char>());
  CHECK(!sa.empty());
  CHECK(sa == sb);
}

TEST_CASE("cli: error paths exit 2 and name the offender") {
  const auto dir = dsnn_test::fresh_dir("cli_errors");
  write_file(dir + "/config.txt", small_config_text());
  write_file(dir + "/synth.txt", small_synth_text());
  write_file(dir + "/bad_config.txt", "frobnicate=1\n");

  auto bad_cfg = run_cli("train --config " + dir +
                         "/bad_config.txt --synthetic " + dir +
                         "/synth.txt --out " + dir + "/x");
  CHECK(bad_cfg.status == 2);
  CHECK(bad_cfg.out.find("frobnicate") != std::string::npos);

  // features exist, labels missing: the message names the labels path
  Tensor feats;
  feats.shape = {4, 16, 6};
  feats.data.assign(4 * 16 * 6, 0.0f);
  save_tensor(dir + "/f.rft", feats);
  auto missing = run_cli("train --config " + dir + "/config.txt --data " +
                         dir + "/f.rft," + dir + "/nolabels.rft --out " + dir +
                         "/y");
  CHECK(missing.status == 2);
  CHECK(missing.out.find(dir + "/nolabels.rft") != std::string::npos);

  auto nodata = run_cli("train --config " + dir + "/config.txt --out " + dir +
                        "/z");
  CHECK(nodata.status == 2);

  auto unwritable = run_cli("train --config " + dir +
                            "/config.txt --synthetic " + dir +
                            "/synth.txt --out /dev/null/out");
  CHECK(unwritable.status == 2);
}

TEST_CASE("cli: sweep emits one schema-exact row per level") {
  const auto dir = dsnn_test::fresh_dir("cli_sweep");
  write_file(dir + "/config.txt", small_config_text());
  write_file(dir + "/synth.txt", small_synth_text());

  auto sw = run_cli("sweep --config " + dir + "/config.txt --mode sparse "
                    "--levels 0.5,0.75 --seeds 2 --synthetic " +
                    dir + "/synth.txt --out " + dir + "/sweep");
  CHECK(sw.status == 0);
  auto csv = read_lines(dir + "/sweep/sweep.csv");
  REQUIRE(csv.size() == 3);
  CHECK(csv[0] == "synapses,acc_mean,acc_std,mode");
  for (std::size_t r = 1; r < csv.size(); ++r)
    CHECK(csv[r].find(",sparse") != std::string::npos);

  // dense mode at level 0 is the fully connected baseline
  auto dense = run_cli("sweep --config " + dir + "/config.txt --mode dense "
                       "--levels 0,0.5 --seeds 1 --synthetic " +
                       dir + "/synth.txt --out " + dir + "/dense");
  CHECK(dense.status == 0);
  auto dcsv = read_lines(dir + "/dense/sweep.csv");
  REQUIRE(dcsv.size() == 3);
  // 6*8 + 8*2 = 64 synapses at the baseline, half the neurons at level 0.5
  CHECK(dcsv[1].rfind("64,", 0) == 0);
  CHECK(dcsv[2].rfind("32,", 0) == 0);
}

TEST_CASE("cli: ablation emits the four-condition grid") {
  const auto dir = dsnn_test::fresh_dir("cli_ablation");
  RunConfig cfg = parse_config_text(small_config_text());
  cfg.net.sparsity.p = 0.5;  // conditions switch between fixed and rigl
  write_file(dir + "/config.txt", serialize_config(cfg));
  write_file(dir + "/synth.txt", small_synth_text());

  auto ab = run_cli("ablation --config " + dir + "/config.txt --seeds 1 "
                    "--synthetic " +
                    dir + "/synth.txt --out " + dir + "/ab");
  CHECK(ab.status == 0);
  auto csv = read_lines(dir + "/ab/ablation.csv");
  REQUIRE(csv.size() == 5);
  CHECK(csv[0] == "structure,delays,acc_seed_0,acc_mean");
  CHECK(csv[1].rfind("fixed,fixed,", 0) == 0);
  CHECK(csv[2].rfind("fixed,learned,", 0) == 0);
  CHECK(csv[3].rfind("learned,fixed,", 0) == 0);
  CHECK(csv[4].rfind("learned,learned,", 0) == 0);
}
