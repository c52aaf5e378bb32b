#include "dsnn/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsnn/dataio.hpp"

namespace dsnn {

namespace {

namespace fs = std::filesystem;

Tensor matrix_tensor(const std::vector<float>& data, int n_post, int n_pre) {
  Tensor t;
  t.shape = {std::uint32_t(n_post), std::uint32_t(n_pre)};
  t.data = data;
  return t;
}

Tensor vector_tensor(const std::vector<float>& data) {
  Tensor t;
  t.shape = {std::uint32_t(data.size())};
  t.data = data;
  return t;
}

std::vector<float> to_float(const std::vector<std::int8_t>& v) {
  return std::vector<float>(v.begin(), v.end());
}
std::vector<float> to_float(const std::vector<std::uint8_t>& v) {
  return std::vector<float>(v.begin(), v.end());
}

void save_layer(const std::string& dir, const std::string& prefix,
                const SparseLayerState<float>& st) {
  save_tensor(dir + "/" + prefix + "_theta.rft",
              matrix_tensor(st.theta, st.n_post, st.n_pre));
  save_tensor(dir + "/" + prefix + "_sign.rft",
              matrix_tensor(to_float(st.sign), st.n_post, st.n_pre));
  save_tensor(dir + "/" + prefix + "_delay.rft",
              matrix_tensor(st.delay, st.n_post, st.n_pre));
  save_tensor(dir + "/" + prefix + "_mask.rft",
              matrix_tensor(to_float(st.mask), st.n_post, st.n_pre));
}

void load_layer(const std::string& dir, const std::string& prefix,
                SparseLayerState<float>& st) {
  auto expect = [&](const Tensor& t, const char* what) {
    if (t.shape.size() != 2 || int(t.shape[0]) != st.n_post ||
        int(t.shape[1]) != st.n_pre)
      throw StateError("checkpoint/config mismatch: " + prefix + "_" + what +
                       " has wrong shape");
  };
  Tensor th = load_tensor(dir + "/" + prefix + "_theta.rft");
  expect(th, "theta");
  st.theta = std::move(th.data);
  Tensor sg = load_tensor(dir + "/" + prefix + "_sign.rft");
  expect(sg, "sign");
  st.sign.resize(sg.data.size());
  for (std::size_t e = 0; e < sg.data.size(); ++e) {
    if (sg.data[e] != 1.0f && sg.data[e] != -1.0f)
      throw StateError("checkpoint: sign entries must be +-1");
    st.sign[e] = std::int8_t(sg.data[e]);
  }
  Tensor dl = load_tensor(dir + "/" + prefix + "_delay.rft");
  expect(dl, "delay");
  st.delay = std::move(dl.data);
  Tensor mk = load_tensor(dir + "/" + prefix + "_mask.rft");
  expect(mk, "mask");
  st.mask.resize(mk.data.size());
  for (std::size_t e = 0; e < mk.data.size(); ++e)
    st.mask[e] = mk.data[e] != 0.0f;
}

}  // namespace

void save_checkpoint(const std::string& dir, const NetState<float>& net,
                     const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream man(dir + "/manifest.txt", std::ios::trunc);
  if (!man) throw FormatError("save_checkpoint: cannot write to " + dir);
  man << serialize_config(cfg);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", net.sigma);
  man << "epoch=" << net.epochs_done << "\n";
  man << "sigma=" << buf << "\n";
  man.close();
  if (!man) throw FormatError("save_checkpoint: manifest write failed");

  save_layer(dir, "l1", net.l1);
  save_layer(dir, "l2", net.l2);
  save_tensor(dir + "/bn_gamma.rft", vector_tensor(net.bn.gamma));
  save_tensor(dir + "/bn_beta.rft", vector_tensor(net.bn.beta));
  save_tensor(dir + "/bn_mean.rft", vector_tensor(net.bn.run_mean));
  save_tensor(dir + "/bn_var.rft", vector_tensor(net.bn.run_var));
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream man(dir + "/manifest.txt");
  if (!man) throw FormatError("load_checkpoint: cannot open " + dir +
                              "/manifest.txt");
  std::ostringstream ss;
  ss << man.rdbuf();

  // Split training-progress keys from the config echo.
  std::istringstream lines(ss.str());
  std::string line, cfg_text;
  int epoch = 0;
  double sigma = -1.0;
  while (std::getline(lines, line)) {
    if (line.rfind("epoch=", 0) == 0)
      epoch = std::stoi(line.substr(6));
    else if (line.rfind("sigma=", 0) == 0)
      sigma = std::stod(line.substr(6));
    else
      cfg_text += line + "\n";
  }
  if (sigma < 0.0)
    throw FormatError("load_checkpoint: manifest missing sigma");

  Checkpoint ck;
  ck.cfg = parse_config_text(cfg_text);
  ck.net.cfg = ck.cfg.net;
  ck.net.epochs_done = epoch;
  ck.net.sigma = sigma;

  ck.net.l1.n_pre = ck.cfg.net.n_in;
  ck.net.l1.n_post = ck.cfg.net.n_hidden;
  ck.net.l1.target_active =
      ck.cfg.net.sparsity.mode == SparsityMode::kDense
          ? std::int64_t(ck.net.l1.size())
          : er_target_active(ck.cfg.net.sparsity.p, ck.net.l1.n_pre,
                             ck.net.l1.n_post);
  ck.net.l2.n_pre = ck.cfg.net.n_hidden;
  ck.net.l2.n_post = ck.cfg.net.n_out;
  ck.net.l2.target_active =
      ck.cfg.net.sparsity.mode == SparsityMode::kDense
          ? std::int64_t(ck.net.l2.size())
          : er_target_active(ck.cfg.net.sparsity.p, ck.net.l2.n_pre,
                             ck.net.l2.n_post);
  load_layer(dir, "l1", ck.net.l1);
  load_layer(dir, "l2", ck.net.l2);

  auto load_vec = [&](const char* name, std::vector<float>& dst) {
    Tensor t = load_tensor(dir + "/" + std::string(name) + ".rft");
    if (t.shape.size() != 1 || int(t.shape[0]) != ck.cfg.net.n_in)
      throw StateError(std::string("checkpoint/config mismatch: ") + name);
    dst = std::move(t.data);
  };
  ck.net.bn.channels = ck.cfg.net.n_in;
  load_vec("bn_gamma", ck.net.bn.gamma);
  load_vec("bn_beta", ck.net.bn.beta);
  load_vec("bn_mean", ck.net.bn.run_mean);
  load_vec("bn_var", ck.net.bn.run_var);
  return ck;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write metrics csv: " + path);
  out << "epoch,train_loss,test_acc,active_synapses_l1,active_synapses_l2,"
         "sigma\n";
  char buf[128];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%ld,%ld,%.9g\n", r.epoch,
                  r.train_loss, r.test_acc, r.active_synapses_l1,
                  r.active_synapses_l2, r.sigma);
    out << buf;
  }
  if (!out) throw FormatError("metrics csv write failed: " + path);
}

}  // namespace dsnn
