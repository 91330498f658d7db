#include <fstream>
#include <iomanip>
#include <sstream>

#include "ancm/errors.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

namespace {

constexpr const char* kMagic = "ancm-metric-net";

void write_row(std::ostream& out, const std::string& key, const Vec& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v(i);
  out << '\n';
}

std::istringstream expect_line(std::istream& in, const std::string& key) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) break;
  }
  std::istringstream ss(line);
  std::string got;
  ss >> got;
  if (got != key) throw IoError("checkpoint: expected '" + key + "', found '" + got + "'");
  return ss;
}

Vec read_values(std::istringstream& ss, Eigen::Index count, const std::string& key) {
  Vec v(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!(ss >> v(i))) throw IoError("checkpoint: short row '" + key + "'");
  }
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const MetricNet& net) {
  const Mlp& mlp = net.mlp();
  out << kMagic << " 1\n";
  out << "n " << net.n() << " p " << net.p() << '\n';
  out << "activation " << to_string(mlp.activation()) << '\n';
  out << "sizes";
  for (int s : mlp.sizes()) out << ' ' << s;
  out << '\n';
  out << "seed " << net.seed() << '\n';
  out << std::setprecision(17);
  out << "eps_pd " << net.eps_pd() << '\n';
  out << "out_scale " << net.out_scale() << '\n';
  write_row(out, "in_offset", net.in_offset());
  write_row(out, "in_gain", net.in_gain());
  for (size_t l = 0; l < mlp.weights().size(); ++l) {
    const Mat& W = mlp.weights()[l];
    out << "layer " << l << ' ' << W.rows() << ' ' << W.cols() << '\n';
    for (Eigen::Index i = 0; i < W.rows(); ++i) write_row(out, "w", W.row(i).transpose());
    write_row(out, "b", mlp.biases()[l]);
  }
}

void save_checkpoint(const std::string& path, const MetricNet& net) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  save_checkpoint(f, net);
  if (!f) throw IoError("write failed for " + path);
}

MetricNet load_checkpoint(std::istream& in) {
  int version = 0;
  expect_line(in, kMagic) >> version;
  if (version != 1) throw IoError("checkpoint: unsupported version");
  int n = 0, p = 0;
  std::string tag;
  auto dims = expect_line(in, "n");
  dims >> n >> tag >> p;
  if (tag != "p" || n < 1 || p < 0) throw IoError("checkpoint: bad dimensions");
  std::string act;
  expect_line(in, "activation") >> act;
  std::vector<int> sizes;
  auto sz = expect_line(in, "sizes");
  for (int s; sz >> s;) sizes.push_back(s);
  unsigned seed = 0;
  expect_line(in, "seed") >> seed;
  double eps_pd = 0.0, scale = 0.0;
  expect_line(in, "eps_pd") >> eps_pd;
  expect_line(in, "out_scale") >> scale;
  if (sizes.size() < 2 || sizes.front() != 2 * n + p || sizes.back() != n * (n + 1) / 2) {
    throw IoError("checkpoint: layer sizes do not match n and p");
  }
  for (size_t i = 1; i + 1 < sizes.size(); ++i) {
    if (sizes[i] != sizes[1]) throw IoError("checkpoint: hidden layers must share a width");
  }
  MetricNet net(n, p, static_cast<int>(sizes.size()) - 2, sizes.size() > 2 ? sizes[1] : 1,
                parse_activation(act), seed, eps_pd);
  if (net.mlp().sizes() != sizes) throw IoError("checkpoint: unsupported layer layout");
  net.set_out_scale(scale);
  auto off = expect_line(in, "in_offset");
  auto gain = expect_line(in, "in_gain");
  net.set_normalization(read_values(off, 2 * n + p, "in_offset"),
                        read_values(gain, 2 * n + p, "in_gain"));
  Mlp& mlp = net.mlp();
  for (size_t l = 0; l < mlp.weights().size(); ++l) {
    Mat& W = mlp.weights()[l];
    size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    expect_line(in, "layer") >> idx >> rows >> cols;
    if (idx != l || rows != W.rows() || cols != W.cols()) throw IoError("checkpoint: layer header mismatch");
    for (Eigen::Index i = 0; i < rows; ++i) {
      auto row = expect_line(in, "w");
      W.row(i) = read_values(row, cols, "w").transpose();
    }
    auto b = expect_line(in, "b");
    mlp.biases()[l] = read_values(b, rows, "b");
  }
  return net;
}

MetricNet load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load_checkpoint(f);
}

}  // namespace ancm
