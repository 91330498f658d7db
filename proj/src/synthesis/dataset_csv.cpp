#include <fstream>
#include <iomanip>
#include <sstream>

#include "ancm/errors.hpp"
#include "ancm/synthesis.hpp"

namespace ancm {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  const int n = ds.n, p = ds.p;
  for (int i = 0; i < n; ++i) out << "x_" << i << ",";
  for (int i = 0; i < n; ++i) out << "xd_" << i << ",";
  for (int i = 0; i < p; ++i) out << "th_" << i << ",";
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) out << "W_" << i << "_" << j << ",";
  }
  out << "nu,chi,margin\n";
  out << std::setprecision(17);
  for (const auto& s : ds.samples) {
    for (int i = 0; i < n; ++i) out << s.x(i) << ",";
    for (int i = 0; i < n; ++i) out << s.x_d(i) << ",";
    for (int i = 0; i < p; ++i) out << s.theta_hat(i) << ",";
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) out << s.W_bar(i, j) << ",";
    }
    out << s.nu << "," << s.chi << "," << s.worst_margin << "\n";
  }
}

void write_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_dataset_csv(f, ds);
  if (!f) throw IoError("write failed for " + path);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset is missing its header");
  const auto header = split_csv(line);
  Dataset ds;
  for (const auto& h : header) {
    if (starts_with(h, "x_")) ++ds.n;
    if (starts_with(h, "th_")) ++ds.p;
  }
  const int n = ds.n, p = ds.p;
  const size_t expected = 2 * n + p + n * (n + 1) / 2 + 3;
  if (n < 1 || header.size() != expected || header.back() != "margin") {
    throw IoError("unrecognized dataset header");
  }
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected) throw IoError("dataset row " + std::to_string(row) + " has wrong width");
    std::vector<double> v(cells.size());
    try {
      for (size_t i = 0; i < cells.size(); ++i) v[i] = std::stod(cells[i]);
    } catch (const std::exception&) {
      throw IoError("dataset row " + std::to_string(row) + " is not numeric");
    }
    MetricSample s;
    size_t c = 0;
    s.x = Vec(n);
    s.x_d = Vec(n);
    s.theta_hat = Vec(p);
    for (int i = 0; i < n; ++i) s.x(i) = v[c++];
    for (int i = 0; i < n; ++i) s.x_d(i) = v[c++];
    for (int i = 0; i < p; ++i) s.theta_hat(i) = v[c++];
    s.W_bar = Mat(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        s.W_bar(i, j) = v[c];
        s.W_bar(j, i) = v[c++];
      }
    }
    s.nu = v[c++];
    s.chi = v[c++];
    s.worst_margin = v[c++];
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw EmptyDataset("dataset has no rows");
  ds.summary = summarize(ds.samples, 0);
  return ds;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return read_dataset_csv(f);
}

}  // namespace ancm
