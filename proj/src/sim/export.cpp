#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void put_vec(std::ostream& out, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << num(v(i));
}

void put_names(std::ostream& out, const char* prefix, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) out << ',' << prefix << i;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_num(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("bad number in log: '" + s + "'");
  return v;
}

}  // namespace

void write_log_csv(std::ostream& out, const TrajectoryLog& log) {
  if (log.rows.empty()) throw InvalidArgument("log is empty");
  const LogRow& r0 = log.rows.front();
  out << 't';
  put_names(out, "x", r0.x.size());
  put_names(out, "xd", r0.x_d.size());
  put_names(out, "u", r0.u.size());
  put_names(out, "theta", r0.theta_hat.size());
  out << ",e_norm,V,bound,cert_pass\n";
  for (const LogRow& r : log.rows) {
    out << num(r.t);
    put_vec(out, r.x);
    put_vec(out, r.x_d);
    put_vec(out, r.u);
    put_vec(out, r.theta_hat);
    out << ',' << num(r.e_norm) << ',' << num(r.V) << ',' << num(r.bound) << ','
        << (r.cert_pass ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing log");
}

void write_log_csv(const std::string& path, const TrajectoryLog& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  write_log_csv(f, log);
}

TrajectoryLog read_log_csv(std::istream& in, const std::string& controller) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("log has no header");
  const std::vector<std::string> head = split(line);
  auto count = [&](const std::string& prefix) {
    return std::count_if(head.begin(), head.end(), [&](const std::string& h) {
      return h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0 &&
             std::isdigit(static_cast<unsigned char>(h[prefix.size()]));
    });
  };
  const Eigen::Index n = count("x"), nd = count("xd"), m = count("u"), p = count("theta");
  const size_t width = static_cast<size_t>(1 + n + nd + m + p + 4);
  if (head.size() != width || head.front() != "t") throw IoError("unexpected log header");
  TrajectoryLog log;
  log.controller = controller;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split(line);
    if (c.size() != width) throw IoError("log row has the wrong number of columns");
    size_t k = 0;
    auto take = [&](Eigen::Index len) {
      Vec v(len);
      for (Eigen::Index i = 0; i < len; ++i) v(i) = parse_num(c[k++]);
      return v;
    };
    LogRow r;
    r.t = parse_num(c[k++]);
    r.x = take(n);
    r.x_d = take(nd);
    r.u = take(m);
    r.theta_hat = take(p);
    r.e_norm = parse_num(c[k++]);
    r.V = parse_num(c[k++]);
    r.bound = parse_num(c[k++]);
    r.cert_pass = parse_num(c[k++]) != 0.0;
    log.rows.push_back(std::move(r));
  }
  return log;
}

TrajectoryLog read_log_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string name = std::filesystem::path(path).stem().string();
  return read_log_csv(f, name);
}

void write_plot_svg(std::ostream& out, const std::vector<TrajectoryLog>& logs,
                    const std::string& title) {
  if (logs.empty()) throw InvalidArgument("no logs to plot");
  const double W = 800, H = 450, left = 70, right = 170, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const double floor = 1e-6;

  const TrajectoryLog* env = nullptr;
  for (const auto& l : logs) {
    if (!l.rows.empty() && l.rows.front().cert_pass) {
      env = &l;
      break;
    }
  }
  double t_max = 0.0, y_max = floor * 10;
  for (const auto& l : logs) {
    for (const auto& r : l.rows) {
      t_max = std::max(t_max, r.t);
      if (std::isfinite(r.e_norm)) y_max = std::max(y_max, r.e_norm);
    }
  }
  if (t_max <= 0.0) t_max = 1.0;
  const double lo = std::log10(floor), hi = std::ceil(std::log10(y_max) + 1.0);
  auto px = [&](double t) { return left + pw * t / t_max; };
  auto py = [&](double v) {
    const double c = std::clamp(std::log10(std::max(v, floor)), lo, hi);
    return top + ph * (hi - c) / (hi - lo);
  };
  auto path_of = [&](const TrajectoryLog& l, bool bound) {
    std::ostringstream d;
    bool first = true;
    for (const auto& r : l.rows) {
      const double v = bound ? r.bound : r.e_norm;
      if (!std::isfinite(v)) continue;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%c%.2f %.2f", first ? 'M' : 'L', px(r.t), py(v));
      d << (first ? "" : " ") << buf;
      first = false;
    }
    return d.str();
  };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << title
      << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
    out << "<text x=\"" << left - 8 << "\" y=\"" << py(std::pow(10.0, e)) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << e
        << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t (s), |x - x_d| (log)"
      << "</text>\n";
  int k = 0;
  for (const auto& l : logs) {
    const char* c = colors[k % 6];
    out << "<path class=\"curve\" d=\"" << path_of(l, false) << "\" fill=\"none\" stroke=\"" << c
        << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 16 * (k + 1) << "\" fill=\"" << c
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << l.controller
        << (l.aborted ? " (aborted)" : "") << "</text>\n";
    ++k;
  }
  if (env) {
    out << "<path class=\"envelope\" d=\"" << path_of(*env, true)
        << "\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
    out << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 16 * (k + 1)
        << "\" font-family=\"sans-serif\" font-size=\"12\">bound (" << env->controller
        << ")</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing plot");
}

void write_plot_svg(const std::string& path, const std::vector<TrajectoryLog>& logs,
                    const std::string& title) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  write_plot_svg(f, logs, title);
}

std::vector<std::string> export_result(const ScenarioResult& res, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  std::vector<TrajectoryLog> nonempty;
  for (const auto& l : res.logs) {
    if (l.rows.empty()) continue;
    const std::string p = (std::filesystem::path(dir) / (res.scenario + "_" + l.controller + ".csv")).string();
    write_log_csv(p, l);
    paths.push_back(p);
    nonempty.push_back(l);
  }
  if (nonempty.empty()) throw InvalidArgument("no log rows to export");
  const std::string svg = (std::filesystem::path(dir) / (res.scenario + ".svg")).string();
  write_plot_svg(svg, nonempty, res.scenario);
  paths.push_back(svg);
  return paths;
}

}  // namespace ancm
