#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

using namespace ancm;

namespace {

constexpr int kCertificateFailed = 2;

KvConfig load_or_empty(const std::string& path) {
  return path.empty() ? KvConfig() : KvConfig::load(path);
}

void print_summary(const DatasetSummary& s) {
  std::printf("feasible %d  infeasible %d  chi %.6g  nu_max %.6g  omega [%.6g, %.6g]\n",
              s.feasible, s.infeasible, s.chi, s.nu_max, s.omega_lower, s.omega_upper);
}

int cmd_synth(const std::string& config, const std::string& out, int samples) {
  const PipelineConfig cfg = pipeline_config_from_kv(load_or_empty(config));
  const Dataset ds = cartpole_dataset(cfg, samples > 0 ? samples : cfg.samples, cfg.seed);
  write_dataset_csv(out, ds);
  print_summary(ds.summary);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_train(const std::string& config, const std::string& data, const std::string& out) {
  const PipelineConfig cfg = pipeline_config_from_kv(load_or_empty(config));
  Dataset all = data.empty() ? cartpole_dataset(cfg, cfg.samples + cfg.validation, cfg.seed)
                             : read_dataset_csv(data);
  if (static_cast<int>(all.samples.size()) <= cfg.validation) {
    throw EmptyDataset("dataset has no samples left for training after the validation split");
  }
  Dataset train_set = all, valid = all;
  train_set.samples.assign(all.samples.begin(), all.samples.end() - cfg.validation);
  valid.samples.assign(all.samples.end() - cfg.validation, all.samples.end());
  train_set.summary = summarize(train_set.samples, 0);
  valid.summary = summarize(valid.samples, 0);
  const TrainedMetric tm = train_cartpole_metric(cfg, train_set, valid);
  save_checkpoint(out, *tm.net);
  const LearningErrorReport& e = tm.error;
  std::printf("loss %.6g -> %.6g  grad check %.3g\n", tm.train.initial_loss, tm.train.final_loss,
              tm.train.grad_check_error);
  std::printf("eps_M %.6g  eps_dM %.6g  eps_ell %.6g  b_bar %.6g  alpha_ncm %.6g  %s\n", e.eps_M,
              e.eps_dM, e.eps_ell, tm.b_bar, e.alpha_ncm, e.pass ? "PASS" : "FAIL");
  std::printf("wrote %s\n", out.c_str());
  return e.pass ? 0 : kCertificateFailed;
}

int cmd_certify(const std::string& config, const std::string& out) {
  const KvConfig kv = load_or_empty(config);
  const ScenarioConfig cfg = scenario_config_from_kv(kv, "drag");
  const ParametricSystem psys = cartpole_parametric(cfg.plant, cfg.domain);
  SampleGrid grid;
  grid.n = 4;
  grid.p = 2;
  Vec lo(10), hi(10);
  lo << cfg.domain.lo, Vec::Zero(4), cfg.theta_box.lo;
  hi << cfg.domain.hi, Vec::Zero(4), cfg.theta_box.hi;
  grid.box = Box(lo, hi);
  grid.random_samples = cfg.bound_samples;
  grid.seed = cfg.sim.disturbance.seed;
  const DatasetSummary bounds = build_dataset(psys, cfg.synthesis, grid, cfg.threads).summary;
  ControllerConfig control = cfg.control;
  control.bounds.b_bar = kv.get_double("b_bar", sample_input_norm(psys.at(cfg.theta0), 2000, 1));
  control.bounds.rho_bar = kv.get_double("rho_bar", control.bounds.rho_bar);
  const double a_ncm = alpha_ncm(cfg.synthesis.alpha, control.bounds.rho_bar,
                                 control.bounds.b_bar, cfg.eps_ell, bounds.chi);
  const GainCertificate cert =
      certify_ancm(bounds, control, a_ncm, cfg.eps_ell, cfg.sim.disturbance.sup,
                   kv.get_double("theta_bar", cfg.theta_box.hi.cwiseAbs().norm()),
                   kv.get_double("y_bar", 0.0));
  print_summary(bounds);
  write_certificate(std::cout, cert);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw IoError("cannot open " + out);
    write_certificate(f, cert);
  }
  return cert.pass ? 0 : kCertificateFailed;
}

int cmd_run(const std::string& scenario, int seed, const std::string& config,
            const std::string& out) {
  KvConfig kv = load_or_empty(config);
  if (seed >= 0) kv.set("seed", std::to_string(seed));
  const ScenarioConfig cfg = scenario_config_from_kv(kv, scenario);
  const ScenarioResult res = run_scenario(scenario, cfg);
  std::printf("%s: %s\n", res.scenario.c_str(), res.notes.c_str());
  for (const auto& l : res.logs) {
    double peak = 0.0;
    for (const auto& r : l.rows) peak = std::max(peak, r.e_norm);
    std::printf("  %-12s rows %5zu  |e(T)| %.6g  max|e| %.6g%s%s\n", l.controller.c_str(),
                l.rows.size(), l.final_error(), peak, l.aborted ? "  aborted: " : "",
                l.aborted ? l.abort_reason.c_str() : "");
  }
  if (!out.empty()) {
    for (const auto& p : export_result(res, out)) std::printf("wrote %s\n", p.c_str());
  }
  if (res.scenario == "drag" && !res.certificate.pass) {
    std::fprintf(stderr, "gain certificate failed (alpha_a %.6g)\n", res.certificate.alpha_a);
    return kCertificateFailed;
  }
  return 0;
}

int cmd_export(const std::vector<std::string>& logs, const std::string& svg,
               const std::string& title) {
  std::vector<TrajectoryLog> loaded;
  for (const auto& p : logs) loaded.push_back(read_log_csv(p));
  write_plot_svg(svg, loaded, title);
  std::printf("wrote %s\n", svg.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive neural contraction metric toolkit"};
  app.require_subcommand(1);

  std::string config, out, data, scenario = "drag", svg, title = "tracking error";
  int samples = 0, seed = -1;
  std::vector<std::string> logs;

  auto* synth = app.add_subcommand("synth", "sample the metric program over the cart-pole domain");
  synth->add_option("--config", config, "key-value config file");
  synth->add_option("--out", out, "dataset CSV")->required();
  synth->add_option("--samples", samples, "number of samples (overrides the config)");

  auto* train = app.add_subcommand("train", "fit the metric network and report the learning error");
  train->add_option("--config", config, "key-value config file");
  train->add_option("--data", data, "dataset CSV (synthesized when omitted)");
  train->add_option("--out", out, "checkpoint file")->required();

  auto* certify = app.add_subcommand("certify", "check the adaptive gain condition");
  certify->add_option("--config", config, "key-value config file");
  certify->add_option("--out", out, "certificate file");

  auto* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("--scenario", scenario, "drag or unknown-dyn")
      ->check(CLI::IsMember({"drag", "unknown-dyn"}));
  run->add_option("--seed", seed, "disturbance seed");
  run->add_option("--config", config, "key-value config file");
  run->add_option("--out", out, "directory for CSV logs and the plot");

  auto* exp = app.add_subcommand("export", "plot CSV logs");
  exp->add_option("logs", logs, "CSV logs")->required();
  exp->add_option("--svg", svg, "output plot")->required();
  exp->add_option("--title", title, "plot title");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(config, out, samples);
    if (*train) return cmd_train(config, data, out);
    if (*certify) return cmd_certify(config, out);
    if (*run) return cmd_run(scenario, seed, config, out);
    if (*exp) return cmd_export(logs, svg, title);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  return 1;
}
