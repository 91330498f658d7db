#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ancm/dynamics.hpp"
#include "ancm/synthesis.hpp"

namespace ancm {

enum class Activation { kTanh, kIdentity };

const char* to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Fully connected network; hidden layers use the activation, the output
/// layer is affine. Parameters are flattened layer by layer as W (column
/// major) followed by b.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes, Activation act = Activation::kTanh);

  /// Xavier-uniform weights, zero biases.
  void init(unsigned seed);

  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  int num_inputs() const { return sizes_.front(); }
  int num_outputs() const { return sizes_.back(); }
  int num_params() const;

  Vec params() const;
  void set_params(const Vec& theta);

  std::vector<Mat>& weights() { return W_; }
  std::vector<Vec>& biases() { return b_; }
  const std::vector<Mat>& weights() const { return W_; }
  const std::vector<Vec>& biases() const { return b_; }

  /// Column-batched evaluation; the tape keeps every layer's output.
  struct Tape {
    std::vector<Mat> a;
  };
  Mat forward(const Mat& Z, Tape* tape = nullptr) const;
  Vec forward(const Vec& z) const;

  /// Adds dLoss/dparams to `grad` given dLoss/dout for the batch on the tape.
  void backward(const Tape& tape, const Mat& dout, Vec& grad) const;

 private:
  std::vector<int> sizes_;
  Activation act_ = Activation::kTanh;
  std::vector<Mat> W_;
  std::vector<Vec> b_;
};

/// Metric network  (x, x_d, theta_hat) -> scale * L L^T + eps_pd I,
/// L lower triangular from the n(n+1)/2 outputs (row-major lower triangle).
class MetricNet {
 public:
  MetricNet() = default;
  MetricNet(int n, int p, int depth, int width, Activation act = Activation::kTanh,
            unsigned seed = 1, double eps_pd = 1e-4);

  int n() const { return n_; }
  int p() const { return p_; }
  unsigned seed() const { return seed_; }
  double eps_pd() const { return eps_pd_; }
  double out_scale() const { return out_scale_; }

  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }

  /// Affine input normalization  z_norm = (z - offset) .* gain.
  void set_normalization(const Vec& offset, const Vec& gain);
  const Vec& in_offset() const { return in_offset_; }
  const Vec& in_gain() const { return in_gain_; }
  void set_out_scale(double s);

  /// Fits normalization to the samples' input box and scale to their mean
  /// |M|, and points the output bias at the Cholesky factor of the mean target.
  void fit_to_data(const std::vector<MetricSample>& samples);

  Vec input(const Vec& x, const Vec& x_d, const Vec& theta_hat) const;
  Mat factor(const Vec& out) const;
  Mat metric_from_output(const Vec& out) const;
  Mat metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const;

  /// Zeros every weight and bias.
  void zero();

 private:
  int n_ = 0, p_ = 0;
  unsigned seed_ = 1;
  double eps_pd_ = 1e-4;
  double out_scale_ = 1.0;
  Vec in_offset_, in_gain_;
  Mlp mlp_;
};

Mat forward_metric(const MetricNet& net, const Vec& x, const Vec& x_d, const Vec& theta_hat);

/// Anything that yields a metric at (x, x_d, theta_hat).
class MetricSource {
 public:
  virtual ~MetricSource() = default;
  virtual Mat metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const = 0;
  /// Central-difference step used for d M_q.
  virtual double fd_step() const { return 1e-5; }
  /// False when the metric does not depend on x_d (skips d M_{x_d}).
  virtual bool depends_on_xd() const { return true; }
};

class NetMetric : public MetricSource {
 public:
  explicit NetMetric(std::shared_ptr<const MetricNet> net) : net_(std::move(net)) {}
  Mat metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const override;
  const MetricNet& net() const { return *net_; }

 private:
  std::shared_ptr<const MetricNet> net_;
};

/// Solves the metric program at every call; x_d is the program's x_d.
class ExactMetric : public MetricSource {
 public:
  ExactMetric(ParametricSystem psys, SynthesisConfig cfg, double step = 1e-4)
      : psys_(std::move(psys)), cfg_(std::move(cfg)), step_(step) {}
  Mat metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const override;
  MetricSample sample(const Vec& x, const Vec& x_d, const Vec& theta_hat) const;
  double fd_step() const override { return step_; }

 private:
  ParametricSystem psys_;
  SynthesisConfig cfg_;
  double step_;
};

class FunctionMetric : public MetricSource {
 public:
  using Fn = std::function<Mat(const Vec&, const Vec&, const Vec&)>;
  explicit FunctionMetric(Fn fn, bool depends_on_xd = true)
      : fn_(std::move(fn)), xd_(depends_on_xd) {}
  Mat metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const override {
    return fn_(x, x_d, theta_hat);
  }
  bool depends_on_xd() const override { return xd_; }

 private:
  Fn fn_;
  bool xd_;
};

/// First-order model of another source around (x0, x_d0) with theta_hat held:
///   M0 + sum_i dM/dx_i (x - x0)_i + sum_i dM/dx_d,i (x_d - x_d0)_i.
/// Costs 1 + 2n (or 1 + 4n) evaluations of the source at construction.
class LinearizedMetric : public MetricSource {
 public:
  LinearizedMetric(const MetricSource& src, const Vec& x0, const Vec& x_d0, const Vec& theta_hat,
                   bool with_xd = true);
  Mat metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const override;
  bool depends_on_xd() const override { return !dM_dxd_.empty(); }
  const Mat& center() const { return M0_; }

 private:
  Vec x0_, xd0_;
  Mat M0_;
  std::vector<Mat> dM_dx_, dM_dxd_;
};

/// Constant metric.
std::shared_ptr<MetricSource> constant_metric(const Mat& M);

struct MetricDerivatives {
  Mat dM_x;   // row i = ((dM/dx_i) e)^T / 2
  Mat dM_xd;
};

MetricDerivatives metric_derivatives(const MetricSource& src, const Vec& x, const Vec& x_d,
                                     const Vec& theta_hat, const Vec& e, bool with_xd = true);

enum class LossMode { kRegression, kConstraint };

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-2;
  double lr_decay = 1.0;       // multiplied into the rate after each epoch
  double momentum = 0.9;
  unsigned seed = 1;
  LossMode mode = LossMode::kRegression;
  bool gate_grad_check = true;

  // constraint-loss mode
  const ParametricSystem* system = nullptr;
  SynthesisConfig synthesis;
  double omega_lower = 0.0;    // I/omega_upper <= M <= I/omega_lower; 0 disables
  double omega_upper = 0.0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss_curve;  // full-set loss before training, then per epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double grad_check_error = 0.0;
};

/// Loss (and optionally its gradient) over the samples; regression uses the
/// mean of |M_net - M|_F^2 / scale^2.
double dataset_loss(const MetricNet& net, const std::vector<MetricSample>& data,
                    const TrainConfig& cfg, Vec* grad = nullptr);

/// Throws EmptyDataset, DivergedLoss, or GradientCheckFailed.
TrainResult train(MetricNet& net, const std::vector<MetricSample>& data, const TrainConfig& cfg);

struct GradCheckReport {
  std::vector<int> indices;
  Vec analytic;
  Vec numeric;
  double max_rel_error = 0.0;
};

/// Entries compared with |a - b| / max(|a|, |b|, 1e-3 max_k |a_k|, 1e-12).
double max_relative_error(const Vec& analytic, const Vec& numeric);

/// Backprop against five-point central differences on a random subset of
/// parameters.
GradCheckReport grad_check(const MetricNet& net, const std::vector<MetricSample>& data,
                           const TrainConfig& cfg, int num_params = 40, unsigned seed = 7,
                           double step = 1e-6);

double alpha_ncm(double alpha, double rho_bar, double b_bar, double eps_ell, double chi);

struct LearningErrorConfig {
  double alpha = 1.0;
  double rho_bar = 1.0;
  double b_bar = 1.0;
  double chi = 1.0;
  /// Reference for dM_q; derivative errors are skipped without one.
  const MetricSource* reference = nullptr;
  bool include_xd = false;
};

struct LearningErrorReport {
  double eps_M = 0.0;
  double eps_dM = 0.0;
  double eps_ell = 0.0;
  double alpha_ncm = 0.0;
  bool pass = false;
  bool derivatives_checked = false;
  int count = 0;
};

/// Sup errors over held-out samples. d M_q is compared at the sample's unit
/// error direction (x - x_d)/|x - x_d|; points with x = x_d only enter eps_M.
LearningErrorReport estimate_learning_error(const MetricSource& approx,
                                            const std::vector<MetricSample>& validation,
                                            const LearningErrorConfig& cfg);

void save_checkpoint(std::ostream& out, const MetricNet& net);
void save_checkpoint(const std::string& path, const MetricNet& net);
MetricNet load_checkpoint(std::istream& in);
MetricNet load_checkpoint(const std::string& path);

}  // namespace ancm
