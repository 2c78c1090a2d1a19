#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "saddle_scope/noise_models.hpp"
#include "saddle_scope/sgd_sim.hpp"

namespace saddle {

/// Rows of x are inputs; y holds scalar targets.
struct RegressionData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

/// Least-squares line through (t, v); r2 is the coefficient of determination.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(std::span<const double> t, std::span<const double> v);

// ---------------------------------------------------------------------------
// Two-layer ReLU network f(x) = sum_i u_i relu(w_i . x), loss (f - y)^2.
// Parameters are packed as [u_1..u_k, w_1 (d entries), ..., w_k].

/// x ~ N(0, I_dim), y = tanh(2 x_1) + noise_std * N(0, 1).
RegressionData relu_teacher_data(std::size_t n, std::size_t dim, double noise_std, Seed seed);

class ReluNet {
 public:
  ReluNet(std::size_t width, std::size_t dim);

  std::size_t width() const noexcept { return width_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_params() const noexcept { return width_ * (dim_ + 1); }

  double predict(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const;
  /// Gradient of (f(x) - y)^2; relu'(0) is taken as 0.
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                           double y) const;

 private:
  std::size_t width_, dim_;
};

/// Unit vectors w with sum_n y_n relu(w . x_n) = 0, one on each half circle
/// between w = e_1 and w = -e_1 (rotating through +e_2 and through -e_2).
/// Requires 2-D inputs. With u = 0 every hidden unit at such a w is a
/// stationary point of the empirical loss whose per-sample gradients do not
/// vanish.
std::vector<Eigen::Vector2d> relu_type1_directions(const RegressionData& data);

/// Saddle point for `which`: u = 0 and w either the type-I directions
/// (alternating across units) or 0.
Eigen::VectorXd relu_saddle_point(const ReluNet& net, const RegressionData& data, SaddleType which);

/// Probe at `point` with P = I, using every sample's gradient.
SaddleProbe relu_saddle_probe(const ReluNet& net, const RegressionData& data,
                              const Eigen::VectorXd& point);

struct TwoSaddleConfig {
  std::size_t width = 4;
  SaddleType which = SaddleType::TypeII;
  double lr = 0.05;
  double perturbation = 1e-4;
  std::size_t steps = 3000;
  Seed seed = 0;
};

/// SGD (one sample per step) from the saddle plus perturbation * N(0, I).
/// The series is log |theta_t - theta*|. Extras: onset_step (first t with the
/// distance at 2x its initial value, -1 if never), window_end (first t at
/// 100x), escape_exponent and fit_r2 (least squares on the log-distance over
/// [onset_step, window_end]), saddle_type (classification of theta*).
/// Throws DivergenceError on a non-finite loss.
RunRecord run_two_saddle_escape(const RegressionData& data, const TwoSaddleConfig& cfg);

// ---------------------------------------------------------------------------
// spred: loss ((u * w) . x - y)^2 + kappa (|u|^2 + |w|^2), equivalent to the
// lasso with penalty 2 kappa |beta|_1 on beta = u * w.

struct SpredProblem {
  RegressionData data;
  double kappa = 0.0;
  Eigen::VectorXd lasso_solution;
  double support_fraction = 0.0;
};

/// Whitened design (X'X / N = I), noiseless targets y = X c. Coordinates on
/// the planted support get |c_i| = kappa + U(0.5, 1.5) with random sign, the
/// rest c_i = 0; the lasso solution is the soft threshold of c at kappa, so a
/// fraction 1 - support_fraction of it is exactly zero.
SpredProblem planted_spred_problem(std::size_t dim, std::size_t n_samples, double kappa,
                                   double support_fraction, Seed seed);

struct SpredConfig {
  double lr = 0.01;
  std::size_t steps = 20000;
  double init_scale = 0.1;
  Seed seed = 0;
  double sparsity_tol = 1e-6;
  double divergence_norm = 1e6;
};

/// Fraction of |beta_i| below tol * max|beta|; an all-zero beta counts as 1.
double sparsity(const Eigen::VectorXd& beta, double tol = 1e-6);

/// Extras: sparsity, diverged, beta, lasso_error (|beta - beta_lasso|).
RunRecord run_spred_lasso(const SpredProblem& problem, const SpredConfig& cfg);

// ---------------------------------------------------------------------------
// Swish model f = u * swish(w x), parameters (w, u), loss (f - y)^2.

double swish(double z);

/// x, eps ~ N(0, 1), y = 0.1 swish(x) + 0.9 eps.
RegressionData swish_data(std::size_t n, Seed seed);

struct SwishMinimum {
  Eigen::Vector2d point;
  double loss = 0.0;
  Eigen::Matrix2d hessian;
  double top_eigenvalue = 0.0;
};

double swish_loss(const RegressionData& data, const Eigen::Vector2d& p);
Eigen::Vector2d swish_gradient(const RegressionData& data, const Eigen::Vector2d& p);
/// Central finite differences of the full-batch loss.
Eigen::Matrix2d swish_hessian(const RegressionData& data, const Eigen::Vector2d& p,
                              double step = 1e-4);

/// Grid scan of the full-batch loss over [lo, hi]^2 in (w, u), refined by
/// damped Newton from every grid-local minimum; distinct positive-definite
/// minima inside the box and away from the origin saddle, sorted by loss.
std::vector<SwishMinimum> swish_landscape_minima(const RegressionData& data, double lo = -2.0,
                                                 double hi = 2.0, std::size_t n = 81);

/// The located minimum closest to `target`.
const SwishMinimum& nearest_minimum(const std::vector<SwishMinimum>& minima,
                                    const Eigen::Vector2d& target);

inline const Eigen::Vector2d kSwishA{-0.7, -0.2};
inline const Eigen::Vector2d kSwishB{1.1, -0.3};

struct SwishConfig {
  Eigen::Vector2d init{1.1, -0.3};
  double lr = 0.1;
  std::size_t steps = 20000;
  Seed seed = 0;
  double basin_radius = 0.15;
  double divergence_norm = 1e3;
  /// Fraction of the run averaged for the final position.
  double tail_fraction = 0.2;
};

/// SGD with one sample per step. The final position is the tail average; it
/// is C within basin_radius of the origin, otherwise whichever of A, B is
/// closer. Extras: basin ("A", "B", "C" or "diverged"), tail_w, tail_u, lr.
RunRecord run_swish_selection(const RegressionData& data, const SwishConfig& cfg,
                              const Eigen::Vector2d& min_a, const Eigen::Vector2d& min_b);

inline constexpr Seed kSwishDataSeed = 522;

struct SwishSweepPoint {
  double lr = 0.0;
  std::string basin;  // majority over replicates, ties to the earlier label in A, B, C, diverged
  std::map<std::string, int> votes;
};

/// Runs `replicates` seeds (mix64(cfg.seed, i, r)) at each lr and takes the majority basin.
std::vector<SwishSweepPoint> swish_lr_sweep(const RegressionData& data, const SwishConfig& cfg,
                                            const std::vector<double>& lrs, std::size_t replicates,
                                            const Eigen::Vector2d& min_a,
                                            const Eigen::Vector2d& min_b, unsigned threads = 1);

/// Consecutive duplicates removed.
std::vector<std::string> compress_sequence(const std::vector<std::string>& labels);

// ---------------------------------------------------------------------------
// Fully connected network f(x) = W_L s(... s(W_1 x + b_1) ...) with hidden
// biases, no output bias, loss 1/2 |f - y|^2.

enum class Activation { linear, tanh };
Activation activation_from_string(const std::string& name);

class Mlp {
 public:
  Mlp(std::vector<std::size_t> widths, Activation act, bool hidden_bias = true);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t n_layers() const noexcept { return weights_.size(); }
  Eigen::MatrixXd& weight(std::size_t l) { return weights_[l]; }
  const Eigen::MatrixXd& weight(std::size_t l) const { return weights_[l]; }
  Eigen::VectorXd& bias(std::size_t l) { return biases_[l]; }

  std::size_t n_params() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  void set_zero();
  /// N(0, 1 / fan_in) weights, zero biases.
  void kaiming_init(Rng& rng);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Flattened gradient (same layout as parameters()).
  Eigen::VectorXd gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  /// theta <- theta - lr * gradient averaged over the columns of xs / ys.
  void sgd_step(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, double lr);

 private:
  std::vector<std::size_t> widths_;
  Activation act_;
  bool hidden_bias_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Number of singular values above tol * sigma_max.
std::size_t numerical_rank(const Eigen::MatrixXd& m, double tol = 1e-3);

struct DeepRankConfig {
  std::vector<std::size_t> widths{20, 20, 20};
  Activation activation = Activation::linear;
  double mu = 1.0;
  double noise_std = 2.0;
  double lr = 0.01;
  std::size_t steps = 5000;
  std::size_t batch_size = 1;
  Seed seed = 0;
  double rank_tol = 1e-3;
  /// Optional orthogonal map applied to every input; the first-layer init is
  /// rotated along with it.
  std::optional<Eigen::MatrixXd> input_rotation;
};

/// Streams x ~ N(0, I), y = mu x + (1 - mu) eps, eps ~ N(0, noise_std^2 I).
/// Extras: rank (numerical rank of the second weight matrix),
/// singular_values, diverged.
RunRecord run_deep_linear_rank(const DeepRankConfig& cfg);

// ---------------------------------------------------------------------------
// Masked matrix factorization: f(x) = W2 W1 x on x = X e_k with k uniform,
// X ~ N(0, 1), y = (mu X + (1 - mu) eps_k) e_k, eps_k ~ N(0, 2 s_k) and
// s_k evenly spaced over [0.01, 2.01].

struct MaskedFactorizationConfig {
  std::size_t dim = 20;
  double mu = 0.15;
  double lr = 0.1;
  std::size_t steps = 40000;
  double init_scale = 1e-6;
  Seed seed = 0;
};

std::vector<double> masked_noise_variances(std::size_t dim);

/// Per-direction law of chi_k = X (mu X + (1 - mu) eps_k) on a draw where
/// direction k is active (probability 1/d), 0 otherwise, materialized from
/// `samples` draws per direction.
std::vector<ScalarNoiseDistribution> masked_factorization_chi(std::size_t dim, double mu,
                                                              std::size_t samples, Seed seed);

/// Per-sample origin Hessians in the (h, m) = ((W1[j,k] +- W2[k,j]) / sqrt 2)
/// basis, 2d-dimensional and diagonal: entry k carries -chi_k (h) and entry
/// d + k carries +chi_k (m).
HessianEnsemble masked_factorization_ensemble(std::size_t dim, double mu, std::size_t samples,
                                              Seed seed);

/// First lr > 0 at which both diagonal rates of direction k turn negative,
/// i.e. first root of E log|1 + lr chi_k| with E log|1 - lr chi_k| < 0 there.
/// NaN if none in (0, lr_max].
double masked_collapse_lr(const ScalarNoiseDistribution& chi, double lr_max);

/// Trains from init_scale * N(0, 1) weights. Extras: exponents (per
/// direction, (log n_k(T) - log n_k(0)) / (2T) with n_k = |W2[k,:]|^2 +
/// |W1[:,k]|^2), rank. When `gradient_trace` is set, the full flattened
/// gradient [vec(W1), vec(W2)] is appended every series stride.
RunRecord run_masked_factorization(const MaskedFactorizationConfig& cfg,
                                   std::vector<Eigen::VectorXd>* gradient_trace = nullptr);

// ---------------------------------------------------------------------------

struct SubspaceReport {
  double grad_tail = 0.0;
  double projected_tail = 0.0;
  bool subspace_converged = false;
};

/// Tail means (last `tail_fraction` of the trace) of |g_t| and |n . g_t|; the
/// flag is raised when the first exceeds 10x the second.
SubspaceReport subspace_convergence_diagnostic(const RunRecord& record,
                                               const std::vector<Eigen::VectorXd>& gradients,
                                               const Eigen::VectorXd& direction,
                                               double tail_fraction = 0.2);

}  // namespace saddle
