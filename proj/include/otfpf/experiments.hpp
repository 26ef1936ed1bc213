#pragma once

#include <optional>
#include <string>
#include <vector>

#include "otfpf/kalman.hpp"
#include "otfpf/model.hpp"
#include "otfpf/particle_filters.hpp"

namespace otfpf {

// Estimators of the static filtering comparison.
enum class Estimator { PF, ModifiedPF, FPF };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& name);

// Declarative description of a run/sweep.
struct ExperimentConfig {
  std::optional<LinearGaussianModel> model;

  double dt = 1e-3;
  double horizon = 1.0;

  std::vector<FilterVariant> variants = {
      FilterVariant::DeterministicOptimalFPF};
  std::vector<int> n_list;
  std::vector<int> d_list;
  int64_t trials = 1000;
  uint64_t master_seed = 0;

  // Static-experiment settings.
  double static_sigma = 1.0;
  std::vector<Estimator> estimators = {Estimator::PF, Estimator::ModifiedPF,
                                       Estimator::FPF};
  std::vector<double> mse_levels = {0.05, 0.1, 0.2};

  bool exact_moments = false;

  TimeGrid grid() const;
};

// Fully observed static model of the importance-sampling comparison:
// A = 0, sigma_b = 0, H = I_d, R = sigma^2 I, X_0 ~ N(0, sigma^2 I).
LinearGaussianModel make_static_model(int d, double sigma);

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

// E[clamp(Y, -c, c)] for Y ~ N(mu, var); the conditional expectation of the
// clipped coordinate projection under a Gaussian posterior.
double expected_clipped(double mu, double var, double c);

// ---------------------------------------------------------------------------
// Error decay (empirical moments vs the exact filter)

struct Trajectory {
  TimeGrid grid;
  PathRecord path;
  std::vector<GaussianBelief> kalman;    // steps + 1
  std::vector<GaussianBelief> ensemble;  // steps + 1 empirical moments

  explicit Trajectory(const TimeGrid& g) : grid(g) {}
};

struct DecayResult {
  std::vector<double> t;         // trial-0 series
  std::vector<double> err_mean;  // ||m^(N) - m||_2
  std::vector<double> err_cov;   // ||Sigma^(N) - Sigma||_F
  std::vector<double> mean_rates;  // fitted tail rate per trial
  std::vector<double> cov_rates;
  double median_mean_rate = 0.0;
  double median_cov_rate = 0.0;
  Trajectory trajectory;  // trial 0, for CSV export
};

// Runs the exact filter and one finite-N variant (cfg.variants.front()) on a
// shared path per trial; reports per-step error norms and the least-squares
// decay rate of log error over the final half of the horizon.
DecayResult run_error_decay(const ExperimentConfig& cfg, int threads = 1);

// ---------------------------------------------------------------------------
// Propagation of chaos

struct ChaosRecord {
  int n = 0;
  int64_t trials = 0;
  double err2_mean = 0.0;    // E ||X^i - Xbar^i||^2 at the final time
  double err2_stderr = 0.0;
  double cor1_stat = 0.0;    // RMS of |N^{-1} sum f(X^i) - E[f|Z]|
};

struct ChaosResult {
  std::vector<ChaosRecord> records;
  double slope_err2 = 0.0;  // log-log slope vs N (expected near -1)
  double slope_cor1 = 0.0;  // log-log slope vs N (expected near -1/2)
};

// For each N, runs the coupled pair (finite-N deterministic filter,
// mean-field ensemble) from shared initial particles on a shared path.
ChaosResult run_chaos(const ExperimentConfig& cfg, int threads = 1);

// ---------------------------------------------------------------------------
// Importance sampling vs feedback control (static example)

struct MseRecord {
  int n = 0;
  int d = 0;
  Estimator estimator = Estimator::PF;
  double mse = 0.0;
  double std_err = 0.0;
  int64_t trials = 0;      // trials actually aggregated
  std::string flag;        // "DegenerateWeights" when PF weights underflowed
};

// Exact mean-squared error of the modified (exact-denominator) importance
// sampling estimator: sigma^2 / N * (3 * 2^d - 1/2).
double mse_pf_exact(int d, int n, double sigma);

// Self-normalized importance weights from log weights.  Returns nullopt when
// every raw weight underflows to zero (the estimator as written would divide
// zero by zero); otherwise the weights sum to one.
std::optional<Eigen::VectorXd> self_normalized_weights(
    const Eigen::VectorXd& logw);

// Monte Carlo comparison of the estimators in cfg.estimators on the static
// model, for every (N, d) in cfg.n_list x cfg.d_list.  Every estimator sees
// the same initial samples and observation path per trial, so toggling one
// estimator never changes another's numbers.
std::vector<MseRecord> run_static_compare(const ExperimentConfig& cfg,
                                          int threads = 1);

// Empirical-moment recursion for the static-model FPF.  With A = 0 and
// sigma_b = 0 the per-particle update is affine, so the ensemble moments
// close exactly; this propagates them without touching the particles.
GaussianBelief static_fpf_propagate_moments(const LinearGaussianModel& model,
                                            GaussianBelief moments,
                                            const Eigen::MatrixXd& dz_path,
                                            double dt);

// ---------------------------------------------------------------------------
// (N, d) sweep and level sets

struct LevelPoint {
  Estimator estimator = Estimator::PF;
  double level = 0.0;
  int d = 0;
  double n_star = 0.0;  // minimal N reaching the MSE level (log-log fit)
};

struct SweepResult {
  std::vector<MseRecord> records;
  std::vector<LevelPoint> levels;
  double pf_logn_vs_d_slope = 0.0;      // log N* vs d (exponential growth)
  double fpf_logn_vs_logd_slope = 0.0;  // log N* vs log d (polynomial growth)
};

SweepResult run_sweep(const ExperimentConfig& cfg, int threads = 1);

}  // namespace otfpf
