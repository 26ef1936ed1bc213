#include "otfpf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otfpf/errors.hpp"
#include "otfpf/parallel.hpp"
#include "otfpf/rng.hpp"

namespace otfpf {

namespace {

constexpr double kChaosClip = 5.0;  // clip bound of the Cor.-1 test function

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Least-squares decay rate of log(err) over t >= t_min (err floored away
// from zero so an exactly-converged tail does not produce -inf).
double fit_tail_rate(const std::vector<double>& t,
                     const std::vector<double>& err, double t_min) {
  std::vector<double> xs, ys;
  for (size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_min) continue;
    xs.push_back(t[k]);
    ys.push_back(std::log(std::max(err[k], 1e-300)));
  }
  return -fit_slope(xs, ys);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::PF: return "PF";
    case Estimator::ModifiedPF: return "ModifiedPF";
    case Estimator::FPF: return "FPF";
  }
  return "?";
}

Estimator estimator_from_string(const std::string& name) {
  if (name == "PF") return Estimator::PF;
  if (name == "ModifiedPF") return Estimator::ModifiedPF;
  if (name == "FPF") return Estimator::FPF;
  throw ConfigError("static.estimators: unknown estimator '" + name + "'");
}

TimeGrid ExperimentConfig::grid() const {
  if (!(dt > 0.0)) throw ConfigError("grid.dt: must be positive");
  if (!(horizon > 0.0)) throw ConfigError("grid.horizon: must be positive");
  const auto steps = static_cast<int64_t>(std::llround(horizon / dt));
  if (steps < 1 || std::abs(steps * dt - horizon) > 1e-6 * horizon)
    throw ConfigError("grid.horizon: must be an integer multiple of grid.dt");
  return TimeGrid(dt, steps);
}

LinearGaussianModel make_static_model(int d, double sigma) {
  if (d < 1) throw ConfigError("d_list: dimensions must be positive");
  if (!(sigma > 0.0)) throw ConfigError("static.sigma: must be positive");
  return LinearGaussianModel(
      Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Identity(d, d),
      Eigen::MatrixXd::Zero(d, 1),
      sigma * sigma * Eigen::MatrixXd::Identity(d, d),
      Eigen::VectorXd::Zero(d),
      SymMatrix(sigma * sigma * Eigen::MatrixXd::Identity(d, d)));
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("fit_slope: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double expected_clipped(double mu, double var, double c) {
  if (var <= 0.0) return std::clamp(mu, -c, c);
  const double s = std::sqrt(var);
  const double alpha = (-c - mu) / s;
  const double beta = (c - mu) / s;
  return -c * normal_cdf(alpha) + c * (1.0 - normal_cdf(beta)) +
         mu * (normal_cdf(beta) - normal_cdf(alpha)) -
         s * (normal_pdf(beta) - normal_pdf(alpha));
}

// ---------------------------------------------------------------------------

DecayResult run_error_decay(const ExperimentConfig& cfg, int threads) {
  if (!cfg.model) throw ConfigError("model: required for the decay experiment");
  if (cfg.n_list.empty()) throw ConfigError("n_list: required");
  if (cfg.variants.empty()) throw ConfigError("variants: required");
  const LinearGaussianModel& model = *cfg.model;
  const TimeGrid grid = cfg.grid();
  const int n = cfg.n_list.front();
  const FilterVariant variant = cfg.variants.front();
  if (n <= model.state_dim())
    throw ConfigError("n_list: error decay requires N > d");

  const int64_t trials = cfg.trials;
  const auto steps = grid.steps;
  std::vector<double> mean_rates(trials), cov_rates(trials);
  std::vector<double> t_axis(steps + 1);
  for (int64_t k = 0; k <= steps; ++k) t_axis[k] = grid.t(k);

  DecayResult out{t_axis, {}, {}, {}, {}, 0, 0, Trajectory(grid)};

  parallel_for(trials, threads, [&](int64_t trial) {
    const PathRecord path =
        simulate_truth_obs(model, grid, cfg.master_seed, trial);
    Ensemble ens(sample_prior_particles(model, n, cfg.master_seed, trial,
                                        cfg.exact_moments),
                 variant);
    GaussianBelief belief{model.m0(), model.sigma0()};
    const uint64_t dim_tag = static_cast<uint64_t>(model.state_dim());

    std::vector<double> err_mean(steps + 1), err_cov(steps + 1);
    Trajectory traj(grid);
    const bool keep_traj = trial == 0;
    if (keep_traj) {
      traj.path = path;
      traj.kalman.reserve(steps + 1);
      traj.ensemble.reserve(steps + 1);
    }
    for (int64_t k = 0; k <= steps; ++k) {
      const GaussianBelief emp = empirical_moments(ens);
      err_mean[k] = (emp.mean - belief.mean).norm();
      err_cov[k] = (emp.cov.mat() - belief.cov.mat()).norm();
      if (keep_traj) {
        traj.kalman.push_back(belief);
        traj.ensemble.push_back(emp);
      }
      if (k == steps) break;
      const Eigen::VectorXd dz = path.dz.row(k).transpose();
      const ParticleRng rng{cfg.master_seed, dim_tag,
                            static_cast<uint64_t>(trial),
                            static_cast<uint32_t>(k)};
      ens = step_filter(model, ens, dz, grid.dt, rng);
      belief = kalman_step(model, belief, dz, grid.dt);
    }
    const double t_half = 0.5 * grid.horizon();
    mean_rates[trial] = fit_tail_rate(t_axis, err_mean, t_half);
    cov_rates[trial] = fit_tail_rate(t_axis, err_cov, t_half);
    if (keep_traj) {
      out.err_mean = std::move(err_mean);
      out.err_cov = std::move(err_cov);
      out.trajectory = std::move(traj);
    }
  });

  out.mean_rates = std::move(mean_rates);
  out.cov_rates = std::move(cov_rates);
  out.median_mean_rate = median(out.mean_rates);
  out.median_cov_rate = median(out.cov_rates);
  return out;
}

// ---------------------------------------------------------------------------

ChaosResult run_chaos(const ExperimentConfig& cfg, int threads) {
  if (!cfg.model) throw ConfigError("model: required for the chaos experiment");
  if (cfg.n_list.size() < 2)
    throw ConfigError("n_list: chaos experiment needs at least two sizes");
  const LinearGaussianModel& model = *cfg.model;
  const TimeGrid grid = cfg.grid();
  const int d = model.state_dim();
  for (int n : cfg.n_list)
    if (n <= d)
      throw SingularCovariance(
          "run_chaos: N <= d makes the empirical covariance singular");

  const int64_t trials = cfg.trials;
  ChaosResult out;
  for (int n : cfg.n_list) {
    std::vector<double> err2(trials), cor1(trials);
    parallel_for(trials, threads, [&](int64_t trial) {
      const PathRecord path =
          simulate_truth_obs(model, grid, cfg.master_seed, trial);
      const Eigen::MatrixXd init =
          sample_prior_particles(model, n, cfg.master_seed, trial);
      Ensemble ens(init, FilterVariant::DeterministicOptimalFPF);
      MeanFieldEnsemble mfe{init};
      GaussianBelief belief{model.m0(), model.sigma0()};
      for (int64_t k = 0; k < grid.steps; ++k) {
        const Eigen::VectorXd dz = path.dz.row(k).transpose();
        ens = step_det_fpf(model, ens, dz, grid.dt);
        mfe = step_mean_field(model, mfe, belief, dz, grid.dt);
        belief = kalman_step(model, belief, dz, grid.dt);
      }
      err2[trial] =
          (ens.particles - mfe.particles).rowwise().squaredNorm().mean();
      double fsum = 0.0;
      for (int i = 0; i < n; ++i)
        fsum += std::clamp(ens.particles(i, 0), -kChaosClip, kChaosClip);
      const double exact =
          expected_clipped(belief.mean[0], belief.cov(0, 0), kChaosClip);
      cor1[trial] = std::abs(fsum / n - exact);
    });
    ChaosRecord rec;
    rec.n = n;
    rec.trials = trials;
    double s = 0, s2 = 0, c2 = 0;
    for (int64_t i = 0; i < trials; ++i) {
      s += err2[i];
      s2 += err2[i] * err2[i];
      c2 += cor1[i] * cor1[i];
    }
    rec.err2_mean = s / trials;
    const double var =
        trials > 1 ? (s2 - s * s / trials) / (trials - 1) : 0.0;
    rec.err2_stderr = std::sqrt(std::max(var, 0.0) / trials);
    rec.cor1_stat = std::sqrt(c2 / trials);
    out.records.push_back(rec);
  }

  std::vector<double> ln_n, ln_e2, ln_c;
  for (const ChaosRecord& r : out.records) {
    ln_n.push_back(std::log(r.n));
    ln_e2.push_back(std::log(std::max(r.err2_mean, 1e-300)));
    ln_c.push_back(std::log(std::max(r.cor1_stat, 1e-300)));
  }
  out.slope_err2 = fit_slope(ln_n, ln_e2);
  out.slope_cor1 = fit_slope(ln_n, ln_c);
  return out;
}

// ---------------------------------------------------------------------------

double mse_pf_exact(int d, int n, double sigma) {
  if (d < 1 || n < 1 || !(sigma > 0.0))
    throw ConfigError("mse_pf_exact: need d >= 1, n >= 1, sigma > 0");
  return sigma * sigma / n * (3.0 * std::pow(2.0, d) - 0.5);
}

std::optional<Eigen::VectorXd> self_normalized_weights(
    const Eigen::VectorXd& logw) {
  const double lmax = logw.maxCoeff();
  if (!(std::exp(lmax) > 0.0)) return std::nullopt;
  Eigen::VectorXd w = (logw.array() - lmax).exp();
  w /= w.sum();
  return w;
}

GaussianBelief static_fpf_propagate_moments(const LinearGaussianModel& model,
                                            GaussianBelief moments,
                                            const Eigen::MatrixXd& dz_path,
                                            double dt) {
  const int d = model.state_dim();
  const int m = model.obs_dim();
  // X' = (I - dt/2 K H) X + K dz - dt/2 K H m: an affine map, so the sample
  // moments transform exactly.  Workspaces are hoisted out of the hot loop.
  Eigen::MatrixXd cov = moments.cov.mat();
  Eigen::MatrixXd gain(d, m), f(d, d), tmp(d, d);
  Eigen::VectorXd innov(m);
  for (Eigen::Index k = 0; k < dz_path.rows(); ++k) {
    gain.noalias() = cov * model.ht_rinv();
    f = Eigen::MatrixXd::Identity(d, d);
    f.noalias() -= 0.5 * dt * gain * model.h();
    innov = dz_path.row(k).transpose();
    innov.noalias() -= model.h() * moments.mean * dt;
    moments.mean.noalias() += gain * innov;
    tmp.noalias() = f * cov;
    cov.noalias() = tmp * f.transpose();
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        cov(i, j) = cov(j, i) = 0.5 * (cov(i, j) + cov(j, i));
  }
  moments.cov = SymMatrix(std::move(cov));
  return moments;
}

namespace {

struct TrialOutcome {
  double sq_err = 0.0;
  bool valid = false;
};

}  // namespace

std::vector<MseRecord> run_static_compare(const ExperimentConfig& cfg,
                                          int threads) {
  if (cfg.n_list.empty()) throw ConfigError("n_list: required");
  if (cfg.d_list.empty()) throw ConfigError("d_list: required");
  if (cfg.estimators.empty())
    throw ConfigError("static.estimators: must not be empty");
  const double sigma = cfg.static_sigma;
  const TimeGrid grid = cfg.grid();
  const int64_t trials = cfg.trials;
  const bool wants_fpf =
      std::find(cfg.estimators.begin(), cfg.estimators.end(),
                Estimator::FPF) != cfg.estimators.end();
  int n_max = 0;
  for (int n : cfg.n_list) {
    if (n < 1) throw ConfigError("n_list: sizes must be positive");
    if (wants_fpf && n < 2)
      throw ConfigError("n_list: the FPF estimator needs N >= 2");
    n_max = std::max(n_max, n);
  }
  const size_t n_est = cfg.estimators.size();
  const size_t n_cells = cfg.n_list.size() * n_est;

  std::vector<MseRecord> records;
  for (int d : cfg.d_list) {
    const LinearGaussianModel model = make_static_model(d, sigma);
    const Eigen::VectorXd a =
        Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
    std::vector<std::vector<TrialOutcome>> slots(
        n_cells, std::vector<TrialOutcome>(trials));

    parallel_for(trials, threads, [&](int64_t trial) {
      // Common random numbers: one prior sample pool and one observation
      // path per (d, trial); every estimator and every N reads prefixes of
      // the same pool, so toggling a cell never changes another.
      const PathRecord path =
          simulate_truth_obs(model, grid, cfg.master_seed, trial);
      const Eigen::MatrixXd pool =
          sample_prior_particles(model, n_max, cfg.master_seed, trial);
      const Eigen::VectorXd z1 = path.dz.colwise().sum().transpose();
      const double s2 = sigma * sigma;
      const double exact = s2 / (s2 + s2) * a.dot(z1);

      Eigen::VectorXd logw(n_max);
      for (int i = 0; i < n_max; ++i)
        logw[i] = -(z1 - pool.row(i).transpose()).squaredNorm() / (2.0 * s2);
      const Eigen::VectorXd fvals = pool * a;

      for (size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const int n = cfg.n_list[ni];
        for (size_t e = 0; e < n_est; ++e) {
          TrialOutcome& slot = slots[ni * n_est + e][trial];
          switch (cfg.estimators[e]) {
            case Estimator::PF: {
              // A trial where every raw weight underflows is flagged as
              // degenerate instead of dividing zero by zero.
              const auto w = self_normalized_weights(logw.head(n));
              if (!w) break;
              slot.sq_err = w->dot(fvals.head(n)) - exact;
              slot.sq_err *= slot.sq_err;
              slot.valid = true;
              break;
            }
            case Estimator::ModifiedPF: {
              // Exact-denominator weights: E[exp(-|Z-X|^2 / 2s^2) | Z] has
              // a Gaussian closed form.
              const double log_denom = 0.5 * d * std::log(0.5) -
                                       z1.squaredNorm() / (4.0 * s2);
              double est = 0.0;
              for (int i = 0; i < n; ++i)
                est += std::exp(logw[i] - log_denom) * fvals[i];
              est /= n;
              slot.sq_err = (est - exact) * (est - exact);
              slot.valid = true;
              break;
            }
            case Estimator::FPF: {
              const GaussianBelief m1 = static_fpf_propagate_moments(
                  model, empirical_moments(pool.topRows(n)), path.dz,
                  grid.dt);
              const double est = a.dot(m1.mean);
              slot.sq_err = (est - exact) * (est - exact);
              slot.valid = true;
              break;
            }
          }
        }
      }
    });

    for (size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
      for (size_t e = 0; e < n_est; ++e) {
        MseRecord rec;
        rec.n = cfg.n_list[ni];
        rec.d = d;
        rec.estimator = cfg.estimators[e];
        int64_t m = 0;
        double s = 0, sq = 0;
        for (const TrialOutcome& o : slots[ni * n_est + e]) {
          if (!o.valid) continue;
          ++m;
          s += o.sq_err;
          sq += o.sq_err * o.sq_err;
        }
        rec.trials = m;
        if (m > 0) rec.mse = s / m;
        if (m > 1)
          rec.std_err =
              std::sqrt(std::max((sq - s * s / m) / (m - 1), 0.0) / m);
        if (m < trials) rec.flag = "DegenerateWeights";
        records.push_back(rec);
      }
    }
  }
  return records;
}

// ---------------------------------------------------------------------------

SweepResult run_sweep(const ExperimentConfig& cfg, int threads) {
  ExperimentConfig sweep_cfg = cfg;
  if (sweep_cfg.estimators.empty())
    sweep_cfg.estimators = {Estimator::PF, Estimator::FPF};
  if (cfg.mse_levels.empty())
    throw ConfigError("static.levels: must not be empty");

  SweepResult out;
  out.records = run_static_compare(sweep_cfg, threads);
  // A single-cell grid degenerates to the plain comparison; level sets and
  // growth slopes need at least two ensemble sizes to fit.

  // N*(level, d): solve the per-(estimator, d) log-log fit of mse vs N for
  // the N reaching the target level.  MSE scales like 1/N for both
  // estimators, so the fit is nearly exact and extrapolates safely.
  for (Estimator est : sweep_cfg.estimators) {
    for (double level : cfg.mse_levels) {
      for (int d : cfg.d_list) {
        std::vector<double> ln_n, ln_mse;
        for (const MseRecord& r : out.records) {
          if (r.estimator != est || r.d != d) continue;
          if (!(r.mse > 0.0) || r.trials == 0) continue;
          ln_n.push_back(std::log(r.n));
          ln_mse.push_back(std::log(r.mse));
        }
        if (ln_n.size() < 2) continue;
        const double beta = fit_slope(ln_n, ln_mse);
        double sn = 0, sm = 0;
        for (size_t i = 0; i < ln_n.size(); ++i) {
          sn += ln_n[i];
          sm += ln_mse[i];
        }
        const double alpha = sm / ln_mse.size() - beta * sn / ln_n.size();
        LevelPoint p;
        p.estimator = est;
        p.level = level;
        p.d = d;
        p.n_star = std::exp((std::log(level) - alpha) / beta);
        out.levels.push_back(p);
      }
    }
  }

  auto level_slope = [&](Estimator est, bool log_d) {
    std::vector<double> slopes;
    for (double level : cfg.mse_levels) {
      std::vector<double> xs, ys;
      for (const LevelPoint& p : out.levels) {
        if (p.estimator != est || p.level != level) continue;
        xs.push_back(log_d ? std::log(double(p.d)) : double(p.d));
        ys.push_back(std::log(p.n_star));
      }
      if (xs.size() >= 2) slopes.push_back(fit_slope(xs, ys));
    }
    return median(slopes);
  };
  const auto& ests = sweep_cfg.estimators;
  if (std::find(ests.begin(), ests.end(), Estimator::PF) != ests.end())
    out.pf_logn_vs_d_slope = level_slope(Estimator::PF, false);
  if (std::find(ests.begin(), ests.end(), Estimator::FPF) != ests.end())
    out.fpf_logn_vs_logd_slope = level_slope(Estimator::FPF, true);
  return out;
}

}  // namespace otfpf
