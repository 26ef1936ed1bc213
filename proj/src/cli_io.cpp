#include "otfpf/cli_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "otfpf/errors.hpp"
#include "otfpf/matrix_eq.hpp"
#include "otfpf/rng.hpp"

namespace otfpf {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError(key + ": " + what);
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    fail(key, "expected a nested numeric array");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      fail(key, "rows must have equal length");
    for (size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) fail(key, "expected numeric entries");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& key) {
  if (!j.is_array()) fail(key, "expected a numeric array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(key, "expected numeric entries");
    v[i] = j[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

double positive_number(const json& j, const std::string& key) {
  if (!j.is_number()) fail(key, "expected a number");
  const double v = j.get<double>();
  if (!(v > 0.0)) fail(key, "must be positive");
  return v;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  ExperimentConfig cfg;

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (!g.is_object()) fail("grid", "expected an object");
    if (g.contains("dt")) cfg.dt = positive_number(g.at("dt"), "grid.dt");
    if (g.contains("horizon"))
      cfg.horizon = positive_number(g.at("horizon"), "grid.horizon");
  }
  cfg.grid();  // validate dt/horizon consistency early

  if (j.contains("variants")) {
    cfg.variants.clear();
    for (const auto& v : j.at("variants"))
      cfg.variants.push_back(filter_variant_from_string(v.get<std::string>()));
    if (cfg.variants.empty()) fail("variants", "must not be empty");
  }
  if (j.contains("n_list")) {
    cfg.n_list.clear();
    for (const auto& v : j.at("n_list")) {
      if (!v.is_number_integer() || v.get<int64_t>() < 1)
        fail("n_list", "entries must be positive integers");
      cfg.n_list.push_back(v.get<int>());
    }
  }
  if (j.contains("d_list")) {
    cfg.d_list.clear();
    for (const auto& v : j.at("d_list")) {
      if (!v.is_number_integer() || v.get<int64_t>() < 1)
        fail("d_list", "entries must be positive integers");
      cfg.d_list.push_back(v.get<int>());
    }
  }
  if (j.contains("trials")) {
    if (!j.at("trials").is_number_integer() || j.at("trials").get<int64_t>() < 1)
      fail("trials", "must be a positive integer");
    cfg.trials = j.at("trials").get<int64_t>();
  }
  if (j.contains("seed")) {
    const json& sd = j.at("seed");
    if (!sd.is_number_unsigned() &&
        !(sd.is_number_integer() && sd.get<int64_t>() >= 0))
      fail("seed", "must be a non-negative integer");
    cfg.master_seed = sd.get<uint64_t>();
  }

  if (j.contains("static")) {
    const json& s = j.at("static");
    if (!s.is_object()) fail("static", "expected an object");
    if (s.contains("sigma"))
      cfg.static_sigma = positive_number(s.at("sigma"), "static.sigma");
    if (s.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& e : s.at("estimators"))
        cfg.estimators.push_back(estimator_from_string(e.get<std::string>()));
      if (cfg.estimators.empty()) fail("static.estimators", "must not be empty");
    }
    if (s.contains("levels")) {
      cfg.mse_levels.clear();
      for (const auto& l : s.at("levels"))
        cfg.mse_levels.push_back(positive_number(l, "static.levels"));
    }
  }

  if (j.contains("init")) {
    const json& in = j.at("init");
    if (!in.is_object()) fail("init", "expected an object");
    if (in.contains("exact_moments")) {
      if (!in.at("exact_moments").is_boolean())
        fail("init.exact_moments", "expected a boolean");
      cfg.exact_moments = in.at("exact_moments").get<bool>();
    }
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    if (!m.is_object()) fail("model", "expected an object");
    for (const char* req : {"a", "h", "sigma_b", "m0", "sigma0"})
      if (!m.contains(req))
        fail(std::string("model.") + req, "missing required key");
    const Eigen::MatrixXd a = parse_matrix(m.at("a"), "model.a");
    const Eigen::MatrixXd h = parse_matrix(m.at("h"), "model.h");
    const Eigen::MatrixXd sigma_b = parse_matrix(m.at("sigma_b"), "model.sigma_b");
    const Eigen::VectorXd m0 = parse_vector(m.at("m0"), "model.m0");
    const Eigen::MatrixXd sigma0 = parse_matrix(m.at("sigma0"), "model.sigma0");
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(h.rows(), h.rows());
    if (m.contains("r")) r = parse_matrix(m.at("r"), "model.r");
    if (sigma0.rows() != sigma0.cols()) fail("model.sigma0", "must be square");
    cfg.model.emplace(a, h, sigma_b, r, m0, SymMatrix(sigma0));
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  json j;
  j["grid"] = {{"dt", cfg.dt}, {"horizon", cfg.horizon}};
  json variants = json::array();
  for (FilterVariant v : cfg.variants) variants.push_back(to_string(v));
  j["variants"] = variants;
  j["n_list"] = cfg.n_list;
  j["d_list"] = cfg.d_list;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.master_seed;
  json estimators = json::array();
  for (Estimator e : cfg.estimators) estimators.push_back(to_string(e));
  j["static"] = {{"sigma", cfg.static_sigma},
                 {"estimators", estimators},
                 {"levels", cfg.mse_levels}};
  j["init"] = {{"exact_moments", cfg.exact_moments}};
  if (cfg.model) {
    j["model"] = {{"a", matrix_to_json(cfg.model->a())},
                  {"h", matrix_to_json(cfg.model->h())},
                  {"sigma_b", matrix_to_json(cfg.model->sigma_b())},
                  {"r", matrix_to_json(cfg.model->r())},
                  {"m0", vector_to_json(cfg.model->m0())},
                  {"sigma0", matrix_to_json(cfg.model->sigma0().mat())}};
  }
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = emit_config(cfg);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  json j;
  j["config_hash"] = m.config_hash;
  j["master_seed"] = m.master_seed;
  j["tool_version"] = m.tool_version;
  j["outputs"] = m.outputs;
  j["runtime_seconds"] = m.runtime_seconds;
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,kind,component,value\n";
  const int d = static_cast<int>(traj.path.x.cols());
  for (size_t k = 0; k < traj.kalman.size(); ++k) {
    const std::string t = fmt17(traj.grid.t(static_cast<int64_t>(k)));
    for (int c = 0; c < d; ++c)
      os << t << ",truth," << c + 1 << "," << fmt17(traj.path.x(k, c)) << "\n";
    for (int c = 0; c < d; ++c)
      os << t << ",kalman_mean," << c + 1 << ","
         << fmt17(traj.kalman[k].mean[c]) << "\n";
    for (int c = 0; c < d; ++c)
      os << t << ",emp_mean," << c + 1 << ","
         << fmt17(traj.ensemble[k].mean[c]) << "\n";
    os << t << ",err_mean,0,"
       << fmt17((traj.ensemble[k].mean - traj.kalman[k].mean).norm()) << "\n";
    os << t << ",err_cov_fro,0,"
       << fmt17((traj.ensemble[k].cov.mat() - traj.kalman[k].cov.mat()).norm())
       << "\n";
  }
}

void write_path_csv(std::ostream& os, const PathRecord& path, double dt) {
  const int d = static_cast<int>(path.x.cols());
  const int m = static_cast<int>(path.dz.cols());
  os << "t";
  for (int c = 0; c < d; ++c) os << ",x_" << c + 1;
  for (int c = 0; c < m; ++c) os << ",dz_" << c + 1;
  os << "\n";
  for (Eigen::Index k = 0; k < path.x.rows(); ++k) {
    os << fmt17(dt * static_cast<double>(k));
    for (int c = 0; c < d; ++c) os << "," << fmt17(path.x(k, c));
    for (int c = 0; c < m; ++c) {
      os << ",";
      if (k < path.dz.rows()) os << fmt17(path.dz(k, c));
    }
    os << "\n";
  }
}

void write_mse_csv(std::ostream& os, const std::vector<MseRecord>& records) {
  os << "n,d,estimator,mse,std_err,trials,flag\n";
  for (const MseRecord& r : records)
    os << r.n << "," << r.d << "," << to_string(r.estimator) << ","
       << fmt17(r.mse) << "," << fmt17(r.std_err) << "," << r.trials << ","
       << r.flag << "\n";
}

void write_chaos_csv(std::ostream& os, const ChaosResult& result) {
  os << "n,trials,err2_mean,err2_stderr,cor1_stat\n";
  for (const ChaosRecord& r : result.records)
    os << r.n << "," << r.trials << "," << fmt17(r.err2_mean) << ","
       << fmt17(r.err2_stderr) << "," << fmt17(r.cor1_stat) << "\n";
}

void write_levels_csv(std::ostream& os, const std::vector<LevelPoint>& levels) {
  os << "estimator,level,d,n_star\n";
  for (const LevelPoint& p : levels)
    os << to_string(p.estimator) << "," << fmt17(p.level) << "," << p.d << ","
       << fmt17(p.n_star) << "\n";
}

// ---------------------------------------------------------------------------

namespace {

// Deterministic random test matrices for the self-check.
Eigen::MatrixXd check_matrix(uint64_t stream, uint32_t step, int rows,
                             int cols) {
  constexpr uint64_t kCheckSeed = 0x5e1fc3ecull;
  Eigen::MatrixXd m(rows, cols);
  const Eigen::VectorXd v =
      normal_vector(kCheckSeed, stream, step, rows * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
  return m;
}

SymMatrix check_spd(uint64_t stream, uint32_t step, int d) {
  const Eigen::MatrixXd m = check_matrix(stream, step, d, d);
  return SymMatrix(m * m.transpose() / double(d) +
                   0.2 * Eigen::MatrixXd::Identity(d, d));
}

struct Check {
  std::string name;
  double worst = 0.0;
  double tol = 0.0;
  bool ok() const { return worst <= tol; }
};

}  // namespace

bool run_self_checks(std::ostream& os) {
  std::vector<Check> checks = {
      {"sqrt_ricc defining equation", 0.0, 1e-10},
      {"omega skew symmetry", 0.0, 0.0},
      {"omega reconstruction of sqrt_ricc", 0.0, 1e-9},
      {"pseudo-inverse identities", 0.0, 1e-9},
      {"singular gain feasibility", 0.0, 1e-9},
  };
  const int reps = 20;
  for (int d : {1, 2, 3, 5, 10}) {
    for (int rep = 0; rep < reps; ++rep) {
      const uint32_t step = static_cast<uint32_t>(rep);
      const uint64_t tag = static_cast<uint64_t>(d);
      const LinearGaussianModel model(
          check_matrix(stream_id(StreamKind::TruthProcess, tag, 1), step, d, d),
          check_matrix(stream_id(StreamKind::TruthProcess, tag, 2), step, d, d),
          check_matrix(stream_id(StreamKind::TruthProcess, tag, 3), step, d, d),
          Eigen::VectorXd::Zero(d), SymMatrix::identity(d));
      const SymMatrix q =
          check_spd(stream_id(StreamKind::TruthProcess, tag, 4), step, d);

      const SymMatrix ricc = ricc_rhs(model, q);
      const SymMatrix g = sqrt_ricc(model, q);
      const double res_g =
          (g.mat() * q.mat() + q.mat() * g.mat() - ricc.mat()).norm() /
          (1.0 + ricc.mat().norm());
      checks[0].worst = std::max(checks[0].worst, res_g);

      const Eigen::MatrixXd omega = solve_omega(model, q);
      checks[1].worst =
          std::max(checks[1].worst, (omega + omega.transpose()).norm());
      const Eigen::MatrixXd q_inv = q.mat().inverse();
      const Eigen::MatrixXd recon = model.a() -
                                    0.5 * q.mat() * model.ht_rinv_h() +
                                    0.5 * model.sigma_big() * q_inv +
                                    omega * q_inv;
      checks[2].worst = std::max(
          checks[2].worst, (recon - g.mat()).norm() / (1.0 + g.mat().norm()));

      // Rank-deficient input for the pseudo-inverse and singular gain.
      const int rank = std::max(d - 1, 1);
      const Eigen::MatrixXd low =
          check_matrix(stream_id(StreamKind::TruthProcess, tag, 5), step, d,
                       rank);
      const SymMatrix s(low * low.transpose());
      const PseudoInverse pi = pseudo_inverse(s);
      double mp = 0.0;
      mp = std::max(mp, (pi.pinv.mat() * s.mat() * pi.pinv.mat() -
                         pi.pinv.mat()).norm());
      mp = std::max(mp,
                    (s.mat() * pi.pinv.mat() * s.mat() - s.mat()).norm());
      mp = std::max(mp, (pi.p_range.mat() + pi.p_kernel.mat() -
                         Eigen::MatrixXd::Identity(d, d)).norm());
      mp = std::max(mp, (pi.pinv.mat() * s.mat() - pi.p_range.mat()).norm());
      checks[3].worst = std::max(checks[3].worst, mp / (1.0 + s.mat().norm()));

      const SingularGain sg = solve_singular_gain(model, s);
      const double feas =
          (sg.g.mat() * s.mat() + s.mat() * sg.g.mat() +
           sg.sigma * sg.sigma.transpose() - ricc_rhs(model, s).mat())
              .norm() /
          (1.0 + ricc_rhs(model, s).mat().norm());
      checks[4].worst = std::max(checks[4].worst, feas);
    }
  }

  bool all_ok = true;
  os << "self-check residuals (d in {1,2,3,5,10}, " << reps
     << " random instances each)\n";
  for (const Check& c : checks) {
    all_ok = all_ok && c.ok();
    os << (c.ok() ? "  [ok]   " : "  [FAIL] ") << c.name << ": worst "
       << fmt17(c.worst) << " (tol " << fmt17(c.tol) << ")\n";
  }
  return all_ok;
}

}  // namespace otfpf
