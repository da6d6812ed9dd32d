#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "twotier/error.hpp"

namespace twotier {

// Energies are e^{R ΔR} in units of energy_unit joules; powers in energy_unit per second.
struct MfgConfig {
  int num_sbs = 400;
  double own_gain = 1e-3;
  double cross_gain = 1e-3;
  double target_sinr = 2e-3;
  double noise = 1e-5;         // W
  double energy_unit = 1e-6;   // J
  double sigma = 1.0;
  int r_max = 40;
  int t_max = 1000;
  double dr = 0.025;
  double dt = 4e-5;
  double slot_duration = 5e-3;  // s
  double relaxation = 0.9;      // weight kept on the previous power surface
  int max_iterations = 500;
  double tolerance = 1e-6;
  // Default initial density: Gaussian in log-energy R ΔR, zero at both edges.
  double initial_log_energy_mean = -0.3;
  double initial_log_energy_spread = 0.25;
  std::vector<double> initial_density;

  int width() const { return 2 * r_max + 1; }
  double lambda_bar() const { return target_sinr * cross_gain * num_sbs; }
  double noise_model() const { return noise / energy_unit; }
  double log_energy(int k) const { return (k - r_max) * dr; }
  double power_cap(int k) const { return std::exp(log_energy(k)) / slot_duration; }
  double stability_number() const {
    return sigma * sigma * dt * std::exp(2.0 * r_max * dr) / (dr * dr);
  }

  void validate() const {
    require(num_sbs >= 1, "mfg.num_sbs must be >= 1");
    require(own_gain > 0.0 && cross_gain >= 0.0, "mfg gains must be positive");
    require(target_sinr >= 0.0 && noise >= 0.0, "mfg.target_sinr and mfg.noise must be >= 0");
    require(energy_unit > 0.0, "mfg.energy_unit must be > 0");
    require(sigma >= 0.0, "mfg.sigma must be >= 0");
    require(r_max >= 2 && t_max >= 1, "mfg.r_max must be >= 2 and mfg.t_max >= 1");
    require(dr > 0.0 && dt > 0.0 && slot_duration > 0.0, "mfg step sizes must be > 0");
    require(dr * dr > dt, "mfg: (dr)^2 must exceed dt");
    require(relaxation >= 0.0 && relaxation <= 1.0, "mfg.relaxation must lie in [0,1]");
    require(max_iterations >= 1 && tolerance > 0.0, "mfg.max_iterations and mfg.tolerance must be positive");
    if (!initial_density.empty()) {
      require(static_cast<int>(initial_density.size()) == width(), "mfg.initial_density must have 2*r_max+1 entries");
      double mass = 0.0;
      for (double v : initial_density) {
        require(v >= 0.0, "mfg.initial_density must be >= 0");
        mass += v * dr;
      }
      require(std::abs(mass - 1.0) <= 1e-8, "mfg.initial_density must integrate to 1");
    } else {
      require(initial_log_energy_spread > 0.0, "mfg.initial_log_energy_spread must be > 0");
    }
  }
};

inline std::vector<double> initial_density(const MfgConfig& cfg) {
  if (!cfg.initial_density.empty()) return cfg.initial_density;
  const int n = cfg.width();
  std::vector<double> m(n, 0.0);
  double mass = 0.0;
  for (int k = 1; k < n - 1; ++k) {
    double z = (cfg.log_energy(k) - cfg.initial_log_energy_mean) / cfg.initial_log_energy_spread;
    m[k] = std::exp(-0.5 * z * z);
    mass += m[k] * cfg.dr;
  }
  require(mass > 0.0, "mfg: default initial density has no mass on the grid");
  for (double& v : m) v /= mass;
  return m;
}

struct MfgGrid {
  int rows = 0;
  int cols = 0;
  std::vector<double> U, m, p;  // row-major (t, R)
  std::vector<double> p_bar;

  MfgGrid() = default;
  MfgGrid(int r, int c) : rows(r), cols(c), U(r * c, 0.0), m(r * c, 0.0), p(r * c, 0.0), p_bar(r, 0.0) {}

  double* row(std::vector<double>& v, int t) { return v.data() + static_cast<size_t>(t) * cols; }
  const double* row(const std::vector<double>& v, int t) const { return v.data() + static_cast<size_t>(t) * cols; }
  double at(const std::vector<double>& v, int t, int k) const { return v[static_cast<size_t>(t) * cols + k]; }
};

struct MfgResult {
  MfgGrid grid;
  int iterations = 0;
  double final_change = 0.0;
  bool converged = false;
};

using Row = std::vector<double>;

inline Row fokker_planck_step(const Row& m_prev, const Row& p_prev, const MfgConfig& cfg) {
  const int n = cfg.width();
  require(static_cast<int>(m_prev.size()) == n && static_cast<int>(p_prev.size()) == n,
          "fokker_planck_step: rows must have 2*r_max+1 entries");
  const double a = cfg.dt / (2.0 * cfg.dr);
  const double b = cfg.sigma * cfg.sigma * cfg.dt / (2.0 * cfg.dr * cfg.dr);
  Row m(n, 0.0);
  for (int k = 1; k < n - 1; ++k) {
    double xm = cfg.log_energy(k - 1), x0 = cfg.log_energy(k), xp = cfg.log_energy(k + 1);
    double A2 = std::exp(-xp) * p_prev[k + 1] * m_prev[k + 1] - std::exp(-xm) * p_prev[k - 1] * m_prev[k - 1];
    double B2 = std::exp(-2 * xp) * m_prev[k + 1] - 2.0 * std::exp(-2 * x0) * m_prev[k] + std::exp(-2 * xm) * m_prev[k - 1];
    m[k] = m_prev[k] + a * A2 + b * B2;
    if (!std::isfinite(m[k]) || std::abs(m[k]) > 1e6) {
      std::ostringstream msg;
      msg << "fokker_planck_step: unstable update at R index " << k - cfg.r_max
          << "; diffusion stability number sigma^2 dt e^{2 r_max dr}/dr^2 = " << cfg.stability_number()
          << " (needs <= 1), reduce dt or dr*r_max";
      fail(ErrorKind::numerical, msg.str());
    }
    if (m[k] < 0.0) m[k] = 0.0;
  }
  m[n - 1] = 0.0;
  double interior = 0.0;
  for (int k = 1; k < n; ++k) interior += m[k];
  double edge = 1.0 / cfg.dr - interior;
  if (edge < 0.0) {
    double scale = (1.0 / cfg.dr) / interior;
    for (int k = 1; k < n; ++k) m[k] *= scale;
    edge = 0.0;
  }
  m[0] = edge;
  return m;
}

inline double mean_power(const Row& m, const Row& p, const MfgConfig& cfg) {
  double acc = 0.0;
  for (int k = 0; k < cfg.width(); ++k) acc += std::exp(cfg.log_energy(k)) * p[k] * m[k];
  return acc * cfg.dr;
}

inline Row hjb_backward_sweep(const Row& U_next, const Row& p_row, double p_bar, const MfgConfig& cfg) {
  const int n = cfg.width();
  require(static_cast<int>(U_next.size()) == n && static_cast<int>(p_row.size()) == n,
          "hjb_backward_sweep: rows must have 2*r_max+1 entries");
  const double g = cfg.own_gain;
  const double c = cfg.lambda_bar() * p_bar + cfg.target_sinr * cfg.noise_model();
  const double diff = cfg.sigma * cfg.sigma * cfg.dt / (2.0 * cfg.dr * cfg.dr);
  Row U(n, 0.0);
  for (int k = 1; k < n - 1; ++k) {
    double x = cfg.log_energy(k);
    double A1 = U_next[k + 1] - 2.0 * U_next[k] + U_next[k - 1];
    double pg = p_row[k] * g;
    double B1 = pg * pg - c * c;
    U[k] = U_next[k] + std::exp(-2.0 * x) * diff * A1 - cfg.dt * B1;
    if (!std::isfinite(U[k])) {
      std::ostringstream msg;
      msg << "hjb_backward_sweep: non-finite value at R index " << k - cfg.r_max
          << "; stability number " << cfg.stability_number();
      fail(ErrorKind::numerical, msg.str());
    }
  }
  const double top = cfg.log_energy(n - 1), bottom = cfg.log_energy(0);
  U[n - 1] = U[n - 2] + cfg.dr * (p_row[n - 2] - c / g) * 2.0 * g * g * std::exp(top);
  U[0] = U[1] + cfg.dr * 2.0 * g * c * std::exp(bottom);
  return U;
}

inline Row power_update(const Row& U, double p_bar, const MfgConfig& cfg) {
  const int n = cfg.width();
  const double g = cfg.own_gain;
  const double c = cfg.lambda_bar() * p_bar + cfg.target_sinr * cfg.noise_model();
  Row p(n, 0.0);
  for (int k = 1; k < n; ++k) {
    double dU = k < n - 1 ? (U[k + 1] - U[k - 1]) / (2.0 * cfg.dr) : (U[k] - U[k - 1]) / cfg.dr;
    double v = c / g + std::exp(-cfg.log_energy(k)) * dU / (2.0 * g * g);
    p[k] = std::min(std::max(v, 0.0), cfg.power_cap(k));
  }
  p[0] = 0.0;
  return p;
}

namespace detail {

inline void forward_pass(MfgGrid& G, const Row& m0, const MfgConfig& cfg) {
  const int n = cfg.width();
  std::copy(m0.begin(), m0.end(), G.row(G.m, 0));
  for (int t = 1; t <= cfg.t_max; ++t) {
    Row mp(G.row(G.m, t - 1), G.row(G.m, t - 1) + n), pp(G.row(G.p, t - 1), G.row(G.p, t - 1) + n);
    Row next = fokker_planck_step(mp, pp, cfg);
    std::copy(next.begin(), next.end(), G.row(G.m, t));
  }
  for (int t = 0; t <= cfg.t_max; ++t) {
    Row mr(G.row(G.m, t), G.row(G.m, t) + n), pr(G.row(G.p, t), G.row(G.p, t) + n);
    G.p_bar[t] = mean_power(mr, pr, cfg);
  }
}

inline void backward_pass(MfgGrid& G, const MfgConfig& cfg) {
  const int n = cfg.width();
  std::fill(G.row(G.U, cfg.t_max), G.row(G.U, cfg.t_max) + n, 0.0);
  for (int t = cfg.t_max; t >= 1; --t) {
    Row Un(G.row(G.U, t), G.row(G.U, t) + n), pr(G.row(G.p, t), G.row(G.p, t) + n);
    Row prev = hjb_backward_sweep(Un, pr, G.p_bar[t], cfg);
    std::copy(prev.begin(), prev.end(), G.row(G.U, t - 1));
  }
}

}  // namespace detail

inline MfgResult solve_mfg(const MfgConfig& cfg) {
  cfg.validate();
  const int n = cfg.width(), T = cfg.t_max;
  MfgResult res;
  res.grid = MfgGrid(T + 1, n);
  MfgGrid& G = res.grid;
  Row m0 = initial_density(cfg);
  for (int t = 0; t <= T; ++t)
    for (int k = 1; k < n; ++k) G.row(G.p, t)[k] = std::min(std::exp(cfg.log_energy(k)), cfg.power_cap(k));

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    detail::forward_pass(G, m0, cfg);
    detail::backward_pass(G, cfg);
    double max_change = 0.0, max_p = 0.0;
    for (int t = 0; t <= T; ++t) {
      Row Ur(G.row(G.U, t), G.row(G.U, t) + n);
      Row pn = power_update(Ur, G.p_bar[t], cfg);
      double* pr = G.row(G.p, t);
      for (int k = 0; k < n; ++k) {
        double blended = std::min(cfg.relaxation * pr[k] + (1.0 - cfg.relaxation) * pn[k], cfg.power_cap(k));
        if (k == 0) blended = 0.0;
        if (!std::isfinite(blended))
          fail(ErrorKind::numerical, "solve_mfg: non-finite power at iteration " + std::to_string(it));
        max_change = std::max(max_change, std::abs(blended - pr[k]));
        pr[k] = blended;
        max_p = std::max(max_p, std::abs(blended));
      }
    }
    res.iterations = it;
    res.final_change = max_p > 0.0 ? max_change / max_p : max_change;
    if (res.final_change < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  detail::forward_pass(G, m0, cfg);
  detail::backward_pass(G, cfg);
  return res;
}

struct MomentDriftReport {
  std::vector<double> residual;  // D(t) - p̄(t), t = 0..T-1
  std::vector<double> second_moment;
  double max_abs = 0.0;
  double rms = 0.0;
};

inline MomentDriftReport moment_drift_diagnostic(const MfgGrid& G, const MfgConfig& cfg) {
  MomentDriftReport rep;
  const int n = cfg.width();
  for (int t = 0; t < G.rows; ++t) {
    double e2 = 0.0;
    for (int k = 0; k < n; ++k) e2 += std::exp(2.0 * cfg.log_energy(k)) * G.at(G.m, t, k);
    rep.second_moment.push_back(e2 * cfg.dr);
  }
  double sq = 0.0;
  for (int t = 0; t + 1 < G.rows; ++t) {
    double D = -(rep.second_moment[t + 1] - rep.second_moment[t]) / cfg.dt;
    double r = D - G.p_bar[t];
    rep.residual.push_back(r);
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
    sq += r * r;
  }
  rep.rms = rep.residual.empty() ? 0.0 : std::sqrt(sq / rep.residual.size());
  return rep;
}

struct Remark3Report {
  double fraction_r_violations = 0.0;  // ∂R U > ε
  double fraction_t_violations = 0.0;  // ∂t U > ε
  double epsilon = 0.0;
};

inline Remark3Report remark3_diagnostic(const MfgGrid& G, const MfgConfig& cfg) {
  Remark3Report rep;
  double umax = 0.0;
  for (double v : G.U) umax = std::max(umax, std::abs(v));
  rep.epsilon = 1e-6 * umax;
  long total = 0, bad_r = 0, bad_t = 0;
  for (int t = 1; t + 1 < G.rows; ++t)
    for (int k = 1; k + 1 < G.cols; ++k) {
      double dR = (G.at(G.U, t, k + 1) - G.at(G.U, t, k - 1)) / (2.0 * cfg.dr);
      double dT = (G.at(G.U, t + 1, k) - G.at(G.U, t - 1, k)) / (2.0 * cfg.dt);
      ++total;
      if (dR > rep.epsilon) ++bad_r;
      if (dT > rep.epsilon) ++bad_t;
    }
  if (total > 0) {
    rep.fraction_r_violations = static_cast<double>(bad_r) / total;
    rep.fraction_t_violations = static_cast<double>(bad_t) / total;
  }
  return rep;
}

// Density-weighted SINR implied by the power policy, p g / (λ̄ p̄ / λ + N0), per time row.
inline std::vector<double> policy_sinr(const MfgGrid& G, const MfgConfig& cfg) {
  std::vector<double> out;
  const double lam = cfg.target_sinr;
  for (int t = 0; t < G.rows; ++t) {
    double denom = (lam > 0.0 ? cfg.lambda_bar() * G.p_bar[t] / lam : 0.0) + cfg.noise_model();
    double acc = 0.0;
    for (int k = 0; k < G.cols; ++k) acc += G.at(G.m, t, k) * G.at(G.p, t, k);
    out.push_back(denom > 0.0 ? acc * cfg.dr * cfg.own_gain / denom : 0.0);
  }
  return out;
}

// SINR seen by a typical SBS user when each of the other M-1 cells transmits the population mean power.
inline std::vector<double> population_sinr(const MfgGrid& G, const MfgConfig& cfg) {
  std::vector<double> out;
  for (int t = 0; t < G.rows; ++t) {
    double mean_p = 0.0;
    for (int k = 0; k < G.cols; ++k) mean_p += G.at(G.m, t, k) * G.at(G.p, t, k);
    mean_p *= cfg.dr;
    double denom = (cfg.num_sbs - 1) * cfg.cross_gain * mean_p + cfg.noise_model();
    out.push_back(denom > 0.0 ? mean_p * cfg.own_gain / denom : 0.0);
  }
  return out;
}

}  // namespace twotier
