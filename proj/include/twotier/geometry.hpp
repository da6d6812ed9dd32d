#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "twotier/error.hpp"

namespace twotier {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Topology {
  Point mbs_position;
  std::vector<Point> sbs_positions;
  double macro_radius = 1000.0;
  double sbs_coverage_radius = 20.0;
  double pathloss_exponent = 4.0;
  double rayleigh_mean_sq = 1.0;

  int num_sbs() const { return static_cast<int>(sbs_positions.size()); }

  // Index 0 is the MBS, 1..M the SBSs.
  Point position(int bs) const { return bs == 0 ? mbs_position : sbs_positions.at(bs - 1); }
  double user_radius(int bs) const { return bs == 0 ? macro_radius : sbs_coverage_radius; }

  void validate() const {
    require(pathloss_exponent > 2.0, "topology.pathloss_exponent must be > 2");
    require(sbs_coverage_radius >= 1.0, "topology.sbs_coverage_radius must be >= 1");
    require(macro_radius >= 1.0, "topology.macro_radius must be >= 1");
    require(rayleigh_mean_sq > 0.0, "topology.rayleigh_mean_sq must be > 0");
    for (int i = 0; i < num_sbs(); ++i) {
      require(distance(sbs_positions[i], mbs_position) <= macro_radius,
              "topology: SBS " + std::to_string(i + 1) + " lies outside the macro disk");
    }
  }
};

// Average gain table indexed (owner of the user disk, transmitter); 0 is the MBS.
class GainTable {
 public:
  GainTable() = default;
  explicit GainTable(int num_sbs) : n_(num_sbs + 1), g_(static_cast<size_t>(n_) * n_, 0.0) {}

  int num_sbs() const { return n_ - 1; }
  int size() const { return n_; }
  double& operator()(int i, int j) { return g_[static_cast<size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return g_[static_cast<size_t>(i) * n_ + j]; }
  double own(int i) const { return (*this)(i, i); }

  void validate() const {
    require(n_ >= 1, "gain table must contain the MBS");
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        double v = (*this)(i, j);
        require(std::isfinite(v) && v > 0.0,
                "gain table entry (" + std::to_string(i) + "," + std::to_string(j) + ") must be positive and finite");
      }
  }

  // Symmetric table: own gain g on the diagonal, cross gain everywhere else.
  static GainTable uniform(int num_sbs, double own_gain, double cross_gain) {
    GainTable t(num_sbs);
    for (int i = 0; i <= num_sbs; ++i)
      for (int j = 0; j <= num_sbs; ++j) t(i, j) = i == j ? own_gain : cross_gain;
    return t;
  }

  bool operator==(const GainTable&) const = default;

 private:
  int n_ = 0;
  std::vector<double> g_;
};

// E[d^-4] for a user uniform in a disk of radius r whose centre is R away from the transmitter.
// The co-located case ignores users closer than 1 m; for R < r the result is the analytic continuation.
inline double expected_inv_d4(double R, double r) {
  require(std::isfinite(R) && std::isfinite(r) && R >= 0.0 && r > 0.0, "expected_inv_d4: need R >= 0 and r > 0");
  if (R == 0.0) {
    require(r >= 1.0, "expected_inv_d4: co-located case needs disk radius >= 1");
    return (1.0 - 1.0 / (r * r)) / (r * r);
  }
  double diff = R * R - r * r;
  require(diff != 0.0, "expected_inv_d4: transmitter on the disk circumference (R = r) diverges");
  return 1.0 / (diff * diff);
}

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

inline QuadratureResult expected_inv_d_alpha(double R, double r, double alpha, double tolerance = 1e-10) {
  using boost::math::quadrature::gauss_kronrod;
  require(alpha > 2.0, "expected_inv_d_alpha: alpha must be > 2");
  require(std::isfinite(R) && std::isfinite(r) && R >= 0.0 && r > 0.0, "expected_inv_d_alpha: need R >= 0 and r > 0");
  require(R != r, "expected_inv_d_alpha: transmitter on the disk circumference (R = r) diverges");
  const double pi = std::numbers::pi;
  QuadratureResult out;
  if (R == 0.0) {
    require(r >= 1.0, "expected_inv_d_alpha: co-located case needs disk radius >= 1");
    auto f = [&](double a) { return std::pow(a, -alpha) * 2.0 * a / (r * r); };
    out.value = gauss_kronrod<double, 61>::integrate(f, 1.0, r, 20, tolerance, &out.error_estimate);
  } else if (R < r) {
    // transmitter inside the disk: integrate over distance rho >= 1, weighting by the arc inside the disk
    auto arc = [&](double rho) {
      if (rho <= r - R) return pi;
      double c = (rho * rho + R * R - r * r) / (2.0 * rho * R);
      return std::acos(std::clamp(c, -1.0, 1.0));
    };
    auto f = [&](double rho) { return std::pow(rho, -alpha) * 2.0 * rho * arc(rho) / (pi * r * r); };
    const double knee = std::max(1.0, r - R), top = r + R;
    double e1 = 0.0, e2 = 0.0;
    out.value = (knee > 1.0 ? gauss_kronrod<double, 61>::integrate(f, 1.0, knee, 20, tolerance, &e1) : 0.0) +
                (top > knee ? gauss_kronrod<double, 61>::integrate(f, knee, top, 20, tolerance, &e2) : 0.0);
    out.error_estimate = e1 + e2;
  } else {
    double inner_error_max = 0.0;
    auto radial = [&](double a) {
      auto angular = [&](double th) { return std::pow(R * R + a * a - 2.0 * a * R * std::cos(th), -alpha / 2.0); };
      double err = 0.0;
      double v = gauss_kronrod<double, 31>::integrate(angular, 0.0, pi, 15, tolerance, &err);
      inner_error_max = std::max(inner_error_max, err);
      return (2.0 * a / (r * r)) * v / pi;
    };
    out.value = gauss_kronrod<double, 31>::integrate(radial, 0.0, r, 15, tolerance, &out.error_estimate);
    out.error_estimate += 2.0 / pi * inner_error_max;
  }
  if (!std::isfinite(out.value) || out.error_estimate > std::max(tolerance, 1e-8 * std::abs(out.value))) {
    std::ostringstream msg;
    msg << "expected_inv_d_alpha: quadrature did not converge (R=" << R << ", r=" << r << ", alpha=" << alpha
        << ", value=" << out.value << ", error estimate=" << out.error_estimate << ")";
    fail(ErrorKind::numerical, msg.str());
  }
  return out;
}

inline GainTable build_gain_table(const Topology& topo) {
  topo.validate();
  const int n = topo.num_sbs() + 1;
  GainTable table(topo.num_sbs());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double R = i == j ? 0.0 : distance(topo.position(i), topo.position(j));
      double r = topo.user_radius(i);
      double pl = 0.0;
      try {
        pl = topo.pathloss_exponent == 4.0 ? expected_inv_d4(R, r)
                                           : expected_inv_d_alpha(R, r, topo.pathloss_exponent).value;
      } catch (const Error& e) {
        fail(e.kind(), "gain pair (user of BS " + std::to_string(i) + ", transmitter BS " + std::to_string(j) +
                           "): " + e.what());
      }
      table(i, j) = topo.rayleigh_mean_sq * pl;
    }
  }
  return table;
}

struct PlacementOptions {
  // Minimum distance between any two base stations.
  double min_separation = -1.0;  // negative means twice the coverage radius
  double min_mbs_distance = 0.0;  // SBSs are drawn from the annulus [max(this, min_separation), macro_radius)
  int max_attempts_per_sbs = 10000;
  double pathloss_exponent = 4.0;
  double rayleigh_mean_sq = 1.0;
};

inline Topology generate_topology(int num_sbs, double macro_radius, double coverage_radius, std::uint64_t seed,
                                  const PlacementOptions& opt = {}) {
  require(num_sbs >= 0, "generate_topology: num_sbs must be >= 0");
  Topology topo;
  topo.macro_radius = macro_radius;
  topo.sbs_coverage_radius = coverage_radius;
  topo.pathloss_exponent = opt.pathloss_exponent;
  topo.rayleigh_mean_sq = opt.rayleigh_mean_sq;
  topo.validate();
  const double sep = opt.min_separation < 0.0 ? 2.0 * coverage_radius : opt.min_separation;
  require(opt.min_mbs_distance >= 0.0 && opt.min_mbs_distance < macro_radius,
          "generate_topology: min_mbs_distance must lie in [0, macro_radius)");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto acceptable = [&](const Point& p) {
    double to_mbs = distance(p, topo.mbs_position);
    if (to_mbs < sep || to_mbs < opt.min_mbs_distance || to_mbs == macro_radius) return false;
    for (const auto& q : topo.sbs_positions) {
      double d = distance(p, q);
      if (d < sep || d == coverage_radius) return false;
    }
    return true;
  };
  for (int i = 0; i < num_sbs; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < opt.max_attempts_per_sbs && !placed; ++attempt) {
      double rad = macro_radius * std::sqrt(unit(rng));
      double ang = 2.0 * std::numbers::pi * unit(rng);
      Point p{topo.mbs_position.x + rad * std::cos(ang), topo.mbs_position.y + rad * std::sin(ang)};
      if (acceptable(p)) {
        topo.sbs_positions.push_back(p);
        placed = true;
      }
    }
    if (!placed)
      fail(ErrorKind::infeasible, "generate_topology: could not place SBS " + std::to_string(i + 1) + " after " +
                                      std::to_string(opt.max_attempts_per_sbs) + " attempts");
  }
  return topo;
}

// Keep only the first `count` SBSs.
inline Topology prefix(const Topology& topo, int count) {
  require(count >= 0 && count <= topo.num_sbs(), "prefix: count out of range");
  Topology out = topo;
  out.sbs_positions.resize(count);
  return out;
}

inline void to_json(nlohmann::json& j, const Point& p) { j = nlohmann::json::array({p.x, p.y}); }
inline void from_json(const nlohmann::json& j, Point& p) {
  p.x = j.at(0).get<double>();
  p.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const Topology& t) {
  j = nlohmann::json{{"mbs_position", t.mbs_position},
                     {"sbs_positions", t.sbs_positions},
                     {"macro_radius", t.macro_radius},
                     {"sbs_coverage_radius", t.sbs_coverage_radius},
                     {"pathloss_exponent", t.pathloss_exponent},
                     {"rayleigh_mean_sq", t.rayleigh_mean_sq}};
}
inline void from_json(const nlohmann::json& j, Topology& t) {
  j.at("mbs_position").get_to(t.mbs_position);
  j.at("sbs_positions").get_to(t.sbs_positions);
  j.at("macro_radius").get_to(t.macro_radius);
  j.at("sbs_coverage_radius").get_to(t.sbs_coverage_radius);
  j.at("pathloss_exponent").get_to(t.pathloss_exponent);
  j.at("rayleigh_mean_sq").get_to(t.rayleigh_mean_sq);
  t.validate();
}

inline void to_json(nlohmann::json& j, const GainTable& g) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < g.size(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < g.size(); ++k) row.push_back(g(i, k));
    rows.push_back(row);
  }
  j = nlohmann::json{{"g_bar", rows}};
}
inline void from_json(const nlohmann::json& j, GainTable& g) {
  const auto& rows = j.at("g_bar");
  g = GainTable(static_cast<int>(rows.size()) - 1);
  for (int i = 0; i < g.size(); ++i) {
    require(static_cast<int>(rows[i].size()) == g.size(), "gain table rows must be square");
    for (int k = 0; k < g.size(); ++k) g(i, k) = rows[i][k].get<double>();
  }
  g.validate();
}

}  // namespace twotier
