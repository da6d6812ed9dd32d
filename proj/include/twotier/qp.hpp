#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "twotier/error.hpp"

namespace twotier {

// minimize weight * ||A x - c||^2  s.t.  lower <= x <= upper, and sum(x) = total when set.
struct LeastSquaresQp {
  Eigen::MatrixXd A;
  Eigen::VectorXd c;
  double weight = 1.0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::optional<double> total;
};

struct QpOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
  int polish_every = 10;
};

struct QpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Euclidean projection onto {lower <= x <= upper, sum(x) = total}.
inline Eigen::VectorXd project_box_sum(const Eigen::VectorXd& y, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                       double total) {
  const int n = static_cast<int>(y.size());
  auto clamped_sum = [&](double tau) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::clamp(y[i] - tau, lo[i], hi[i]);
    return s;
  };
  std::vector<double> bp;
  bp.reserve(2 * n);
  for (int i = 0; i < n; ++i) {
    bp.push_back(y[i] - hi[i]);
    bp.push_back(y[i] - lo[i]);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  double tau = bp.front();
  if (clamped_sum(bp.front()) <= total) {
    tau = bp.front();
  } else if (clamped_sum(bp.back()) >= total) {
    tau = bp.back();
  } else {
    size_t a = 0, b = bp.size() - 1;
    while (b - a > 1) {
      size_t mid = (a + b) / 2;
      if (clamped_sum(bp[mid]) >= total)
        a = mid;
      else
        b = mid;
    }
    const double mid = 0.5 * (bp[a] + bp[b]);
    double free_sum = 0.0, rest = total;
    int free_count = 0;
    for (int i = 0; i < n; ++i) {
      double v = y[i] - mid;
      if (v >= hi[i]) {
        rest -= hi[i];
      } else if (v <= lo[i]) {
        rest -= lo[i];
      } else {
        free_sum += y[i];
        ++free_count;
      }
    }
    tau = free_count > 0 ? std::clamp((free_sum - rest) / free_count, bp[a], bp[b]) : bp[a];
  }
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = std::clamp(y[i] - tau, lo[i], hi[i]);
  return x;
}

namespace detail {

inline Eigen::VectorXd project(const LeastSquaresQp& qp, const Eigen::VectorXd& y) {
  if (qp.total) return project_box_sum(y, qp.lower, qp.upper, *qp.total);
  return y.cwiseMax(qp.lower).cwiseMin(qp.upper);
}

inline double objective(const LeastSquaresQp& qp, const Eigen::VectorXd& x) {
  return qp.weight * (qp.A * x - qp.c).squaredNorm();
}

struct Quadratic {
  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  double lipschitz = 0.0;
};

inline Quadratic quadratic_of(const LeastSquaresQp& qp) {
  Quadratic q;
  q.H = 2.0 * qp.weight * qp.A.transpose() * qp.A;
  q.b = 2.0 * qp.weight * qp.A.transpose() * qp.c;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.H, Eigen::EigenvaluesOnly);
  q.lipschitz = std::max(es.eigenvalues().maxCoeff(), std::numeric_limits<double>::min());
  return q;
}

inline double fixed_point_residual(const LeastSquaresQp& qp, const Quadratic& q, const Eigen::VectorXd& x) {
  Eigen::VectorXd grad = q.H * x - q.b;
  Eigen::VectorXd y = project(qp, x - grad / q.lipschitz);
  double scale = std::max({x.lpNorm<Eigen::Infinity>(), y.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min()});
  return (y - x).lpNorm<Eigen::Infinity>() / scale;
}

// Solve the equality-constrained problem on the free set implied by x; empty if the result leaves the box.
inline std::optional<Eigen::VectorXd> polish(const LeastSquaresQp& qp, const Quadratic& q, const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> free_idx;
  for (int i = 0; i < n; ++i)
    if (x[i] > qp.lower[i] && x[i] < qp.upper[i]) free_idx.push_back(i);
  const int f = static_cast<int>(free_idx.size());
  if (f == 0) return std::nullopt;
  const int rows = f + (qp.total ? 1 : 0);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  double fixed_sum = 0.0;
  for (int i = 0; i < n; ++i)
    if (!(x[i] > qp.lower[i] && x[i] < qp.upper[i])) fixed_sum += x[i];
  for (int a = 0; a < f; ++a) {
    int i = free_idx[a];
    double r = q.b[i];
    for (int k = 0; k < n; ++k)
      if (!(x[k] > qp.lower[k] && x[k] < qp.upper[k])) r -= q.H(i, k) * x[k];
    rhs[a] = r;
    for (int bb = 0; bb < f; ++bb) K(a, bb) = q.H(i, free_idx[bb]);
    if (qp.total) {
      K(a, f) = 1.0;
      K(f, a) = 1.0;
    }
  }
  if (qp.total) rhs[f] = *qp.total - fixed_sum;
  Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
  if (!sol.allFinite()) return std::nullopt;
  Eigen::VectorXd out = x;
  for (int a = 0; a < f; ++a) {
    int i = free_idx[a];
    if (sol[a] < qp.lower[i] || sol[a] > qp.upper[i]) return std::nullopt;
    out[i] = sol[a];
  }
  return out;
}


// Projected gradient with exact line search; q must be the quadratic of qp.
inline QpResult projected_gradient(const LeastSquaresQp& qp, const Quadratic& q, const Eigen::VectorXd& start,
                                   const QpOptions& opt) {
  QpResult res;
  Eigen::VectorXd x = project(qp, start);
  Eigen::VectorXd grad = q.H * x - q.b;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    Eigen::VectorXd y = project(qp, x - grad / q.lipschitz);
    Eigen::VectorXd d = y - x;
    double scale = std::max({x.lpNorm<Eigen::Infinity>(), y.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min()});
    if (d.lpNorm<Eigen::Infinity>() / scale <= opt.tolerance) {
      res.converged = true;
      break;
    }
    if (opt.polish_every > 0 && it % opt.polish_every == 0) {
      if (auto cand = polish(qp, q, y)) {
        if (fixed_point_residual(qp, q, *cand) <= opt.tolerance &&
            objective(qp, *cand) <= objective(qp, x) * (1.0 + 1e-9)) {
          x = *cand;
          grad = q.H * x - q.b;
          res.converged = true;
          break;
        }
      }
    }
    Eigen::VectorXd Hd = q.H * d;
    double curv = d.dot(Hd);
    double t = curv > 0.0 ? std::clamp(-grad.dot(d) / curv, 0.0, 1.0) : 1.0;
    x += t * d;
    grad += t * Hd;
  }
  res.x = x;
  res.objective = objective(qp, x);
  res.kkt_residual = fixed_point_residual(qp, q, x);
  return res;
}

}  // namespace detail

inline QpResult solve_least_squares_qp(const LeastSquaresQp& qp, const QpOptions& opt = {}) {
  const int n = static_cast<int>(qp.c.size());
  require(qp.A.rows() == n && qp.A.cols() == n, "qp: A must be square and match c");
  require(qp.lower.size() == n && qp.upper.size() == n, "qp: bounds must match the dimension");
  for (int i = 0; i < n; ++i) require(qp.lower[i] <= qp.upper[i], "qp: lower bound exceeds upper bound");
  if (qp.total) {
    require(qp.lower.sum() <= *qp.total * (1 + 1e-12) + 1e-300 && *qp.total <= qp.upper.sum() * (1 + 1e-12),
            "qp: sum constraint incompatible with the box");
  }
  QpResult res;
  if (n == 0) {
    res.x = Eigen::VectorXd();
    res.converged = true;
    return res;
  }
  detail::Quadratic q = detail::quadratic_of(qp);
  Eigen::VectorXd start = qp.total ? Eigen::VectorXd::Constant(n, *qp.total / n) : Eigen::VectorXd::Zero(n);
  return detail::projected_gradient(qp, q, start, opt);
}

}  // namespace twotier
