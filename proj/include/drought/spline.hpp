#pragma once

// Cubic regression splines parameterised by their values at the knots, in a
// cyclic variant (period wrap, for the calendar month) and a natural variant
// (zero curvature at the end knots, linear beyond them).
//
// With beta the knot values and delta the knot second derivatives, continuity
// of the first derivative gives B delta = D beta. The spline on [x_j, x_j+1]
// is
//   f(x) = a- beta_j + a+ beta_j+1 + c- delta_j + c+ delta_j+1
// and the wiggliness penalty  int f''(x)^2 dx  equals beta' D' B^-1 D beta.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "drought/error.hpp"

namespace drought {

class CubicSpline {
public:
  // Cyclic spline with k equally spaced knots over [origin, origin + period).
  static CubicSpline cyclic(int k, double origin, double period) {
    if (k < 4) throw UsageError("cyclic spline needs at least 4 knots");
    CubicSpline s;
    s.cyclic_ = true;
    s.period_ = period;
    s.knots_.resize(k + 1);
    for (int j = 0; j <= k; ++j) s.knots_[j] = origin + period * j / k;

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      const int prev = (j + k - 1) % k;
      const int next = (j + 1) % k;
      const double h_prev = s.knots_[j == 0 ? k : j] - s.knots_[j == 0 ? k - 1 : j - 1];
      const double h = s.knots_[j + 1] - s.knots_[j];
      b(j, j) += (h_prev + h) / 3.0;
      b(j, next) += h / 6.0;
      b(j, prev) += h_prev / 6.0;
      d(j, j) += -1.0 / h_prev - 1.0 / h;
      d(j, next) += 1.0 / h;
      d(j, prev) += 1.0 / h_prev;
    }
    s.finish(b, d, Eigen::MatrixXd::Identity(k, k));
    return s;
  }

  // Natural spline through the given strictly increasing knots.
  static CubicSpline natural(std::vector<double> knots) {
    const int k = static_cast<int>(knots.size());
    if (k < 3) throw UsageError("natural spline needs at least 3 knots");
    for (int j = 1; j < k; ++j) {
      if (!(knots[static_cast<std::size_t>(j)] > knots[static_cast<std::size_t>(j - 1)])) {
        throw UsageError("spline knots must be strictly increasing");
      }
    }
    CubicSpline s;
    s.knots_ = Eigen::Map<const Eigen::VectorXd>(knots.data(), k);
    const int m = k - 2;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, k);
    for (int i = 0; i < m; ++i) {
      const double h0 = s.knots_[i + 1] - s.knots_[i];
      const double h1 = s.knots_[i + 2] - s.knots_[i + 1];
      d(i, i) = 1.0 / h0;
      d(i, i + 1) = -1.0 / h0 - 1.0 / h1;
      d(i, i + 2) = 1.0 / h1;
      b(i, i) = (h0 + h1) / 3.0;
      if (i + 1 < m) {
        b(i, i + 1) = h1 / 6.0;
        b(i + 1, i) = h1 / 6.0;
      }
    }
    // delta for the end knots is zero; interior rows come from B^-1 D.
    Eigen::MatrixXd embed = Eigen::MatrixXd::Zero(k, m);
    embed.block(1, 0, m, m).setIdentity();
    s.finish(b, d, embed);
    return s;
  }

  // Knots at evenly spaced quantiles of the distinct values of x.
  static CubicSpline natural_at_quantiles(std::span<const double> x, int k) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    if (u.size() < 3) throw SingularityError("predictor has fewer than 3 distinct values; cannot smooth it");
    k = std::min<int>(k, static_cast<int>(u.size()));
    std::vector<double> knots;
    for (int j = 0; j < k; ++j) {
      const double pos = static_cast<double>(j) * static_cast<double>(u.size() - 1) / (k - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, u.size() - 1);
      knots.push_back(u[lo] + (pos - static_cast<double>(lo)) * (u[hi] - u[lo]));
    }
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    return natural(std::move(knots));
  }

  int dimension() const noexcept { return static_cast<int>(penalty_.rows()); }
  bool is_cyclic() const noexcept { return cyclic_; }
  const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }
  std::vector<double> knots() const {
    const auto n = static_cast<std::size_t>(cyclic_ ? knots_.size() - 1 : knots_.size());
    return {knots_.data(), knots_.data() + n};
  }

  // Row r such that f(x) = r . beta (derivative order 0, 1 or 2).
  Eigen::RowVectorXd row(double x, int derivative = 0) const {
    const int k = dimension();
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(k);
    if (cyclic_) {
      x = knots_[0] + std::fmod(std::fmod(x - knots_[0], period_) + period_, period_);
      if (x >= knots_[knots_.size() - 1]) x = knots_[0];
    } else if (x < knots_[0] || x > knots_[k - 1]) {
      // Linear continuation beyond the boundary knots.
      const bool left = x < knots_[0];
      const double edge = left ? knots_[0] : knots_[k - 1];
      if (derivative >= 2) return r;
      const Eigen::RowVectorXd slope = row(edge, 1);
      if (derivative == 1) return slope;
      return row(edge, 0) + (x - edge) * slope;
    }

    int j = static_cast<int>(std::upper_bound(knots_.data(), knots_.data() + knots_.size(), x) - knots_.data()) - 1;
    j = std::clamp(j, 0, static_cast<int>(knots_.size()) - 2);
    const int j1 = cyclic_ ? (j + 1) % k : j + 1;
    const double h = knots_[j + 1] - knots_[j];
    const double left = knots_[j + 1] - x;
    const double right = x - knots_[j];

    double am, ap, cm, cp;
    switch (derivative) {
      case 0:
        am = left / h;
        ap = right / h;
        cm = (left * left * left / h - h * left) / 6.0;
        cp = (right * right * right / h - h * right) / 6.0;
        break;
      case 1:
        am = -1.0 / h;
        ap = 1.0 / h;
        cm = -(3.0 * left * left / h - h) / 6.0;
        cp = (3.0 * right * right / h - h) / 6.0;
        break;
      case 2:
        am = ap = 0.0;
        cm = left / h;
        cp = right / h;
        break;
      default:
        throw UsageError("spline derivative order must be 0, 1 or 2");
    }
    r[j] += am;
    r[j1] += ap;
    r += cm * second_derivatives_.row(j) + cp * second_derivatives_.row(j1);
    return r;
  }

  Eigen::MatrixXd design(std::span<const double> xs) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), dimension());
    for (std::size_t i = 0; i < xs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = row(xs[i]);
    return x;
  }

private:
  void finish(const Eigen::MatrixXd& b, const Eigen::MatrixXd& d, const Eigen::MatrixXd& embed) {
    const Eigen::LDLT<Eigen::MatrixXd> b_ldlt(b);
    const Eigen::MatrixXd b_inv_d = b_ldlt.solve(d);
    second_derivatives_ = embed * b_inv_d;
    penalty_ = d.transpose() * b_inv_d;
    penalty_ = 0.5 * (penalty_ + penalty_.transpose());
  }

  bool cyclic_ = false;
  double period_ = 0.0;
  Eigen::VectorXd knots_;               // cyclic: k + 1 entries, last = first + period
  Eigen::MatrixXd second_derivatives_;  // k x k map from knot values to knot second derivatives
  Eigen::MatrixXd penalty_;
};

// Calendar-month seasonality: months live on [1, 13) with 13 identified with 1.
struct CyclicSplineBasis {
  CubicSpline spline;
  Eigen::MatrixXd design;
  Eigen::MatrixXd penalty;
};

inline constexpr int kMonthBasisDimension = 12;

inline CyclicSplineBasis build_cyclic_basis(std::span<const double> months, int k = kMonthBasisDimension) {
  CubicSpline spline = CubicSpline::cyclic(k, 1.0, 12.0);
  Eigen::MatrixXd design = spline.design(months);
  Eigen::MatrixXd penalty = spline.penalty();
  return {std::move(spline), std::move(design), std::move(penalty)};
}

}  // namespace drought
