#pragma once

#include <algorithm>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwnn/errors.hpp"

namespace mwnn {

inline constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

/// Principal angles between the truth's column/row spaces and the priors.
///
/// Stored in radians and ordered non-increasing: entry 0 is the largest angle.
/// Weight vectors indexed alongside these angles follow the same order.
class AnglePair {
 public:
  AnglePair() = default;

  /// Takes angles in radians in any order; sorts each side non-increasing.
  AnglePair(Eigen::VectorXd theta_u, Eigen::VectorXd theta_v)
      : theta_u_(std::move(theta_u)), theta_v_(std::move(theta_v)) {
    if (theta_u_.size() != theta_v_.size())
      throw ArgumentError("AnglePair: theta_u and theta_v must have the same length");
    if (theta_u_.size() == 0) throw ArgumentError("AnglePair: angle vectors must be non-empty");
    check_range(theta_u_, "theta_u");
    check_range(theta_v_, "theta_v");
    sort_desc(theta_u_);
    sort_desc(theta_v_);
  }

  static AnglePair from_degrees(const std::vector<double>& u_deg, const std::vector<double>& v_deg) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(u_deg.size()));
    Eigen::VectorXd v(static_cast<Eigen::Index>(v_deg.size()));
    for (std::size_t i = 0; i < u_deg.size(); ++i) u(static_cast<Eigen::Index>(i)) = deg_to_rad(u_deg[i]);
    for (std::size_t i = 0; i < v_deg.size(); ++i) v(static_cast<Eigen::Index>(i)) = deg_to_rad(v_deg[i]);
    return AnglePair(std::move(u), std::move(v));
  }

  const Eigen::VectorXd& theta_u() const noexcept { return theta_u_; }
  const Eigen::VectorXd& theta_v() const noexcept { return theta_v_; }
  Eigen::Index rank() const noexcept { return theta_u_.size(); }

  std::vector<double> theta_u_deg() const { return to_deg(theta_u_); }
  std::vector<double> theta_v_deg() const { return to_deg(theta_v_); }

 private:
  static void check_range(const Eigen::VectorXd& t, const char* name) {
    const double hi = std::numbers::pi / 2.0 + 1e-12;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!(t(i) >= -1e-12 && t(i) <= hi))
        throw ArgumentError(std::string("AnglePair: ") + name + " entries must lie in [0, 90] degrees");
    }
  }
  static void sort_desc(Eigen::VectorXd& t) {
    t = t.cwiseMax(0.0).cwiseMin(std::numbers::pi / 2.0);
    std::sort(t.data(), t.data() + t.size(), std::greater<>());
  }
  static std::vector<double> to_deg(const Eigen::VectorXd& t) {
    std::vector<double> out(static_cast<std::size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) out[static_cast<std::size_t>(i)] = rad_to_deg(t(i));
    return out;
  }

  Eigen::VectorXd theta_u_;
  Eigen::VectorXd theta_v_;
};

}  // namespace mwnn
