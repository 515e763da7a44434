#pragma once

// Rectilinear interpolation grids.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace probshield {

/// One grid point and its multilinear weight.
struct Interpolant {
  std::size_t index = 0;
  double weight = 0.0;
};

/// Bracketing breakpoints of a coordinate on one axis.
struct AxisWeights {
  std::size_t lower = 0;
  std::size_t upper = 0;
  double lower_weight = 1.0;  // upper weight is 1 - lower_weight
  bool clamped = false;
};

/// Strictly increasing breakpoints along one continuous dimension.
class Axis {
 public:
  Axis() = default;

  explicit Axis(std::vector<double> breakpoints) : points_(std::move(breakpoints)) {
    if (points_.size() < 2) throw std::invalid_argument("axis needs at least two breakpoints");
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i] > points_[i - 1])) throw std::invalid_argument("axis breakpoints must increase");
    }
  }

  /// Breakpoints lo, lo + step, ... up to hi (hi included when it lands on
  /// the lattice within 1e-9).
  static Axis uniform(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw std::invalid_argument("bad uniform axis");
    std::vector<double> pts;
    for (std::size_t i = 0;; ++i) {
      const double x = lo + static_cast<double>(i) * step;
      if (x > hi + 1e-9) break;
      pts.push_back(x);
    }
    return Axis(std::move(pts));
  }

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  const std::vector<double>& points() const { return points_; }

  AxisWeights weights(double x) const {
    if (x <= points_.front()) return {0, 0, 1.0, x < points_.front()};
    if (x >= points_.back()) {
      const std::size_t last = points_.size() - 1;
      return {last, last, 1.0, x > points_.back()};
    }
    const auto it = std::upper_bound(points_.begin(), points_.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - points_.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - points_[lo]) / (points_[hi] - points_[lo]);
    if (t == 0.0) return {lo, lo, 1.0, false};
    return {lo, hi, 1.0 - t, false};
  }

  std::size_t nearest(double x) const {
    const auto w = weights(x);
    return w.lower_weight >= 0.5 ? w.lower : w.upper;
  }

  friend bool operator==(const Axis&, const Axis&) = default;

 private:
  std::vector<double> points_;
};

/// Multilinear interpolants of `coords` on the tensor grid of `axes`, with
/// the first axis varying slowest in the flat index. Zero-weight corners are
/// dropped. Returns true when any coordinate was clamped to the hull.
inline bool multilinear(const std::vector<Axis>& axes, const std::vector<double>& coords,
                        std::vector<Interpolant>& out) {
  if (axes.size() != coords.size()) throw std::invalid_argument("coordinate count mismatch");
  out.clear();
  out.push_back({0, 1.0});
  bool clamped = false;
  std::vector<Interpolant> next;
  for (std::size_t d = 0; d < axes.size(); ++d) {
    const AxisWeights w = axes[d].weights(coords[d]);
    clamped = clamped || w.clamped;
    next.clear();
    for (const auto& ip : out) {
      next.push_back({ip.index * axes[d].size() + w.lower, ip.weight * w.lower_weight});
      if (w.upper != w.lower) {
        next.push_back({ip.index * axes[d].size() + w.upper, ip.weight * (1.0 - w.lower_weight)});
      }
    }
    out.swap(next);
  }
  std::erase_if(out, [](const Interpolant& ip) { return ip.weight == 0.0; });
  return clamped;
}

}  // namespace probshield
