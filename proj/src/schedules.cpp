#include "fkmc/schedules.hpp"

#include <algorithm>
#include <cmath>

namespace fkmc {

namespace {
constexpr double kBoundaryTol = 1e-12;
}

Schedule::Schedule(std::vector<double> times, std::vector<double> values,
                   Role role, std::string id)
    : times_(std::move(times)),
      values_(std::move(values)),
      role_(role),
      id_(std::move(id)) {
  if (times_.size() < 2 || times_.size() != values_.size())
    throw ScheduleError("schedule needs matching times/values, at least two");
  if (times_.front() != 0.0)
    throw ScheduleError("schedule must start at time 0");
  for (size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1]))
      throw ScheduleError("schedule times must be strictly increasing");
  for (double v : values_)
    if (!std::isfinite(v)) throw ScheduleError("non-finite schedule value");
}

Schedule Schedule::gradient_default(double T) {
  return Schedule({0.0, T}, {1.0, 0.0}, Role::K, "gradient-default");
}

Schedule Schedule::generator_k_default(double T) {
  return Schedule({0.0, 0.5 * T, T}, {1.0, 0.0, 0.0}, Role::K,
                  "generator-k-default");
}

Schedule Schedule::generator_l_default(double T) {
  return Schedule({0.0, 0.5 * T, T}, {1.0, 1.0, 0.0}, Role::L,
                  "generator-l-default");
}

std::pair<double, double> Schedule::eval(double s) const {
  const double T = times_.back();
  if (s < -kBoundaryTol || s > T + std::max(kBoundaryTol, 1e-9 * T))
    throw std::out_of_range("schedule evaluated outside [0, T]");
  s = std::clamp(s, 0.0, T);
  // Locate the segment with times_[i] ≤ s < times_[i+1]; at the very end the
  // last segment's slope is the right derivative by convention.
  const auto it = std::upper_bound(times_.begin(), times_.end(), s);
  size_t i = static_cast<size_t>(it - times_.begin());
  i = (i == 0) ? 0 : i - 1;
  if (i >= times_.size() - 1) i = times_.size() - 2;
  const double t0 = times_[i], t1 = times_[i + 1];
  const double v0 = values_[i], v1 = values_[i + 1];
  const double slope = (v1 - v0) / (t1 - t0);
  return {v0 + slope * (s - t0), slope};
}

void Schedule::require_gradient_shape() const {
  if (std::abs(values_.front() - 1.0) > kBoundaryTol)
    throw ScheduleError("gradient k needs k(0) = 1");
  if (std::abs(values_.back()) > kBoundaryTol)
    throw ScheduleError("gradient k needs k(T) = 0");
}

void Schedule::require_generator_k_shape() const {
  const double T = times_.back();
  if (std::abs(values_.front() - 1.0) > kBoundaryTol)
    throw ScheduleError("generator k needs k(0) = 1");
  // Piecewise linearity: zero at T/2 and at every breakpoint beyond it means
  // zero on all of [T/2, T].
  if (std::abs(eval(0.5 * T).first) > kBoundaryTol)
    throw ScheduleError("generator k needs k(T/2) = 0");
  for (size_t i = 0; i < times_.size(); ++i)
    if (times_[i] >= 0.5 * T - kBoundaryTol &&
        std::abs(values_[i]) > kBoundaryTol)
      throw ScheduleError("generator k must vanish on [T/2, T]");
}

void Schedule::require_generator_l_shape() const {
  const double T = times_.back();
  if (std::abs(eval(0.5 * T).first - 1.0) > kBoundaryTol)
    throw ScheduleError("generator l needs l(T/2) = 1");
  for (size_t i = 0; i < times_.size(); ++i)
    if (times_[i] <= 0.5 * T + kBoundaryTol &&
        std::abs(values_[i] - 1.0) > kBoundaryTol)
      throw ScheduleError("generator l must equal 1 on [0, T/2]");
  if (std::abs(values_.back()) > kBoundaryTol)
    throw ScheduleError("generator l needs l(T) = 0");
}

}  // namespace fkmc
