#pragma once

// Deterministic piecewise-linear weight processes k and l.
//
// The estimators need schedules with particular boundary behavior:
//   gradient role k:          k(0) = 1, k(T) = 0;
//   generator/hessian role k: k(0) = 1, k ≡ 0 on [T/2, T];
//   generator/hessian role l: l ≡ 1 on [0, T/2], l(T) = 0.
// Defaults are k(s) = (T−s)/T, k(s) = (T−2s)/T ∨ 0 and l(s) = 1 ∧ 2(T−s)/T.

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fkmc {

struct ScheduleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Schedule {
 public:
  enum class Role { K, L };

  Schedule() = default;
  // Breakpoints must start at 0, end at T, and be strictly increasing.
  Schedule(std::vector<double> times, std::vector<double> values, Role role,
           std::string id = "custom");

  static Schedule gradient_default(double T);   // (T−s)/T
  static Schedule generator_k_default(double T);  // (T−2s)/T ∨ 0
  static Schedule generator_l_default(double T);  // 1 ∧ 2(T−s)/T

  // Piecewise-linear value and a.e. derivative at s (right derivative at
  // breakpoints).  Throws std::out_of_range outside [0, T].
  std::pair<double, double> eval(double s) const;

  double horizon() const { return times_.back(); }
  Role role() const { return role_; }
  const std::string& id() const { return id_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  // Boundary-shape checks; throw ScheduleError with a description on failure.
  void require_gradient_shape() const;   // k(0)=1, k(T)=0
  void require_generator_k_shape() const;  // k(0)=1, k ≡ 0 on [T/2, T]
  void require_generator_l_shape() const;  // l ≡ 1 on [0, T/2], l(T)=0

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  Role role_ = Role::K;
  std::string id_;
};

}  // namespace fkmc
