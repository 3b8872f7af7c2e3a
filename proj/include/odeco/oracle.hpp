#pragma once

// Adaptive classic RK4 with step doubling. Used as ground truth for the
// closed forms, so it deliberately shares nothing with them beyond rhs().

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "odeco/system.hpp"

namespace odeco {

enum class Termination { completed, norm_exceeded, step_underflow };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::norm_exceeded: return "norm_exceeded";
    case Termination::step_underflow: return "step_underflow";
  }
  return "unknown";
}

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<Vector<Scalar>> states;
  Termination status = Termination::completed;
  Scalar threshold = std::numeric_limits<Scalar>::infinity();  // norm limit in force
  Scalar stop_time{0};                                         // where integration ended
  long steps = 0;                                              // accepted steps
  long rejected = 0;

  bool completed() const { return status == Termination::completed; }
};

struct IntegrateOptions {
  double norm_limit = 1e6;
  double underflow_ratio = 1e-14;  // step floor relative to t_end
  double initial_step = 0;         // <= 0: chosen from ‖f(x0)‖
};

namespace detail {

template <typename Scalar>
Vector<Scalar> rk4_step(const HPDSystem<Scalar>& sys, const Vector<Scalar>& x, Scalar h) {
  const Vector<Scalar> k1 = sys.rhs(x);
  const Vector<Scalar> k2 = sys.rhs(x + (h / 2) * k1);
  const Vector<Scalar> k3 = sys.rhs(x + (h / 2) * k2);
  const Vector<Scalar> k4 = sys.rhs(x + h * k3);
  return x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

// Integrates to t_end, stopping exactly at each entry of `stops` (sorted,
// within (0, t_end]). Every accepted step is reported to on_step(t, x,
// at_stop); on_step returning false ends the run as norm_exceeded.
template <typename Scalar, typename OnStep>
Trajectory<Scalar> rk4_drive(const HPDSystem<Scalar>& sys, Vector<Scalar> x, Scalar t_end, Scalar rtol,
                             Scalar atol, const std::vector<Scalar>& stops, const IntegrateOptions& opts,
                             OnStep&& on_step) {
  if (!(t_end > 0) || !std::isfinite(t_end)) throw Error(ErrorKind::InvalidArgument, "t_end must be positive and finite");
  if (!(rtol > 0) || !(atol > 0)) throw Error(ErrorKind::InvalidArgument, "tolerances must be positive");
  if (x.size() != sys.dim()) throw Error(ErrorKind::DimensionMismatch, "initial state length does not match the system");

  Trajectory<Scalar> out;
  out.threshold = Scalar(opts.norm_limit);
  const Scalar h_min = Scalar(opts.underflow_ratio) * t_end;
  Scalar t = 0;
  Scalar h = Scalar(opts.initial_step);
  if (h <= 0) {
    const Scalar fn = sys.rhs(x).norm();
    h = fn > 0 ? std::clamp(Scalar(0.01) * x.norm() / fn, Scalar(1e-6) * t_end, t_end) : t_end;
  }
  std::size_t next_stop = 0;

  while (t < t_end) {
    const Scalar target = next_stop < stops.size() ? stops[next_stop] : t_end;
    Scalar step = std::min(h, target - t);
    const bool hits_target = step >= target - t;
    if (h < h_min) {
      out.status = Termination::step_underflow;
      break;
    }

    const Vector<Scalar> coarse = rk4_step(sys, x, step);
    const Vector<Scalar> fine = rk4_step(sys, rk4_step(sys, x, step / 2), step / 2);
    const Vector<Scalar> delta = (fine - coarse) / 15;
    Scalar err = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      err = std::max(err, std::abs(delta[i]) / (atol + rtol * std::max(std::abs(x[i]), std::abs(fine[i]))));
    if (!std::isfinite(err) || !fine.allFinite()) err = std::numeric_limits<Scalar>::infinity();

    const Scalar factor =
        err == 0 ? Scalar(5) : std::clamp(Scalar(0.9) * std::pow(err, Scalar(-0.2)), Scalar(0.1), Scalar(5));
    if (err > 1) {
      ++out.rejected;
      h = step * factor;
      continue;
    }
    ++out.steps;
    x = fine + delta;  // Richardson correction
    t = hits_target ? target : t + step;
    if (!hits_target || step == h) h = step * factor;
    const bool at_stop = hits_target && next_stop < stops.size();
    if (at_stop) ++next_stop;
    if (!on_step(t, x, at_stop)) {
      out.status = Termination::norm_exceeded;
      break;
    }
  }
  out.stop_time = t;
  return out;
}

}  // namespace detail

/// Full trajectory with every accepted step.
template <typename Scalar>
Trajectory<Scalar> integrate(const HPDSystem<Scalar>& sys, VectorCRef<Scalar> x0, Scalar t_end, Scalar rtol,
                             Scalar atol, const IntegrateOptions& opts = {}) {
  std::vector<Scalar> times{0};
  std::vector<Vector<Scalar>> states{x0};
  Trajectory<Scalar> out =
      detail::rk4_drive<Scalar>(sys, x0, t_end, rtol, atol, {}, opts, [&](Scalar t, const Vector<Scalar>& x, bool) {
        times.push_back(t);
        states.push_back(x);
        return x.norm() <= Scalar(opts.norm_limit);
      });
  out.times = std::move(times);
  out.states = std::move(states);
  return out;
}

/// States at the requested (strictly increasing, non-negative) times only.
/// Times beyond an early termination are absent from the result.
template <typename Scalar>
Trajectory<Scalar> integrate_at(const HPDSystem<Scalar>& sys, VectorCRef<Scalar> x0, const std::vector<Scalar>& times,
                                Scalar rtol, Scalar atol, const IntegrateOptions& opts = {}) {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] >= 0) || (i > 0 && !(times[i] > times[i - 1])))
      throw Error(ErrorKind::InvalidArgument, "sample times must be non-negative and strictly increasing");
  Trajectory<Scalar> out;
  std::vector<Scalar> stops;
  for (Scalar t : times)
    if (t > 0) stops.push_back(t);
  if (!times.empty() && times.front() == 0) {
    out.times.push_back(0);
    out.states.push_back(x0);
  }
  if (stops.empty()) {
    if (x0.size() != sys.dim()) throw Error(ErrorKind::DimensionMismatch, "initial state length does not match the system");
    return out;
  }
  Trajectory<Scalar> run = detail::rk4_drive<Scalar>(
      sys, x0, stops.back(), rtol, atol, stops, opts, [&](Scalar t, const Vector<Scalar>& x, bool at_stop) {
        const bool ok = x.norm() <= Scalar(opts.norm_limit);
        if (at_stop && ok) {
          out.times.push_back(t);
          out.states.push_back(x);
        }
        return ok;
      });
  run.times = std::move(out.times);
  run.states = std::move(out.states);
  return run;
}

/// First time ‖x‖ crosses `threshold` (log-linear interpolation inside the
/// crossing step), or the time the step size collapses. Empty if neither
/// happens before t_cap.
template <typename Scalar>
std::optional<Scalar> escape_time_estimate(const HPDSystem<Scalar>& sys, VectorCRef<Scalar> x0,
                                           Scalar threshold = Scalar(1e6), Scalar t_cap = Scalar(1e3),
                                           Scalar rtol = Scalar(1e-8), Scalar atol = Scalar(1e-12)) {
  if (x0.norm() > threshold) return Scalar(0);
  IntegrateOptions opts;
  opts.norm_limit = double(threshold);
  Scalar t_prev = 0, n_prev = x0.norm(), crossing = 0;
  const Trajectory<Scalar> run =
      detail::rk4_drive<Scalar>(sys, x0, t_cap, rtol, atol, {}, opts, [&](Scalar t, const Vector<Scalar>& x, bool) {
        const Scalar n = x.norm();
        if (n <= threshold) {
          t_prev = t;
          n_prev = n;
          return true;
        }
        crossing = t;
        if (n_prev > 0 && std::isfinite(n))
          crossing = t_prev + (t - t_prev) * std::log(threshold / n_prev) / std::log(n / n_prev);
        return false;
      });
  switch (run.status) {
    case Termination::norm_exceeded: return crossing;
    case Termination::step_underflow: return run.stop_time;
    case Termination::completed: break;
  }
  return std::nullopt;
}

using Trajectoryd = Trajectory<double>;

}  // namespace odeco
