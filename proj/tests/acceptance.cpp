// Acceptance run: one PASS/FAIL line per criterion, with the measured
// numbers. Exit status is the number of failed criteria. `acceptance N`
// runs criterion N alone.

#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "odeco/control.hpp"
#include "odeco/dynamics.hpp"
#include "odeco/hypergeometric.hpp"
#include "odeco/oracle.hpp"
#include "odeco/spectral.hpp"
#include "odeco/transform.hpp"

using namespace odeco;
using fixtures::Mat;
using fixtures::Vec;
using fixtures::vec;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[violated] " << what << "; ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// Ã with Ã y^{k-1} = P^{-1} A (P y)^{k-1}.
AlmostSymTensord conjugate(const AlmostSymTensord& A, const Mat& P) {
  const int k = A.order(), n = A.dim();
  const Mat Pinv = P.inverse();
  Vec e = Vec::Zero(A.size());
  detail::for_each_index(k, n, [&](std::span<const int> out, Eigen::Index off) {
    double s = 0;
    detail::for_each_index(k, n, [&](std::span<const int> in, Eigen::Index ioff) {
      double p = A.entries()[ioff] * Pinv(out[k - 1], in[k - 1]);
      for (int q = 0; q + 1 < k && p != 0; ++q) p *= P(in[q], out[q]);
      s += p;
    });
    e[off] = s;
  });
  return AlmostSymTensord(k, n, e);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const SymTensord T = fixtures::synthetic_tensor_rounded();
  const auto [d, converged] = detail::decompose_attempt<double>(T, 1e-8, {});
  OdecoDecompositiond cert = d;
  cert.residual = 0;  // verdict from the recovered eigenvalues alone
  const StabilityReportd rep = classify_global_even(cert);
  const double secs = seconds_since(t0);
  const double e1 = std::abs(d.eigenvalues[0] + 1), e2 = std::abs(d.eigenvalues[1] + 2);
  o.detail.precision(3);
  o.detail << "lambda = (" << d.eigenvalues[0] << ", " << d.eigenvalues[1] << "), |error| = (" << e1 << ", " << e2
           << "), residual " << d.residual << ", verdict " << to_string(rep.verdict) << ", " << secs << " s; ";
  o.require(converged, "decomposition converged");
  o.require(e1 <= 1e-6 && e2 <= 1e-6, "eigenvalues within 1e-6 of {-1, -2}");
  o.require(rep.verdict == Verdict::asymptotically_stable, "verdict asymptotically_stable");
  o.require(secs < 1.0, "runtime < 1 s");
  return o;
}

Outcome criterion2() {
  Outcome o;
  const Mat V = fixtures::population_vectors();
  const SymTensord T = odeco_tensor(vec({2.0, 2.0}), V, 4);
  const PolynomialSpecd poly = to_polynomial<double>(T);
  // x1' = x1^3 + 3 x1 x2^2, x2' = 3 x1^2 x2 + x2^3
  auto coeff = [&](int eq, int e1, int e2) {
    double c = 0;
    for (const auto& m : poly.equations[eq])
      if (m.exponents[0] == e1 && m.exponents[1] == e2) c += m.coeff;
    return c;
  };
  double worst = 0;
  const double want[2][4] = {{1, 0, 3, 0}, {0, 3, 0, 1}};  // exponent of x1 = 3, 2, 1, 0
  for (int eq = 0; eq < 2; ++eq)
    for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(coeff(eq, 3 - j, j) - want[eq][j]));
  o.require(worst <= 1e-12, "coefficients match to 1e-12");

  const Vec x0 = vec({0.5, 0.1});
  const OdecoDecompositiond d = odeco_decompose(T);
  const ExplicitSolutiond sol = explicit_solution(d, x0);
  const Vec alpha = V.transpose() * x0;
  const double expected = std::min(1 / (4 * alpha[0] * alpha[0]), 1 / (4 * alpha[1] * alpha[1]));
  const auto esc = escape_time_estimate(HPDSystemd(AlmostSymTensord(T)), x0);
  o.detail.precision(12);
  o.detail << "max coefficient error " << worst << ", blow-up " << sol.domain_end << " (expected " << expected
           << "), oracle escape " << (esc ? *esc : -1.0) << "; ";
  o.require(std::abs(sol.domain_end - expected) <= 1e-9, "blow-up time within 1e-9");
  o.require(std::abs(expected - 1 / 0.72) <= 1e-12, "min{1/(4 alpha^2)} = 1.38889");
  o.require(esc && *esc >= 0.95 * expected && *esc <= 1.01 * expected, "oracle escape in [0.95, 1.01] x blow-up");
  return o;
}

Outcome criterion3() {
  Outcome o;
  const AlmostSymTensord A = from_polynomial(fixtures::supply_polynomial());
  const Vec b = fixtures::supply_control(), x0 = vec({1.0, 1.0, 1.0});
  const auto [flag, fitted] = is_transformable<double>(A, 1e-12);
  const double relfit = fitted.fit_error / fitted.input_norm;
  o.detail.precision(4);
  o.detail << "relative fit error " << relfit << "; ";
  o.require(flag && relfit < 1e-12, "transformable with relative fit error < 1e-12");
  const TransformModeld m = build_transformation(fitted);

  // The reference P and ours must both conjugate A to an odeco tensor and
  // differ by an orthogonal (here: permutation) change of coordinates.
  const Mat Pp = fixtures::supply_P();
  const Mat Q = m.P.fullPivLu().solve(Pp);
  const double q_orth = (Q.transpose() * Q - Mat::Identity(3, 3)).norm();
  const AlmostSymTensord Ap = conjugate(A, Pp), Am = conjugate(A, m.P);
  const bool reference_odeco = is_supersymmetric<double>(Ap) && is_odeco(symmetrize(Ap), 1e-8).first;
  const bool ours_odeco = is_supersymmetric<double>(Am) && is_odeco(symmetrize(Am), 1e-8).first;
  o.detail << "|Q^T Q - I| = " << q_orth << " for Q = P^-1 P_reference; ";
  o.require(q_orth < 1e-8, "P and the reference P differ by an orthogonal map");
  o.require(reference_odeco && ours_odeco, "both P conjugate A to an odeco tensor");

  const OdecoDecompositiond d = transformed_decomposition(m);
  const Eigen::FullPivLU<Mat> lu(m.P);
  const Vec xe = m.P * controlled_equilibrium<double>(d, Vec(lu.solve(b)), Vec(lu.solve(x0)));
  const double eq_err = (xe - fixtures::supply_equilibrium()).cwiseAbs().maxCoeff();
  const Trajectoryd tr = integrate_at<double>(HPDSystemd(A, b), x0, {20.0}, 1e-10, 1e-13);
  const double rk_err = tr.completed() ? (tr.states.back() - xe).cwiseAbs().maxCoeff() : 1e300;
  o.detail << "x_e = (" << xe[0] << ", " << xe[1] << ", " << xe[2] << "), |x_e - reference| = " << eq_err
           << ", |x_rk4(20) - x_e| = " << rk_err << "; ";
  o.require(eq_err < 5e-4, "equilibrium within 5e-4 of (0.3275, 1.2599, 0.2297)");
  o.require(rk_err < 1e-3, "RK4 within 1e-3 of x_e at t = 20");
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int sys = 0; sys < 20; ++sys) {
    const int k = 3 + sys % 3, n = 2 + (sys / 3) % 3;
    const SymTensord T = odeco_tensor(fixtures::random_spectrum(n, rng), fixtures::random_orthogonal(n, rng), k);
    const Vec x0 = fixtures::random_vector(n, rng);
    const ExplicitSolutiond sol = explicit_solution(odeco_decompose(T, 1e-8, {.seed = std::uint64_t(sys)}), x0);
    const double span = std::min(0.9 * sol.domain_end, 10.0);
    std::vector<double> times;
    for (int i = 1; i <= 10; ++i) times.push_back(span * i / 10);
    const Trajectoryd tr = integrate_at<double>(HPDSystemd(AlmostSymTensord(T)), x0, times, 1e-11, 1e-14);
    if (!tr.completed() || tr.states.size() != times.size()) {
      o.require(false, "integrator completed system " + std::to_string(sys));
      continue;
    }
    for (std::size_t i = 0; i < times.size(); ++i) worst = std::max(worst, rel(eval_solution(sol, times[i]), tr.states[i]));
  }
  const double secs = seconds_since(t0);
  o.detail.precision(3);
  o.detail << "worst relative difference " << worst << ", " << secs << " s; ";
  o.require(worst <= 1e-6, "closed form vs RK4 within 1e-6 relative");
  o.require(secs < 60, "runtime < 60 s");
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::mt19937_64 rng(77);
  int counts[3] = {0, 0, 0}, bad[3] = {0, 0, 0};
  double worst_decay = 0;
  for (int sys = 0; sys < 30; ++sys) {
    const int k = 3 + sys % 3, n = 2 + (sys / 3) % 3;
    Vec lambda = fixtures::random_spectrum(n, rng);
    if (sys % 4 == 3) lambda[0] = 0;  // a null mode
    const SymTensord T = odeco_tensor(lambda, fixtures::random_orthogonal(n, rng), k);
    const Vec x0 = fixtures::random_vector(n, rng);
    const OdecoDecompositiond d = odeco_decompose(T, 1e-8, {.seed = std::uint64_t(sys)});
    const StabilityReportd rep = classify_stability(d, x0);
    const HPDSystemd S{AlmostSymTensord(T)};
    const int v = static_cast<int>(rep.verdict);
    ++counts[v];
    bool ok = true;
    if (rep.verdict == Verdict::unstable) {
      const auto esc = escape_time_estimate(S, x0, 1e6, 1.05 * *rep.blowup_time);
      ok = esc.has_value() && *esc < 1.05 * *rep.blowup_time;
    } else {
      ok = !escape_time_estimate(S, x0, 1e6, 50.0).has_value();
      std::vector<double> times;
      for (int i = 1; i <= 100; ++i) times.push_back(0.5 * i);
      const Trajectoryd tr = integrate_at<double>(S, x0, times, 1e-10, 1e-14);
      ok = ok && tr.completed();
      if (ok && rep.verdict == Verdict::asymptotically_stable) {
        const double ratio = tr.states.back().norm() / x0.norm();
        worst_decay = std::max(worst_decay, ratio);
        ok = ratio < 1e-3;
      }
      if (ok && rep.verdict == Verdict::stable)
        for (const Vec& x : tr.states) ok = ok && x.norm() <= std::sqrt(double(n)) * x0.norm();
    }
    if (!ok) ++bad[v];
  }
  o.detail.precision(3);
  o.detail << "verdicts stable/asymptotic/unstable = " << counts[0] << "/" << counts[1] << "/" << counts[2]
           << ", mismatches " << bad[0] << "/" << bad[1] << "/" << bad[2]
           << ", slowest asymptotic decay |x(50)|/|x0| = " << worst_decay << "; ";
  o.require(bad[2] == 0, "unstable <=> escape before 1.05 x blow-up time");
  o.require(bad[1] == 0, "asymptotically stable => |x(50)| < 1e-3 |x0|");
  o.require(bad[0] == 0, "stable => |x(t)| <= sqrt(n) |x0|");
  return o;
}

Outcome criterion6() {
  Outcome o;
  std::mt19937_64 rng(4242);
  double worst = -1e300;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = trial % 2 ? 4 : 6, n = 2 + trial % 3;
    const SymTensord T = fixtures::random_symmetric(k, n, rng);
    const auto [d, converged] = detail::decompose_attempt<double>(T, 1e-8, {.seed = std::uint64_t(trial)});
    worst = std::max(worst, d.eigenvalues[0] - mu_max(T));
  }
  o.detail.precision(3);
  o.detail << "max(lambda_1 - mu_max) = " << worst << "; ";
  o.require(worst <= 1e-9, "lambda_1 <= mu_max + 1e-9");
  return o;
}

Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> u(-2, 2), frac(0.01, 0.95);
  int checked = 0, violations = 0, unexplained = 0;
  double worst = 0;
  while (checked < 200) {
    const int k = 3 + checked % 4;
    const auto p = make_modal_problem(k, u(rng), u(rng), u(rng));
    if (p.rate(p.alpha) == 0) continue;
    double window = 5.0;
    if (const auto esc = modal_escape_time(p)) window = std::min(window, *esc);
    const double t = frac(rng) * window;
    const double c = solve_modal(p, t);
    const double err = std::abs(implicit_time(p, c) - t);
    // one ulp of c moves the implicit time by about ulp/|rate|
    const double resolution = std::abs(std::nextafter(c, 2 * c) - c) / std::abs(p.rate(c));
    worst = std::max(worst, err);
    if (err > 1e-8) {
      ++violations;
      if (err > std::max(1e-8, 4 * resolution)) ++unexplained;
    }
    ++checked;
  }
  double g_worst = 0;
  for (double a : {0.5, 2.0 / 3, 0.75, 0.8, 1.0})
    for (int i = 0; i <= 180; ++i) {
      const double z = -0.9 + 0.01 * i;
      g_worst = std::max(g_worst, std::abs(gauss_g_series(a, z) - gauss_g_integral(a, z)));
    }
  o.detail.precision(3);
  o.detail << "worst |t(c(t)) - t| = " << worst << "; " << violations << "/200 above 1e-8, " << unexplained
           << " of them beyond 4 ulp(c)/|rate(c)|; worst series vs quadrature " << g_worst << "; ";
  o.require(worst <= 1e-8, "implicit_time o solve_modal within 1e-8");
  o.require(g_worst <= 1e-10, "series vs quadrature within 1e-10");
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::mt19937_64 rng(8008);
  double worst_fit = 0, worst_traj = 0;
  for (int sys = 0; sys < 10; ++sys) {
    const int k = 3 + sys % 2, n = 2 + sys % 3;
    const fixtures::Structured s = fixtures::random_structured(k, n, rng);
    const auto [flag, model] = is_transformable<double>(s.A, 1e-10, false, {.seed = std::uint64_t(sys)});
    worst_fit = std::max(worst_fit, model.fit_error / model.input_norm);
    o.require(flag, "system " + std::to_string(sys) + " transformable at relative 1e-10");
    if (!flag) continue;
    const Vec x0 = fixtures::random_vector(n, rng, 0.5);
    const TransformModeld m = build_transformation(model);
    const Eigen::FullPivLU<Mat> lu(m.P);
    const ExplicitSolutiond sol = explicit_solution(transformed_decomposition(m), Vec(lu.solve(x0)));
    const double span = std::min(0.9 * sol.domain_end, 5.0);
    std::vector<double> times;
    for (int i = 1; i <= 10; ++i) times.push_back(span * i / 10);
    const Trajectoryd tr = integrate_at<double>(HPDSystemd(s.A), x0, times, 1e-11, 1e-14);
    if (!tr.completed()) {
      o.require(false, "integrator completed system " + std::to_string(sys));
      continue;
    }
    for (std::size_t i = 0; i < times.size(); ++i)
      worst_traj = std::max(worst_traj, rel(Vec(m.P * eval_solution(sol, times[i])), tr.states[i]));
  }
  o.detail.precision(3);
  o.detail << "worst relative fit error " << worst_fit << ", worst trajectory difference " << worst_traj << "; ";
  o.require(worst_traj <= 1e-6, "P y(t) matches RK4 within 1e-6");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"rounded synthetic tensor: lambda = {-1,-2} within 1e-6, asymptotically stable, < 1 s", criterion1},
      {"population model: coefficients, blow-up time, oracle escape window", criterion2},
      {"supply model: transformable, P by conjugacy, controlled equilibrium, RK4 convergence", criterion3},
      {"explicit solution vs RK4 on 20 random odeco systems", criterion4},
      {"stability trichotomy vs integrated behaviour", criterion5},
      {"lambda_1 <= mu_max on 50 random even-order tensors", criterion6},
      {"modal implicit-time round trip and g series vs quadrature", criterion7},
      {"transform conjugacy on 10 synthetic systems", criterion8},
  };
  int failed = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    if (only && index != only) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %d: %s -- %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.str().c_str());
    std::fflush(stdout);
  }
  if (!only) std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed;
}
