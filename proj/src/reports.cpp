#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include "odeco/control.hpp"
#include "odeco/dynamics.hpp"
#include "odeco/io.hpp"
#include "odeco/oracle.hpp"
#include "odeco/spectral.hpp"
#include "odeco/system.hpp"
#include "odeco/transform.hpp"

namespace odeco::io {

using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json rows_json(const MatrixXd& M) {
  json out = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) out.push_back(to_json(M.row(i).transpose()));
  return out;
}

json cols_json(const MatrixXd& M) {
  json out = json::array();
  for (Eigen::Index j = 0; j < M.cols(); ++j) out.push_back(to_json(M.col(j)));
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json header(const char* command, const SystemSpec& spec) {
  json r;
  r["schema_version"] = schema_version;
  r["command"] = command;
  r["order"] = spec.order();
  r["dim"] = spec.dim();
  return r;
}

// Everything the closed-form verbs need to know about a system. When the
// tensor is not odeco but transformable, `d` describes the transformed
// system in y = P^{-1} x coordinates.
struct Analysis {
  double symmetry_defect = 0;
  bool supersymmetric = false;
  OdecoDecompositiond direct;
  bool direct_converged = false;
  bool odeco = false;
  bool transform_attempted = false;
  bool transformable = false;
  TransformModeld model;
  double transform_threshold = 0;
  std::optional<OdecoDecompositiond> d;
  MatrixXd P;
  bool via_transform = false;

  VectorXd to_y(const VectorXd& x) const { return via_transform ? VectorXd(P.fullPivLu().solve(x)) : x; }
  VectorXd to_x(const VectorXd& y) const { return via_transform ? VectorXd(P * y) : y; }
};

Analysis analyse(const SystemSpec& spec, const RunOptions& opts, bool allow_transform) {
  Analysis a;
  const AlmostSymTensord& A = spec.tensor;
  const int n = A.dim(), k = A.order();
  const SymTensord S = symmetrize(A);
  a.symmetry_defect = frob_distance<double>(S, A);
  a.supersymmetric = is_supersymmetric<double>(A);

  // The search runs on the symmetric part; certification is against A itself.
  auto [d, converged] = detail::decompose_attempt<double>(S, opts.tol, {.seed = opts.seed});
  d.residual = frob_distance<double>(A, d.reconstruct());
  a.direct = d;
  a.direct_converged = converged;
  a.odeco = converged && d.certified();
  a.P = MatrixXd::Identity(n, n);
  if (a.odeco) {
    a.d = d;
    return a;
  }
  if (!allow_transform || k < 3) return a;

  a.transform_attempted = true;
  auto [flag, model] = is_transformable<double>(A, opts.epsilon, opts.absolute, {.seed = opts.seed});
  a.transformable = flag;
  a.transform_threshold = opts.absolute ? opts.epsilon : opts.epsilon * model.input_norm;
  if (!flag) {
    a.model = std::move(model);
    return a;
  }
  a.model = build_transformation(std::move(model));
  a.d = transformed_decomposition(a.model);
  a.P = a.model.P;
  a.via_transform = true;
  return a;
}

json transform_json(const Analysis& a) {
  json t;
  t["transformable"] = a.transformable;
  t["fit_error"] = finite_or_null(a.model.fit_error);
  t["relative_fit_error"] =
      a.model.input_norm > 0 ? finite_or_null(a.model.fit_error / a.model.input_norm) : finite_or_null(a.model.fit_error);
  t["threshold"] = a.transform_threshold;
  if (a.transformable) t["P"] = rows_json(a.P);
  return t;
}

json report_json(const StabilityReportd& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["basis"] = to_string(r.basis);
  j["mode_products"] = to_json(r.mode_products);
  j["blowup_time"] = r.blowup_time ? json(*r.blowup_time) : json(nullptr);
  return j;
}

// Linear systems: a symmetric matrix is diagonalizable, so its eigenvalue
// signs settle stability for every x0.
json linear_verdict(const OdecoDecompositiond& d) {
  const double tol = 1e-12 * std::max(1.0, z_spectral_radius(d));
  const bool pos = (d.eigenvalues.array() > tol).any();
  const bool zero = (d.eigenvalues.array().abs() <= tol).any();
  json j;
  j["verdict"] = pos ? "unstable" : zero ? "stable" : "asymptotically_stable";
  j["basis"] = "linear_spectrum";
  j["mode_products"] = to_json(d.eigenvalues);
  j["blowup_time"] = nullptr;
  return j;
}

// Per-mode behaviour of c' = λ c^{k-1} + b̃ from c(0) = α: a finite escape
// or unbounded drift is unstable; otherwise the mode settles on an
// equilibrium e and the sign of (k-1) λ e^{k-2} decides.
json controlled_verdict(const OdecoDecompositiond& d, const VectorXd& bt, const VectorXd& alpha) {
  const int k = d.order;
  const double b_scale = 1e-14 * std::max(1.0, bt.cwiseAbs().maxCoeff());
  const double p_tol = 1e-12 * std::max(1.0, z_spectral_radius(d) * detail::ipow(alpha.norm(), std::max(0, k - 2)));
  bool unstable = false, all_asymptotic = true;
  double blowup = inf;
  VectorXd products(d.dim);
  for (int r = 0; r < d.dim; ++r) {
    const double lam = d.eigenvalues[r];
    products[r] = lam * detail::ipow(alpha[r], std::max(0, k - 2));
    if (std::abs(bt[r]) <= b_scale) {
      if (k == 2) {
        unstable |= lam > 1e-12;
        all_asymptotic &= lam < -1e-12;
      } else {
        unstable |= products[r] > p_tol;
        all_asymptotic &= products[r] < -p_tol;
        if (products[r] > p_tol) blowup = std::min(blowup, 1.0 / ((k - 2) * products[r]));
      }
      continue;
    }
    if (lam == 0) {
      unstable = true;
      all_asymptotic = false;
      continue;
    }
    const auto p = make_modal_problem(k, lam, bt[r], alpha[r]);
    if (const auto esc = modal_escape_time(p)) {
      unstable = true;
      blowup = std::min(blowup, *esc);
      continue;
    }
    if (!p.equilibrium) {
      unstable = true;
      all_asymptotic = false;
      continue;
    }
    const double slope = (k - 1) * lam * detail::ipow(*p.equilibrium, k - 2);
    unstable |= slope > 0;
    all_asymptotic &= slope < 0;
  }
  json j;
  j["verdict"] = unstable ? "unstable" : all_asymptotic ? "asymptotically_stable" : "stable";
  j["basis"] = "controlled_modes";
  j["mode_products"] = to_json(products);
  j["blowup_time"] = finite_or_null(blowup);
  return j;
}

std::vector<double> sample_times(double t_end, int samples) {
  if (t_end == 0 || samples <= 1) return {0.0};
  std::vector<double> t(samples);
  for (int i = 0; i < samples; ++i) t[i] = t_end * i / (samples - 1);
  t.back() = t_end;
  return t;
}

void require_x0(const SystemSpec& spec, const char* verb) {
  if (!spec.x0) throw InputError(std::string(verb) + " needs \"x0\" in the system spec");
}

double rk4_atol(double rtol) { return std::max(1e-300, rtol * 1e-2); }

std::string csv_header(int n, bool with_rk4) {
  std::string h = "t";
  for (int i = 1; i <= n; ++i) h += ",x_" + std::to_string(i);
  if (with_rk4)
    for (int i = 1; i <= n; ++i) h += ",x_rk4_" + std::to_string(i);
  return h + "\n";
}

std::string fmt_short(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------

json analyze(const SystemSpec& spec, const RunOptions& opts) {
  const int k = spec.order();
  const Analysis a = analyse(spec, opts, true);
  json r = header("analyze", spec);
  r["supersymmetric"] = a.supersymmetric;
  r["symmetry_defect"] = a.symmetry_defect;
  r["odeco"] = a.odeco;
  r["residual"] = finite_or_null(a.direct.residual);
  r["tol"] = opts.tol;
  if (a.transform_attempted) r["transform"] = transform_json(a);
  r["coordinates"] = a.via_transform ? "transformed" : "original";

  json verdicts = json::object();
  std::optional<json> chosen;
  std::string reason;

  if (k >= 4 && k % 2 == 0 && a.supersymmetric) {
    const SymTensord S = symmetrize(spec.tensor);
    r["mu_max"] = mu_max(S);
    if (const auto u = classify_by_unfolding(S)) verdicts["unfolding"] = report_json(*u);
    else verdicts["unfolding"] = nullptr;
  }

  if (a.d) {
    const OdecoDecompositiond& d = *a.d;
    r["eigenvalues"] = to_json(d.eigenvalues);
    r["eigenvectors"] = cols_json(d.eigenvectors);
    const std::optional<VectorXd> y0 = spec.x0 ? std::optional<VectorXd>(a.to_y(*spec.x0)) : std::nullopt;

    if (spec.control) {
      const VectorXd bt_y = a.to_y(*spec.control);
      const VectorXd bt = d.eigenvectors.transpose() * bt_y;
      json c;
      c["control"] = to_json(*spec.control);
      try {
        c["equilibrium"] = to_json(a.to_x(y0 ? controlled_equilibrium<double>(d, bt_y, *y0)
                                             : controlled_equilibrium<double>(d, bt_y)));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoEquilibrium) throw;
        c["equilibrium"] = nullptr;
        c["equilibrium_reason"] = e.what();
      }
      if (y0) {
        c["escape_time"] = finite_or_null(controlled_escape_time<double>(d, bt_y, *y0));
        verdicts["controlled"] = controlled_verdict(d, bt, modal_coordinates(d, *y0));
        chosen = verdicts["controlled"];
      } else {
        reason = "controlled system: stability is reported per initial state; add \"x0\"";
      }
      r["controlled"] = c;
      r["equilibria"] = nullptr;
    } else {
      const EquilibriumStructure eq = equilibrium_structure(d);
      r["equilibria"] = eq.unique_origin ? "unique_origin" : "infinitely_many";
      json nm = json::array();
      for (int m : eq.null_modes) nm.push_back(m + 1);
      r["null_modes"] = nm;
      if (k == 2) {
        verdicts["linear"] = linear_verdict(d);
        chosen = verdicts["linear"];
      } else {
        if (k % 2 == 0) verdicts["global_even"] = report_json(classify_global_even(d));
        if (y0) {
          verdicts["modal"] = report_json(classify_stability(d, *y0));
          r["in_region_of_attraction"] = in_region_of_attraction(d, *y0);
          chosen = verdicts["modal"];
        } else if (k % 2 == 0) {
          chosen = verdicts["global_even"];
        } else {
          reason = "odd order: stability depends on the initial state; add \"x0\"";
        }
      }
    }
  } else {
    r["eigenvalues"] = nullptr;
    r["equilibria"] = nullptr;
  }

  if (!chosen && !spec.control && verdicts.contains("unfolding") && !verdicts["unfolding"].is_null())
    chosen = verdicts["unfolding"];

  if (!a.d && !chosen) {
    std::string why = "tensor is not odeco (residual " + fmt_short(a.direct.residual) + " > tol " + fmt_short(opts.tol) + ")";
    if (a.transform_attempted)
      why += " and no odeco transformation was found (fit error " + fmt_short(a.model.fit_error) + ")";
    else if (k < 3)
      why += "; order-2 systems are not transformed";
    if (k >= 4 && k % 2 == 0 && a.supersymmetric)
      why += "; the unfolding bound is inconclusive (mu_max " + fmt_short(r["mu_max"].get<double>()) + " > 0)";
    throw Refusal("not_decidable", why);
  }

  r["verdicts"] = verdicts;
  if (chosen) {
    r["verdict"] = (*chosen)["verdict"];
    r["basis"] = (*chosen)["basis"];
    r["mode_products"] = (*chosen)["mode_products"];
    r["blowup_time"] = (*chosen)["blowup_time"];
  } else {
    r["verdict"] = nullptr;
    r["basis"] = nullptr;
    r["blowup_time"] = nullptr;
    r["verdict_reason"] = reason;
  }
  return r;
}

json decompose(const SystemSpec& spec, const RunOptions& opts) {
  const AlmostSymTensord& A = spec.tensor;
  const SymTensord S = symmetrize(A);
  const double defect = frob_distance<double>(S, A);
  if (defect > std::max(opts.tol, 1e-10 * A.norm()))
    throw Refusal("not_supersymmetric", "decompose needs a supersymmetric tensor (distance to the symmetric part " +
                                            fmt_short(defect) + "); use transform for general systems");
  auto [d, converged] = detail::decompose_attempt<double>(S, opts.tol, {.seed = opts.seed});
  if (!converged)
    throw Error(ErrorKind::DecompositionFailed,
                "power iteration did not converge (best residual " + fmt_short(d.residual) + ")", d.residual);
  d.residual = frob_distance<double>(A, d.reconstruct());
  json r = header("decompose", spec);
  r["eigenvalues"] = to_json(d.eigenvalues);
  r["eigenvectors"] = cols_json(d.eigenvectors);
  r["residual"] = d.residual;
  r["relative_residual"] = A.norm() > 0 ? d.residual / A.norm() : d.residual;
  r["tol"] = opts.tol;
  r["certified"] = d.certified();
  return r;
}

json transform(const SystemSpec& spec, const RunOptions& opts) {
  if (spec.order() < 3)
    throw Refusal("unsupported_order", "transform needs order >= 3 (linear systems need no transformation)");
  auto [flag, model] = is_transformable<double>(spec.tensor, opts.epsilon, opts.absolute, {.seed = opts.seed});
  json r = header("transform", spec);
  r["transformable"] = flag;
  r["epsilon"] = opts.epsilon;
  r["absolute"] = opts.absolute;
  r["threshold"] = opts.absolute ? opts.epsilon : opts.epsilon * model.input_norm;
  r["fit_error"] = finite_or_null(model.fit_error);
  r["relative_fit_error"] = model.input_norm > 0 ? finite_or_null(model.fit_error / model.input_norm) : json(nullptr);
  if (model.V.size() == 0) {
    r["P"] = nullptr;
    r["weights"] = nullptr;
    return r;
  }
  r["weights"] = to_json(model.weights);
  r["V"] = cols_json(model.V);
  try {
    const TransformModeld m = build_transformation(model);
    r["P"] = rows_json(m.P);
    r["transformed_eigenvalues"] = to_json(transformed_decomposition(m).eigenvalues);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotTransformable) throw;
    r["P"] = nullptr;
  }
  return r;
}

CsvOutput solve_csv(const SystemSpec& spec, const RunOptions& opts) {
  require_x0(spec, "solve");
  if (opts.method != "closed" && opts.method != "rk4" && opts.method != "both")
    throw InputError("--method must be closed, rk4 or both");
  if (!(opts.t_end >= 0) || !std::isfinite(opts.t_end)) throw InputError("--t-end must be finite and >= 0");
  const bool closed = opts.method != "rk4", rk4 = opts.method != "closed";
  const int n = spec.dim(), k = spec.order();
  const VectorXd& x0 = *spec.x0;
  CsvOutput out;

  double t_end = opts.t_end;
  std::function<VectorXd(double)> closed_state;
  if (closed) {
    const Analysis a = analyse(spec, opts, true);
    if (!a.d) {
      std::string why = "no closed form: tensor is not odeco (residual " + fmt_short(a.direct.residual) + ")";
      if (a.transform_attempted) why += " and not transformable (fit error " + fmt_short(a.model.fit_error) + ")";
      throw Refusal("no_closed_form", why + "; use --method rk4 or simulate");
    }
    const auto d = std::make_shared<OdecoDecompositiond>(*a.d);
    const VectorXd y0 = a.to_y(x0);
    double domain_end = inf;
    if (spec.control) {
      const VectorXd b = a.to_y(*spec.control);
      domain_end = controlled_escape_time<double>(*d, b, y0);
      closed_state = [d, b, y0, a](double t) { return a.to_x(controlled_solution<double>(*d, b, y0, t)); };
    } else if (k == 2) {
      closed_state = [d, y0, a](double t) { return a.to_x(eval_solution_k2<double>(*d, y0, t)); };
    } else {
      const auto sol = std::make_shared<ExplicitSolutiond>(explicit_solution<double>(*d, y0));
      domain_end = sol->domain_end;
      closed_state = [sol, a](double t) { return a.to_x(eval_solution(*sol, t)); };
    }
    if (a.via_transform) out.note = "closed form through an odeco transformation (x = P y)";
    if (std::isfinite(domain_end) && t_end > 0.99 * domain_end) {
      t_end = 0.99 * domain_end;
      if (!out.note.empty()) out.note += "; ";
      out.note += "t_end clipped to 0.99 x blow-up time " + fmt_short(domain_end);
    }
  }

  const std::vector<double> times = sample_times(t_end, opts.samples);
  Trajectoryd traj;
  if (rk4) traj = integrate_at<double>(HPDSystemd(spec.tensor, spec.control), x0, times, opts.rtol, rk4_atol(opts.rtol));

  std::string text = csv_header(n, closed && rk4);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const bool have_rk4 = rk4 && i < traj.states.size();
    if (!closed && !have_rk4) break;
    text += format_csv_number(times[i]);
    if (closed) {
      const VectorXd x = closed_state(times[i]);
      for (int j = 0; j < n; ++j) text += "," + format_csv_number(x[j]);
    }
    if (rk4)
      for (int j = 0; j < n; ++j) text += "," + format_csv_number(have_rk4 ? traj.states[i][j] : std::nan(""));
    text += "\n";
  }
  out.text = std::move(text);
  if (rk4 && !traj.completed()) {
    out.complete = false;
    if (!out.note.empty()) out.note += "; ";
    out.note += std::string("integrator stopped at t = ") + fmt_short(traj.stop_time) + " (" + to_string(traj.status) + ")";
  }
  return out;
}

CsvOutput simulate_csv(const SystemSpec& spec, const RunOptions& opts) {
  require_x0(spec, "simulate");
  if (!(opts.t_end >= 0) || !std::isfinite(opts.t_end)) throw InputError("--t-end must be finite and >= 0");
  const HPDSystemd sys(spec.tensor, spec.control);
  const VectorXd& x0 = *spec.x0;
  Trajectoryd traj;
  if (opts.t_end == 0) {
    traj.times = {0.0};
    traj.states = {x0};
  } else if (opts.dense) {
    traj = integrate<double>(sys, x0, opts.t_end, opts.rtol, rk4_atol(opts.rtol));
  } else {
    traj = integrate_at<double>(sys, x0, sample_times(opts.t_end, opts.samples), opts.rtol, rk4_atol(opts.rtol));
  }
  CsvOutput out;
  out.text = csv_header(spec.dim(), false);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out.text += format_csv_number(traj.times[i]);
    for (Eigen::Index j = 0; j < traj.states[i].size(); ++j) out.text += "," + format_csv_number(traj.states[i][j]);
    out.text += "\n";
  }
  if (!traj.completed()) {
    out.complete = false;
    out.note = std::string("integrator stopped at t = ") + fmt_short(traj.stop_time) + " (" + to_string(traj.status) + ")";
  }
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::DegreeMismatch:
    case ErrorKind::NotSymmetric:
      return 2;
    case ErrorKind::UnsupportedOrder:
    case ErrorKind::NotOdeco:
    case ErrorKind::NotTransformable:
    case ErrorKind::NoEquilibrium:
      return 3;
    default:
      return 4;
  }
}

}  // namespace odeco::io
