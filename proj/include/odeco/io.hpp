#pragma once

// File formats and command reports for the odeco_hpds front end.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "odeco/tensor.hpp"

namespace odeco::io {

inline constexpr int schema_version = 1;

/// Malformed or inconsistent input file (exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The verb declines to produce a result for this input (exit code 3).
class Refusal : public std::runtime_error {
 public:
  Refusal(std::string code, const std::string& reason) : std::runtime_error(reason), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct SystemSpec {
  AlmostSymTensord tensor{2, 1};
  std::optional<Eigen::VectorXd> control;
  std::optional<Eigen::VectorXd> x0;
  int dim() const { return tensor.dim(); }
  int order() const { return tensor.order(); }
};

/// JSON keys: "dim", "degree" (= order - 1), exactly one of "equations"
/// (per-equation lists of {"exponents", "coeff"}) or "tensor" (flat n^k,
/// last index fastest, last index = equation), optional "control", "x0".
SystemSpec parse_spec(const nlohmann::json& doc);
SystemSpec parse_spec_text(const std::string& text);
SystemSpec load_spec(const std::string& path);

/// The "tensor" form of a system, suitable for parse_spec.
nlohmann::json spec_json(const Tensord& t, const std::optional<Eigen::VectorXd>& control = std::nullopt,
                         const std::optional<Eigen::VectorXd>& x0 = std::nullopt);

/// Pretty-printed JSON with doubles at 17 significant digits and
/// non-finite numbers written as null.
std::string format_json(const nlohmann::json& j);
/// %.12g, with nan/inf spelled out.
std::string format_csv_number(double v);

struct RunOptions {
  std::uint64_t seed = 0;
  double tol = 1e-8;  // odeco certification, on the Frobenius residual
  double epsilon = 1e-12;  // transformability threshold
  bool absolute = false;   // epsilon absolute instead of relative to ‖A‖
  double t_end = 10.0;
  int samples = 101;
  std::string method = "closed";  // closed | rk4 | both
  double rtol = 1e-10;
  bool dense = true;  // simulate: every accepted step instead of uniform samples
};

struct CsvOutput {
  std::string text;
  std::string note;       // human-readable remark for stderr, may be empty
  bool complete = true;   // false when the integrator stopped before t_end
};

nlohmann::json analyze(const SystemSpec& spec, const RunOptions& opts);
nlohmann::json decompose(const SystemSpec& spec, const RunOptions& opts);
nlohmann::json transform(const SystemSpec& spec, const RunOptions& opts);
CsvOutput solve_csv(const SystemSpec& spec, const RunOptions& opts);
CsvOutput simulate_csv(const SystemSpec& spec, const RunOptions& opts);

/// 0 ok, 2 input, 3 refusal, 4 numerical failure.
int exit_code(ErrorKind kind);

}  // namespace odeco::io
