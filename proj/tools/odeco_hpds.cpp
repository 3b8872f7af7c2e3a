// odeco_hpds: analyze, solve and simulate homogeneous polynomial systems.
//
//   odeco_hpds analyze   system.json [--tol T] [--epsilon E] [--absolute] [--seed S]
//   odeco_hpds solve     system.json [--t-end T] [--samples N] [--method closed|rk4|both] [--rtol R]
//   odeco_hpds decompose system.json [--tol T]
//   odeco_hpds transform system.json [--epsilon E] [--absolute]
//   odeco_hpds simulate  system.json [--t-end T] [--rtol R] [--samples N]
//
// JSON reports go to stdout, diagnostics to stderr. Exit codes: 0 ok,
// 2 input error, 3 analysis refusal, 4 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "odeco/io.hpp"

namespace {

using odeco::io::format_json;
using nlohmann::json;

void error_line(const std::string& code, const std::string& reason, int exit) {
  json e;
  e["schema_version"] = odeco::io::schema_version;
  e["error"] = code;
  e["reason"] = reason;
  e["exit_code"] = exit;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Odeco analysis of homogeneous polynomial dynamical systems"};
  app.require_subcommand(1);
  app.fallthrough();

  odeco::io::RunOptions opts;
  std::string path, output;
  app.add_option("--seed", opts.seed, "seed for every randomized search")->capture_default_str();
  app.add_option("--tol", opts.tol, "odeco certification tolerance on the residual")->capture_default_str();
  app.add_option("--epsilon", opts.epsilon, "transformability threshold")->capture_default_str();
  app.add_flag("--absolute", opts.absolute, "treat --epsilon as absolute rather than relative to |A|");
  app.add_option("--t-end", opts.t_end, "final time")->capture_default_str();
  auto* samples = app.add_option("--samples", opts.samples, "number of uniform sample times")
                      ->capture_default_str()
                      ->check(CLI::PositiveNumber);
  app.add_option("--method", opts.method, "closed | rk4 | both")
      ->capture_default_str()
      ->check(CLI::IsMember({"closed", "rk4", "both"}));
  app.add_option("--rtol", opts.rtol, "integrator relative tolerance")->capture_default_str();
  app.add_option("-o,--output", output, "write the report here instead of stdout");

  const char* verbs[][2] = {{"analyze", "stability, equilibria and blow-up report (JSON)"},
                            {"solve", "closed-form trajectory samples (CSV)"},
                            {"decompose", "orthogonal decomposition (JSON)"},
                            {"transform", "odeco transformability test (JSON)"},
                            {"simulate", "numerical trajectory (CSV)"}};
  for (const auto& v : verbs) app.add_subcommand(v[0], v[1])->add_option("spec", path, "system spec file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string verb = app.get_subcommands().front()->get_name();
  opts.dense = samples->count() == 0;

  std::string text, note;
  int code = 0;
  try {
    const odeco::io::SystemSpec spec = odeco::io::load_spec(path);
    if (verb == "analyze") text = format_json(odeco::io::analyze(spec, opts));
    else if (verb == "decompose") text = format_json(odeco::io::decompose(spec, opts));
    else if (verb == "transform") text = format_json(odeco::io::transform(spec, opts));
    else {
      const auto csv = verb == "solve" ? odeco::io::solve_csv(spec, opts) : odeco::io::simulate_csv(spec, opts);
      text = csv.text;
      note = csv.note;
      if (!csv.complete) code = 4;
    }
  } catch (const odeco::io::InputError& e) {
    error_line("input_error", e.what(), 2);
    return 2;
  } catch (const odeco::io::Refusal& e) {
    error_line(e.code(), e.what(), 3);
    return 3;
  } catch (const odeco::Error& e) {
    const int exit = odeco::io::exit_code(e.kind());
    error_line(odeco::to_string(e.kind()), e.what(), exit);
    return exit;
  } catch (const std::exception& e) {
    error_line("internal", e.what(), 4);
    return 4;
  }

  if (output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(output);
    if (!(out << text)) {
      error_line("input_error", "cannot write " + output, 2);
      return 2;
    }
  }
  if (!note.empty()) std::cerr << note << "\n";
  return code;
}
