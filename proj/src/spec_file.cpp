#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "odeco/io.hpp"

namespace odeco::io {

using nlohmann::json;

namespace {

int require_int(const json& doc, const char* key, int lo) {
  if (!doc.contains(key)) throw InputError(std::string("missing key \"") + key + "\"");
  const json& v = doc.at(key);
  if (!v.is_number_integer()) throw InputError(std::string("\"") + key + "\" must be an integer");
  const long long x = v.get<long long>();
  if (x < lo || x > 64) throw InputError(std::string("\"") + key + "\" out of range");
  return static_cast<int>(x);
}

double require_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw InputError(where + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw InputError(where + " must be finite");
  return x;
}

Eigen::VectorXd number_array(const json& v, const std::string& key, Eigen::Index expected) {
  if (!v.is_array()) throw InputError("\"" + key + "\" must be an array");
  if (static_cast<Eigen::Index>(v.size()) != expected)
    throw InputError("\"" + key + "\" needs " + std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  Eigen::VectorXd out(expected);
  for (Eigen::Index i = 0; i < expected; ++i) out[i] = require_number(v[i], key + "[" + std::to_string(i) + "]");
  return out;
}

AlmostSymTensord from_equations(const json& eqs, int n, int degree) {
  if (!eqs.is_array() || static_cast<int>(eqs.size()) != n)
    throw InputError("\"equations\" must hold one term list per state (" + std::to_string(n) + ")");
  PolynomialSpecd poly{n, degree, {}};
  for (int i = 0; i < n; ++i) {
    const std::string where = "equations[" + std::to_string(i) + "]";
    if (!eqs[i].is_array()) throw InputError(where + " must be an array of terms");
    std::vector<Monomial<double>> terms;
    for (std::size_t j = 0; j < eqs[i].size(); ++j) {
      const json& term = eqs[i][j];
      const std::string tw = where + "[" + std::to_string(j) + "]";
      if (!term.is_object() || !term.contains("exponents") || !term.contains("coeff"))
        throw InputError(tw + " needs \"exponents\" and \"coeff\"");
      const json& ex = term.at("exponents");
      if (!ex.is_array() || static_cast<int>(ex.size()) != n)
        throw InputError(tw + ".exponents needs " + std::to_string(n) + " entries");
      Monomial<double> m{{}, require_number(term.at("coeff"), tw + ".coeff")};
      int total = 0;
      for (const json& e : ex) {
        if (!e.is_number_integer() || e.get<long long>() < 0 || e.get<long long>() > degree)
          throw InputError(tw + ".exponents must be non-negative integers");
        m.exponents.push_back(e.get<int>());
        total += m.exponents.back();
      }
      if (total != degree)
        throw InputError(tw + ".exponents sum to " + std::to_string(total) + ", expected degree " + std::to_string(degree));
      terms.push_back(std::move(m));
    }
    poly.equations.push_back(std::move(terms));
  }
  return from_polynomial(poly);
}

}  // namespace

SystemSpec parse_spec(const json& doc) {
  if (!doc.is_object()) throw InputError("system spec must be a JSON object");
  const int n = require_int(doc, "dim", 1);
  const int degree = require_int(doc, "degree", 1);
  const int k = degree + 1;
  const bool has_eq = doc.contains("equations"), has_t = doc.contains("tensor");
  if (has_eq == has_t) throw InputError("exactly one of \"equations\" and \"tensor\" must be present");
  if (detail::int_pow(n, k) > (Eigen::Index(1) << 24)) throw InputError("tensor too large (dim^order > 2^24)");

  SystemSpec s;
  try {
    if (has_eq) {
      s.tensor = from_equations(doc.at("equations"), n, degree);
    } else {
      const Eigen::VectorXd flat = number_array(doc.at("tensor"), "tensor", detail::int_pow(n, k));
      s.tensor = AlmostSymTensord(k, n, flat);
    }
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  if (doc.contains("control") && !doc.at("control").is_null()) s.control = number_array(doc.at("control"), "control", n);
  if (doc.contains("x0") && !doc.at("x0").is_null()) s.x0 = number_array(doc.at("x0"), "x0", n);
  return s;
}

SystemSpec parse_spec_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
  return parse_spec(doc);
}

SystemSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec_text(ss.str());
}

json spec_json(const Tensord& t, const std::optional<Eigen::VectorXd>& control,
               const std::optional<Eigen::VectorXd>& x0) {
  json doc;
  doc["dim"] = t.dim();
  doc["degree"] = t.order() - 1;
  doc["tensor"] = std::vector<double>(t.entries().data(), t.entries().data() + t.size());
  if (control) doc["control"] = std::vector<double>(control->data(), control->data() + control->size());
  if (x0) doc["x0"] = std::vector<double>(x0->data(), x0->data() + x0->size());
  return doc;
}

// ---------------------------------------------------------------------------

namespace {

std::string number17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_flat(const json& j) {
  for (const json& e : j)
    if (e.is_structured()) return false;
  return true;
}

void emit(const json& j, std::string& out, int depth) {
  const std::string pad(2 * (depth + 1), ' '), close(2 * depth, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        emit(it.value(), out, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty() || is_flat(j)) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          emit(j[i], out, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit(j[i], out, depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float:
      out += number17(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string format_json(const json& j) {
  std::string out;
  emit(j, out, 0);
  out += "\n";
  return out;
}

std::string format_csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace odeco::io
