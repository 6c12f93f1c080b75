#pragma once

#include <cmath>

#include <json.hpp>

#include "dynspec/dpt.hpp"

namespace dynspec {

/// JSON never carries NaN or Inf; non-finite numbers become null.
inline nlohmann::json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::json json_complex(cdouble v) {
  return nlohmann::json::array({json_number(v.real()), json_number(v.imag())});
}

inline nlohmann::json report_to_json(const ConvergenceReport& r) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["step_norm"] = json_number(r.step_norm);
  auto eig = nlohmann::json::array();
  for (const cdouble e : r.eigenvalues) eig.push_back(json_complex(e));
  j["eigenvalues"] = std::move(eig);
  auto res = nlohmann::json::array();
  for (const double v : r.residuals) res.push_back(json_number(v));
  j["residuals"] = std::move(res);
  return j;
}

inline nlohmann::json report_to_json(const SingleRowReport& r) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["step_norm"] = json_number(r.step_norm);
  j["eigenvalues"] = nlohmann::json::array({json_complex(r.eigenvalue)});
  j["residuals"] = nlohmann::json::array({json_number(r.residual)});
  return j;
}

}  // namespace dynspec
