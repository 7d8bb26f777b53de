#include "rot/regularizer.hpp"

#include <charconv>
#include <sstream>

namespace rot {

namespace {

double parse_parameter(std::string_view text, std::string_view what) {
  double out = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("cannot parse " + std::string(what) + " parameter '" + std::string(text) + "'");
  return out;
}

}  // namespace

Regularizer Regularizer::beta_potential(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta-potential needs beta in (0, 1)");
  return {RegKind::beta_potential, beta};
}

Regularizer Regularizer::lp_quasi(double exponent) {
  if (!(exponent > 0.0 && exponent < 1.0)) throw ConfigError("quasi-norm needs exponent in (0, 1)");
  return {RegKind::lp_quasi, exponent};
}

Regularizer Regularizer::parse(std::string_view text) {
  if (text == "entropy") return entropy();
  if (text == "burg") return burg();
  if (text == "fermi") return fermi_dirac();
  if (text.starts_with("beta:")) return beta_potential(parse_parameter(text.substr(5), "beta"));
  if (text.starts_with("lpq:")) return lp_quasi(parse_parameter(text.substr(4), "lpq"));
  throw ConfigError("unknown regularizer '" + std::string(text) +
                    "' (expected entropy, burg, fermi, beta:<b> or lpq:<p>)");
}

std::string Regularizer::name() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case RegKind::entropy:
      return "entropy";
    case RegKind::burg:
      return "burg";
    case RegKind::fermi_dirac:
      return "fermi";
    case RegKind::beta_potential:
      out << "beta:" << param;
      return out.str();
    case RegKind::lp_quasi:
      out << "lpq:" << param;
      return out.str();
  }
  return "unknown";
}

}  // namespace rot
