#include "mobmine/distributions.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>

#include "mobmine/errors.hpp"
#include "mobmine/rng.hpp"

namespace mobmine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // ln sqrt(2*pi)

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::log_normal: return "log_normal";
    case Family::weibull: return "weibull";
    case Family::gamma: return "gamma";
    case Family::student_t: return "student_t";
    case Family::exp_weibull: return "exp_weibull";
    case Family::power_log_normal: return "power_log_normal";
  }
  return "?";
}

std::optional<Family> family_from_name(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

int param_count(Family f) {
  switch (f) {
    case Family::student_t:
    case Family::exp_weibull: return 3;
    default: return 2;
  }
}

std::vector<std::string> param_names(Family f) {
  switch (f) {
    case Family::log_normal: return {"mu", "sigma"};
    case Family::weibull: return {"k", "lambda"};
    case Family::gamma: return {"alpha", "beta"};
    case Family::student_t: return {"nu", "loc", "scale"};
    case Family::exp_weibull: return {"k", "alpha", "lambda"};
    case Family::power_log_normal: return {"p", "sigma"};
  }
  return {};
}

bool positive_support(Family f) { return f != Family::student_t; }

void check_params(Family f, std::span<const double> p) {
  if (static_cast<int>(p.size()) != param_count(f)) {
    throw ParamDomainError(std::string(family_name(f)) + ": wrong parameter count");
  }
  if (!all_finite(p)) {
    throw ParamDomainError(std::string(family_name(f)) + ": non-finite parameter");
  }
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0)) {
      throw ParamDomainError(std::string(family_name(f)) + ": " + name + " must be > 0");
    }
  };
  switch (f) {
    case Family::log_normal: positive(p[1], "sigma"); break;
    case Family::weibull:
      positive(p[0], "k");
      positive(p[1], "lambda");
      break;
    case Family::gamma:
      positive(p[0], "alpha");
      positive(p[1], "beta");
      break;
    case Family::student_t:
      positive(p[0], "nu");
      positive(p[2], "scale");
      break;
    case Family::exp_weibull:
      positive(p[0], "k");
      positive(p[1], "alpha");
      positive(p[2], "lambda");
      break;
    case Family::power_log_normal:
      positive(p[0], "p");
      positive(p[1], "sigma");
      break;
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double log_normal_cdf_std(double z) {
  if (z > -10.0) return std::log(normal_cdf(z));
  // asymptotic expansion of ln Phi(z) for the deep left tail
  const double z2 = z * z;
  return -0.5 * z2 - kLogSqrt2Pi - std::log(-z) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw ParamDomainError("normal_quantile: argument must be in (0,1)");
  }
  if (u < 0.5) return -M_SQRT2 * boost::math::erfc_inv(2.0 * u);
  return M_SQRT2 * boost::math::erfc_inv(2.0 * (1.0 - u));
}

double log_pdf(Family f, std::span<const double> p, double x) {
  check_params(f, p);
  if (!std::isfinite(x)) return -kInf;
  switch (f) {
    case Family::log_normal: {
      if (x <= 0.0) return -kInf;
      const double z = (std::log(x) - p[0]) / p[1];
      return -std::log(x) - std::log(p[1]) - kLogSqrt2Pi - 0.5 * z * z;
    }
    case Family::weibull: {
      if (x <= 0.0) return -kInf;
      const double k = p[0], lambda = p[1];
      const double lt = std::log(x) - std::log(lambda);
      return std::log(k) - std::log(lambda) + (k - 1.0) * lt - std::exp(k * lt);
    }
    case Family::gamma: {
      if (x <= 0.0) return -kInf;
      const double alpha = p[0], beta = p[1];
      return alpha * std::log(beta) + (alpha - 1.0) * std::log(x) - beta * x -
             std::lgamma(alpha);
    }
    case Family::student_t: {
      const double nu = p[0], loc = p[1], scale = p[2];
      const double z = (x - loc) / scale;
      return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
             0.5 * std::log(nu * M_PI) - std::log(scale) -
             0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }
    case Family::exp_weibull: {
      if (x <= 0.0) return -kInf;
      const double k = p[0], alpha = p[1], lambda = p[2];
      const double lt = std::log(x) - std::log(lambda);
      const double tk = std::exp(k * lt);
      // ln(1 - e^{-t}) -> ln t as t -> 0
      const double log_one_minus = tk < 1e-280 ? k * lt : std::log(-std::expm1(-tk));
      return std::log(alpha) + std::log(k) - std::log(lambda) + (k - 1.0) * lt +
             (alpha - 1.0) * log_one_minus - tk;
    }
    case Family::power_log_normal: {
      if (x <= 0.0) return -kInf;
      const double pw = p[0], sigma = p[1];
      const double u = std::log(x) / sigma;
      return std::log(pw) - std::log(x) - std::log(sigma) - 0.5 * u * u - kLogSqrt2Pi +
             (pw - 1.0) * log_normal_cdf_std(-u);
    }
  }
  return -kInf;
}

double pdf(Family f, std::span<const double> p, double x) {
  check_params(f, p);
  if (positive_support(f) && x <= 0.0) return 0.0;
  return std::exp(log_pdf(f, p, x));
}

double cdf(Family f, std::span<const double> p, double x) {
  check_params(f, p);
  if (!std::isfinite(x)) return x > 0.0 ? 1.0 : 0.0;
  if (positive_support(f) && x <= 0.0) return 0.0;
  switch (f) {
    case Family::log_normal:
      return normal_cdf((std::log(x) - p[0]) / p[1]);
    case Family::weibull:
      return -std::expm1(-std::pow(x / p[1], p[0]));
    case Family::gamma:
      return boost::math::gamma_p(p[0], p[1] * x);
    case Family::student_t: {
      const double nu = p[0];
      const double z = (x - p[1]) / p[2];
      const double w = boost::math::ibeta(0.5 * nu, 0.5, nu / (nu + z * z));
      return z <= 0.0 ? 0.5 * w : 1.0 - 0.5 * w;
    }
    case Family::exp_weibull:
      return std::pow(-std::expm1(-std::pow(x / p[2], p[0])), p[1]);
    case Family::power_log_normal:
      return 1.0 - std::pow(normal_cdf(-std::log(x) / p[1]), p[0]);
  }
  return 0.0;
}

double sample_one(Family f, std::span<const double> p, Rng& rng) {
  switch (f) {
    case Family::log_normal:
      return std::exp(p[0] + p[1] * rng.normal());
    case Family::weibull:
      return p[1] * std::pow(-std::log(rng.uniform_open()), 1.0 / p[0]);
    case Family::gamma:
      return rng.gamma(p[0]) / p[1];
    case Family::student_t: {
      const double z = rng.normal();
      const double chi2 = 2.0 * rng.gamma(0.5 * p[0]);
      return p[1] + p[2] * z / std::sqrt(chi2 / p[0]);
    }
    case Family::exp_weibull: {
      const double u = rng.uniform_open();
      const double w = std::pow(u, 1.0 / p[1]);
      return p[2] * std::pow(-std::log1p(-w), 1.0 / p[0]);
    }
    case Family::power_log_normal: {
      const double v = rng.uniform_open();
      return std::exp(-p[1] * normal_quantile(std::pow(v, 1.0 / p[0])));
    }
  }
  return 0.0;
}

std::vector<double> sample(Family f, std::span<const double> p, std::uint64_t seed,
                           std::size_t n) {
  check_params(f, p);
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(f, p, rng));
  return out;
}

}  // namespace mobmine
