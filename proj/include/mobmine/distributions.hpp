#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mobmine {

// The six candidate families for travel-distance / travel-time fits.
// Parameter vectors:
//   log_normal       (mu, sigma)        sigma > 0
//   weibull          (k, lambda)        k, lambda > 0
//   gamma            (alpha, beta)      shape alpha > 0, RATE beta > 0
//   student_t        (nu, loc, scale)   nu, scale > 0 (location-scale form)
//   exp_weibull      (k, alpha, lambda) all > 0; alpha = 1 reduces to Weibull,
//                                       k = 1 to the exponentiated exponential
//   power_log_normal (p, sigma)         p, sigma > 0; natural logs throughout
enum class Family {
  log_normal,
  weibull,
  gamma,
  student_t,
  exp_weibull,
  power_log_normal,
};

inline constexpr std::array<Family, 6> kAllFamilies = {
    Family::log_normal,  Family::weibull,     Family::gamma,
    Family::student_t,   Family::exp_weibull, Family::power_log_normal,
};

std::string_view family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);
int param_count(Family f);
std::vector<std::string> param_names(Family f);

// true when the family's support is (0, inf); student_t covers all reals
bool positive_support(Family f);

// Throws ParamDomainError on wrong arity / non-finite / constraint violation.
void check_params(Family f, std::span<const double> params);

// Density; support violations return 0 (never throw). Unbounded densities
// at the support edge report +inf.
double pdf(Family f, std::span<const double> params, double x);

// ln pdf; -inf outside the support.
double log_pdf(Family f, std::span<const double> params, double x);

// Monotone, limits 0 and 1.
double cdf(Family f, std::span<const double> params, double x);

// Deterministic inverse-CDF / standard transform sampling.
std::vector<double> sample(Family f, std::span<const double> params, std::uint64_t seed,
                           std::size_t n);

class Rng;
double sample_one(Family f, std::span<const double> params, Rng& rng);

// shared normal helpers (also used by the fitter)
double normal_cdf(double z);
double log_normal_cdf_std(double z);  // ln Phi(z), stable deep in the left tail
double normal_quantile(double u);     // u in (0, 1)

}  // namespace mobmine
