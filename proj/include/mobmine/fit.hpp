#pragma once

#include <span>
#include <string>
#include <vector>

#include "mobmine/distributions.hpp"
#include "mobmine/errors.hpp"

namespace mobmine {

struct FittedModel {
  Family family = Family::log_normal;
  std::vector<double> params;
  double log_likelihood = 0.0;
  double ks_d = 0.0;
  double ks_p = 0.0;
  std::size_t n = 0;
};

struct FitOptions {
  long max_evals_per_start = 10000;  // per simplex start
  double simplex_tol = 1e-8;         // simplex diameter at convergence
  int n_starts = 5;
  bool parallel = true;  // block-parallel likelihood sums
};

// Raised when no start converges; carries the best point seen anyway.
class FitFailure : public Error {
public:
  FitFailure(std::string msg, FittedModel best)
      : Error(ErrorKind::fit, std::move(msg)), best_(std::move(best)) {}
  const FittedModel& best_so_far() const noexcept { return best_; }

private:
  FittedModel best_;
};

// Sum of ln pdf. The parallel path accumulates fixed-size blocks and merges
// them in block order, so the result does not depend on the thread count.
double log_likelihood(Family f, std::span<const double> params,
                      std::span<const double> data, bool parallel = true);

// Maximum-likelihood fit. log_normal is solved in closed form; the other
// families run a derivative-free simplex search over log-transformed
// positive parameters from 5 deterministic starts, keeping the best
// log-likelihood. ks_d/ks_p are left zero; see ks_test.
FittedModel fit_mle(Family f, std::span<const double> data, const FitOptions& opt = {});

struct KsResult {
  double d = 0.0;
  double p = 0.0;
};

// One-sample Kolmogorov-Smirnov test of data against cdf(f, params).
// d is the exact sup over the step ECDF; p uses the asymptotic Kolmogorov
// series at sqrt(n)*d.
KsResult ks_test(std::span<const double> data, Family f, std::span<const double> params);

// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2), truncated when
// terms drop below 1e-12.
double kolmogorov_q(double lambda);

struct FitRow {
  FittedModel model;
  bool ok = false;
  std::string error;  // set when the fit failed
};

// Fits every family, attaches K-S results and sorts the successful rows by
// ascending D (ties: higher p, then family enumeration order). Failed rows
// are appended after the ranked ones.
std::vector<FitRow> fit_and_rank(std::span<const double> data,
                                 std::span<const Family> families,
                                 const FitOptions& opt = {});

}  // namespace mobmine
