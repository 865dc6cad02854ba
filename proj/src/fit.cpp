#include "mobmine/fit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace mobmine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kBlock = 4096;

struct DataStats {
  std::size_t n = 0;
  double mean = 0, sd = 1;
  double mean_log = 0, sd_log = 1;
  double median = 0;
};

DataStats compute_stats(std::span<const double> xs, bool with_logs) {
  DataStats s;
  s.n = xs.size();
  double sum = 0, sum_log = 0;
  for (double x : xs) sum += x;
  s.mean = sum / s.n;
  double ss = 0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / s.n);
  if (s.sd <= 0) s.sd = std::max(1e-12, std::fabs(s.mean) * 1e-6 + 1e-12);
  if (with_logs) {
    for (double x : xs) sum_log += std::log(x);
    s.mean_log = sum_log / s.n;
    double ssl = 0;
    for (double x : xs) {
      const double d = std::log(x) - s.mean_log;
      ssl += d * d;
    }
    s.sd_log = std::sqrt(ssl / s.n);
    if (s.sd_log <= 0) s.sd_log = 1e-6;
  }
  std::vector<double> sorted(xs.begin(), xs.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  s.median = sorted[sorted.size() / 2];
  return s;
}

// ---- Nelder-Mead ------------------------------------------------------

struct SimplexResult {
  std::vector<double> x;
  double f = kInf;
  long evals = 0;
  bool converged = false;
};

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& fn,
                          std::vector<double> x0, double step, double tol,
                          long max_evals) {
  const std::size_t d = x0.size();
  std::vector<std::vector<double>> xs(d + 1, x0);
  for (std::size_t i = 0; i < d; ++i) xs[i + 1][i] += step;

  long evals = 0;
  auto eval = [&](std::span<const double> x) {
    ++evals;
    const double v = fn(x);
    return std::isnan(v) ? kInf : v;
  };

  std::vector<double> fs(d + 1);
  for (std::size_t i = 0; i <= d; ++i) fs[i] = eval(xs[i]);

  std::vector<std::size_t> idx(d + 1);
  auto reorder = [&] {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return fs[a] < fs[b];
    });
  };
  auto diameter = [&] {
    double dm = 0;
    for (std::size_t i = 0; i <= d; ++i) {
      double dist2 = 0;
      for (std::size_t k = 0; k < d; ++k) {
        const double dd = xs[i][k] - xs[idx[0]][k];
        dist2 += dd * dd;
      }
      dm = std::max(dm, std::sqrt(dist2));
    }
    return dm;
  };

  reorder();
  bool converged = false;
  while (evals < max_evals) {
    if (diameter() < tol) {
      converged = true;
      break;
    }
    const std::size_t worst = idx[d];
    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < d; ++k) centroid[k] += xs[i][k];
    }
    for (double& c : centroid) c /= static_cast<double>(d);

    auto blend = [&](double coef) {
      std::vector<double> p(d);
      for (std::size_t k = 0; k < d; ++k) {
        p[k] = centroid[k] + coef * (xs[worst][k] - centroid[k]);
      }
      return p;
    };

    std::vector<double> xr = blend(-1.0);
    const double fr = eval(xr);
    if (fr < fs[idx[0]]) {
      std::vector<double> xe = blend(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = std::move(xe);
        fs[worst] = fe;
      } else {
        xs[worst] = std::move(xr);
        fs[worst] = fr;
      }
    } else if (fr < fs[idx[d - 1]]) {
      xs[worst] = std::move(xr);
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      std::vector<double> xc = blend(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = std::move(xc);
        fs[worst] = fc;
      } else {
        // shrink toward the best vertex
        for (std::size_t i = 0; i <= d; ++i) {
          if (i == idx[0]) continue;
          for (std::size_t k = 0; k < d; ++k) {
            xs[i][k] = xs[idx[0]][k] + 0.5 * (xs[i][k] - xs[idx[0]][k]);
          }
          fs[i] = eval(xs[i]);
        }
      }
    }
    reorder();
  }
  reorder();
  return {xs[idx[0]], fs[idx[0]], evals, converged};
}

// ---- per-family starting points ---------------------------------------

// moments of W_p = Phi^{-1}(V^{1/p}); midpoint rule is plenty for starts
void pln_w_moments(double p, double& mean, double& var) {
  constexpr int kN = 2048;
  double m1 = 0, m2 = 0;
  for (int i = 0; i < kN; ++i) {
    const double u = (i + 0.5) / kN;
    const double w = normal_quantile(std::pow(u, 1.0 / p));
    m1 += w;
    m2 += w * w;
  }
  m1 /= kN;
  m2 /= kN;
  mean = m1;
  var = std::max(1e-12, m2 - m1 * m1);
}

// matches mean/sd of ln x to the p-parameterized moments; used as a start
void pln_moment_start(const DataStats& s, double& p_hat, double& sigma_hat) {
  auto sigma_for = [&](double p) {
    double m, v;
    pln_w_moments(p, m, v);
    return s.sd_log / std::sqrt(v);
  };
  auto g = [&](double p) {
    double m, v;
    pln_w_moments(p, m, v);
    return -(s.sd_log / std::sqrt(v)) * m - s.mean_log;
  };
  double lo = 0.02, hi = 50.0;
  if (g(lo) <= 0.0) {
    p_hat = lo;
  } else if (g(hi) >= 0.0) {
    p_hat = hi;
  } else {
    for (int it = 0; it < 60; ++it) {
      const double mid = std::sqrt(lo * hi);
      (g(mid) > 0.0 ? lo : hi) = mid;
    }
    p_hat = std::sqrt(lo * hi);
  }
  sigma_hat = sigma_for(p_hat);
}

std::vector<std::vector<double>> family_starts(Family f, const DataStats& s) {
  switch (f) {
    case Family::weibull: {
      const double k0 = std::clamp(std::pow(s.sd / s.mean, -1.086), 0.05, 80.0);
      double lam0 = s.mean;
      if (k0 < 30.0) {
        const double g = std::tgamma(1.0 + 1.0 / k0);
        if (std::isfinite(g) && g > 0) lam0 = s.mean / g;
      }
      return {{k0, lam0}, {2 * k0, lam0}, {0.5 * k0, lam0}, {1.0, s.mean}, {k0, 2 * lam0}};
    }
    case Family::gamma: {
      const double a0 = std::clamp(s.mean * s.mean / (s.sd * s.sd), 1e-3, 1e6);
      return {{a0, a0 / s.mean},
              {2 * a0, 2 * a0 / s.mean},
              {0.5 * a0, 0.5 * a0 / s.mean},
              {4 * a0, 4 * a0 / s.mean},
              {0.25 * a0, 0.25 * a0 / s.mean}};
    }
    case Family::student_t: {
      return {{4.0, s.median, 0.8 * s.sd},
              {1.5, s.median, 0.5 * s.sd},
              {10.0, s.median, s.sd},
              {30.0, s.mean, s.sd},
              {2.5, s.median, 1.2 * s.sd}};
    }
    case Family::exp_weibull: {
      const double k0 = std::clamp(std::pow(s.sd / s.mean, -1.086), 0.05, 80.0);
      double lam0 = s.mean;
      if (k0 < 30.0) {
        const double g = std::tgamma(1.0 + 1.0 / k0);
        if (std::isfinite(g) && g > 0) lam0 = s.mean / g;
      }
      return {{k0, 1.0, lam0},
              {0.5 * k0, 2.0, lam0},
              {2 * k0, 0.5, lam0},
              {k0, 0.5, 1.5 * lam0},
              {1.0, 1.0, s.mean}};
    }
    case Family::power_log_normal: {
      double p0, sig0;
      pln_moment_start(s, p0, sig0);
      auto sigma_of = [&](double p) {
        double m, v;
        pln_w_moments(p, m, v);
        return s.sd_log / std::sqrt(v);
      };
      return {{p0, sig0},
              {2 * p0, sigma_of(2 * p0)},
              {0.5 * p0, sigma_of(0.5 * p0)},
              {1.0, s.sd_log},
              {p0, 1.5 * sig0}};
    }
    default: return {};
  }
}

}  // namespace

double log_likelihood(Family f, std::span<const double> params,
                      std::span<const double> data, bool parallel) {
  check_params(f, params);
  const std::size_t n = data.size();
  const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(n_blocks, 0.0);
#pragma omp parallel for schedule(static) if (parallel && n_blocks > 1)
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += log_pdf(f, params, data[i]);
    partial[b] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

FittedModel fit_mle(Family f, std::span<const double> data, const FitOptions& opt) {
  if (data.size() < 10) throw DataError("fit_mle: need at least 10 observations");
  if (positive_support(f)) {
    for (double x : data) {
      if (!(x > 0.0)) throw DataError("fit_mle: observation outside support");
    }
  }
  for (double x : data) {
    if (!std::isfinite(x)) throw DataError("fit_mle: non-finite observation");
  }

  if (f == Family::log_normal) {
    double mu = 0;
    for (double x : data) mu += std::log(x);
    mu /= static_cast<double>(data.size());
    double ss = 0;
    for (double x : data) {
      const double d = std::log(x) - mu;
      ss += d * d;
    }
    const double sigma = std::max(std::sqrt(ss / static_cast<double>(data.size())), 1e-12);
    FittedModel m;
    m.family = f;
    m.params = {mu, sigma};
    m.log_likelihood = log_likelihood(f, m.params, data, opt.parallel);
    m.n = data.size();
    return m;
  }

  const DataStats stats = compute_stats(data, positive_support(f));
  std::vector<std::vector<double>> starts = family_starts(f, stats);
  starts.resize(static_cast<std::size_t>(opt.n_starts), starts.back());

  // log-transform the positive parameters; student_t's loc stays linear
  const int dim = param_count(f);
  std::vector<bool> log_dim(dim, true);
  if (f == Family::student_t) log_dim[1] = false;

  auto encode = [&](std::span<const double> nat) {
    std::vector<double> y(nat.size());
    for (int i = 0; i < dim; ++i) y[i] = log_dim[i] ? std::log(nat[i]) : nat[i];
    return y;
  };
  auto decode = [&](std::span<const double> y) {
    std::vector<double> nat(y.size());
    for (int i = 0; i < dim; ++i) nat[i] = log_dim[i] ? std::exp(y[i]) : y[i];
    return nat;
  };

  auto objective = [&](std::span<const double> y) -> double {
    const std::vector<double> nat = decode(y);
    for (double v : nat) {
      if (!std::isfinite(v)) return kInf;
    }
    const double ll = log_likelihood(f, nat, data, opt.parallel);
    return std::isfinite(ll) ? -ll : kInf;
  };

  bool any_converged = false;
  double best_f = kInf;
  std::vector<double> best_x;
  for (const auto& start : starts) {
    SimplexResult r = nelder_mead(objective, encode(start), 0.3, opt.simplex_tol,
                                  opt.max_evals_per_start);
    any_converged = any_converged || r.converged;
    if (r.f < best_f) {
      best_f = r.f;
      best_x = r.x;
    }
  }

  FittedModel m;
  m.family = f;
  m.params = decode(best_x);
  m.log_likelihood = -best_f;
  m.n = data.size();
  if (!any_converged) {
    throw FitFailure(std::string(family_name(f)) + ": no simplex start converged", m);
  }
  return m;
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100000; ++k) {
    const double term = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
    if (term < 1e-12) break;
    sum += (k % 2 == 1) ? term : -term;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> data, Family f, std::span<const double> params) {
  check_params(f, params);
  if (data.empty()) throw DataError("ks_test: empty sample");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double fx = cdf(f, params, sorted[i]);
    d = std::max(d, std::max((i + 1) / n - fx, fx - i / n));
  }
  return {d, kolmogorov_q(std::sqrt(n) * d)};
}

std::vector<FitRow> fit_and_rank(std::span<const double> data,
                                 std::span<const Family> families,
                                 const FitOptions& opt) {
  if (families.empty()) throw UsageError("fit_and_rank: empty family list");
  std::vector<FitRow> ok_rows, failed_rows;
  std::vector<int> enum_order;
  for (Family f : families) {
    FitRow row;
    try {
      row.model = fit_mle(f, data, opt);
      const KsResult ks = ks_test(data, f, row.model.params);
      row.model.ks_d = ks.d;
      row.model.ks_p = ks.p;
      row.ok = true;
      ok_rows.push_back(std::move(row));
      enum_order.push_back(static_cast<int>(f));
    } catch (const FitFailure& e) {
      row.model = e.best_so_far();
      row.ok = false;
      row.error = e.what();
      failed_rows.push_back(std::move(row));
    } catch (const Error& e) {
      row.model.family = f;
      row.ok = false;
      row.error = e.what();
      failed_rows.push_back(std::move(row));
    }
  }
  std::vector<std::size_t> idx(ok_rows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = ok_rows[a].model;
    const auto& mb = ok_rows[b].model;
    if (ma.ks_d != mb.ks_d) return ma.ks_d < mb.ks_d;
    if (ma.ks_p != mb.ks_p) return ma.ks_p > mb.ks_p;
    return enum_order[a] < enum_order[b];
  });
  std::vector<FitRow> out;
  out.reserve(ok_rows.size() + failed_rows.size());
  for (std::size_t i : idx) out.push_back(std::move(ok_rows[i]));
  for (auto& r : failed_rows) out.push_back(std::move(r));
  return out;
}

}  // namespace mobmine
