#include "akcache/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "akcache/cache.hpp"
#include "akcache/error.hpp"

namespace akcache::model {

namespace {

constexpr std::int64_t kPhiSaturated = 1LL << 62;

void check_nonincreasing(const std::vector<double>& q) {
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[i - 1] + 1e-15) {
      throw ConfigError("popularity law must be non-increasing");
    }
  }
}

double residual_at(const std::vector<double>& q, double t, std::size_t K) {
  double s = 0.0;
  for (double qi : q) s += -std::expm1(-qi * t);
  return s - static_cast<double>(K);
}

}  // namespace

std::vector<double> normalized(std::vector<double> p, double max_drift) {
  if (p.empty()) throw ConfigError("empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw ConfigError("probability entries must be finite and >= 0");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > max_drift) {
    throw ConfigError("probability vector sums to " + std::to_string(sum) +
                      ", outside tolerated drift");
  }
  for (double& v : p) v /= sum;
  return p;
}

CharacteristicTime solve_tc(const std::vector<double>& q, std::size_t K) {
  if (K < 1 || K >= q.size()) {
    throw ConfigError("characteristic time requires 1 <= K < number of keys");
  }
  check_nonincreasing(q);

  double lo = 0.0, hi = 1.0;
  while (residual_at(q, hi, K) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("characteristic time bracket blew up");
  }
  double mid = hi, res = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    res = residual_at(q, mid, K);
    if (std::abs(res) <= 1e-7 || hi - lo < 1e-12 * std::max(1.0, mid)) break;
    (res < 0.0 ? lo : hi) = mid;
  }
  return {mid, res};
}

std::vector<double> lru_hit_probabilities(const std::vector<double>& q,
                                          double t_c) {
  std::vector<double> h(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) h[i] = -std::expm1(-q[i] * t_c);
  return h;
}

double lru_hit_rate(const std::vector<double>& q, double t_c) {
  double s = 0.0;
  for (double qi : q) s += qi * -std::expm1(-qi * t_c);
  return s;
}

double ideal_hit_rate(const std::vector<double>& q, std::size_t K) {
  if (K > q.size()) throw ConfigError("ideal hit rate requires K <= key count");
  check_nonincreasing(q);
  double s = 0.0;
  for (std::size_t i = 0; i < K; ++i) s += q[i];
  return s;
}

double single_insertion_error(const std::vector<double>& p) {
  double s = 0.0;
  for (double v : p) s += v * v;
  return 1.0 - s;
}

NoControlError nocontrol_error(const std::vector<double>& q,
                               const std::vector<std::vector<double>>& mixtures,
                               std::size_t K, PolicyModel policy) {
  if (mixtures.size() != q.size()) {
    throw ConfigError("mixture count must match key count");
  }
  NoControlError out;
  out.e.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    out.e[i] = single_insertion_error(normalized(mixtures[i]));
  }
  if (policy == PolicyModel::Ideal) {
    if (K > q.size()) throw ConfigError("K exceeds key count");
    for (std::size_t i = 0; i < K; ++i) out.aggregate += q[i] * out.e[i];
  } else {
    const double t_c = solve_tc(q, K).t_c;
    for (std::size_t i = 0; i < q.size(); ++i) {
      out.aggregate += q[i] * -std::expm1(-q[i] * t_c) * out.e[i];
    }
  }
  return out;
}

KeyRates prop1_ideal(const std::vector<double>& p_raw, double beta,
                     double truncation_tol) {
  if (!(beta > 1.0)) throw ConfigError("prop1 requires beta > 1");
  const std::vector<double> p = normalized(p_raw);
  const double p_max = *std::max_element(p.begin(), p.end());
  if (p_max * beta >= 1.0) {
    // Dominant class: verifications become vanishingly rare and the error
    // is that of always serving the dominant label.
    return {0.0, 1.0 - p_max};
  }

  const double ln_beta = std::log(beta);
  double den = 0.0, num_e = 0.0;
  for (double pj : p) {
    if (pj <= 0.0) continue;
    const double ln_p = std::log(pj);
    const double w2 = (1.0 - pj) * (1.0 - pj);
    const double w3 = w2 * (1.0 - pj);
    double den_j = 0.0, num_j = 0.0;
    int quiet = 0;
    for (std::uint32_t n = 2; n < 4000000; ++n) {
      const std::int64_t phi = phi_index(beta, n);
      const double log_pp = (n - 1) * ln_p;
      double den_term, e_term;
      if (phi < kPhiSaturated) {
        const double pp = std::exp(log_pp);
        den_term = static_cast<double>(phi - 1) * pp;
        e_term = static_cast<double>(phi - n) * pp;
      } else {
        den_term = std::exp(log_pp + (n - 1) * ln_beta);
        e_term = den_term;
      }
      den_j += den_term;
      num_j += e_term;
      if (den_term < truncation_tol * den_j) {
        if (++quiet >= 3) break;
      } else {
        quiet = 0;
      }
      if (n + 1 == 4000000) {
        throw NumericError("prop1 series did not truncate (beta*p close to 1)");
      }
    }
    den += w2 * den_j;
    num_e += w3 * num_j;
  }
  return {1.0 / den, num_e / den};
}

IdealSummary refresh_and_error_ideal(
    const std::vector<double>& q,
    const std::vector<std::vector<double>>& mixtures, std::size_t K,
    double beta, double truncation_tol) {
  if (mixtures.size() != q.size()) {
    throw ConfigError("mixture count must match key count");
  }
  if (K > q.size()) throw ConfigError("K exceeds key count");
  IdealSummary out;
  out.hit_rate = ideal_hit_rate(q, K);
  out.per_key.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    out.per_key[i] = prop1_ideal(mixtures[i], beta, truncation_tol);
    out.refresh_rate += q[i] * out.per_key[i].refresh;
    out.error_rate += q[i] * out.per_key[i].error;
  }
  out.inference_fraction = out.refresh_rate + (1.0 - out.hit_rate);
  return out;
}

KeyRates lru_autorefresh_key(double h, const std::vector<double>& p_raw,
                             double beta, double truncation_tol) {
  if (!(beta > 1.0)) throw ConfigError("auto-refresh model requires beta > 1");
  if (!(h >= 0.0) || h >= 1.0) {
    throw ConfigError("per-key hit probability must lie in [0, 1)");
  }
  const std::vector<double> p = normalized(p_raw);
  if (h < 1e-12) return {1.0, 0.0};  // never cached between arrivals

  const std::size_t m = p.size();
  const double ln_h = std::log(h);
  const double inv_1mh2 = 1.0 / ((1.0 - h) * (1.0 - h));

  // Tail of sum_{a>=A} a h^a, used for exact per-interval sums.
  auto weighted_tail = [&](double A) {
    return std::exp(A * ln_h) * (A - (A - 1.0) * h) * inv_1mh2;
  };

  // Per run-start class j: total run mass split by cause, arrival-weighted
  // mass, inference-count mass, and unverified-arrival error mass.
  std::vector<double> mm_raw(m, 0.0), lru_mass(m, 0.0), den(m, 0.0),
      num_r(m, 0.0), num_e(m, 0.0);

  for (std::size_t j = 0; j < m; ++j) {
    const double pj = p[j];
    double pp = 1.0;  // p_j^{n-1}
    int quiet = 0;
    std::int64_t phi_n = phi_index(beta, 1);
    for (std::uint32_t n = 1; n < 4000000; ++n, pp *= pj) {
      const std::int64_t phi_next = phi_index(beta, n + 1);
      const double h_phi_n = std::exp(static_cast<double>(phi_n) * ln_h);
      const double h_phi_next =
          std::exp(static_cast<double>(phi_next) * ln_h);

      // Runs evicted with length in [phi_n, phi_next - 1]: n inferences.
      const double gap_factor =
          -std::expm1(static_cast<double>(phi_next - phi_n) * ln_h);
      const double evict_mass = pp * h_phi_n * gap_factor;
      const double evict_weighted =
          pp * (1.0 - h) *
          (weighted_tail(static_cast<double>(phi_n)) -
           weighted_tail(static_cast<double>(phi_next)));

      // Runs ended by a mismatch at the (n+1)-th inference: length
      // phi_next - 1, n inferences counted with this run.
      const double mm_point = h_phi_next * pp;  // (1 - p_j) applied below
      const double mm_mass = mm_point * (1.0 - pj);
      const double phi_next_d = static_cast<double>(phi_next);

      lru_mass[j] += evict_mass;
      mm_raw[j] += mm_point;
      const double den_add = evict_weighted + (phi_next_d - 1.0) * mm_mass;
      den[j] += den_add;
      num_r[j] += n * evict_mass + n * mm_mass;
      num_e[j] += (evict_weighted - n * evict_mass) +
                  (phi_next_d - 1.0 - n) * mm_mass;

      if (den_add < truncation_tol * den[j]) {
        if (++quiet >= 3) break;
      } else {
        quiet = 0;
      }
      if (n + 1 == 4000000) {
        throw NumericError("LRU auto-refresh series did not truncate");
      }
      phi_n = phi_next;
    }
    num_e[j] *= (1.0 - pj);
  }

  // Stationary run-start distribution. A mismatch of a k-run starts a
  // j-run with the conditional class draw; an eviction restarts with a
  // fresh draw from the mixture.
  std::vector<double> pi(m, 1.0 / static_cast<double>(m)), next(m);
  double residual = 0.0;
  bool converged = false;
  for (int iter = 0; iter < 100000; ++iter) {
    double lru_total = 0.0;
    for (std::size_t k = 0; k < m; ++k) lru_total += pi[k] * lru_mass[k];
    double mm_total = 0.0;
    for (std::size_t k = 0; k < m; ++k) mm_total += pi[k] * mm_raw[k];
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      next[j] = p[j] * (lru_total + mm_total - pi[j] * mm_raw[j]);
      sum += next[j];
    }
    residual = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      next[j] /= sum;
      residual = std::max(residual, std::abs(next[j] - pi[j]));
      pi[j] = 0.5 * pi[j] + 0.5 * next[j];
    }
    if (residual <= 1e-10) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericError(
        "run-start distribution fixed point did not converge: residual " +
        std::to_string(residual));
  }

  double D = 0.0, R = 0.0, E = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    D += pi[j] * den[j];
    R += pi[j] * num_r[j];
    E += pi[j] * num_e[j];
  }
  return {R / D, E / D};
}

std::vector<KeyRates> lru_autorefresh_numeric(
    const std::vector<double>& q,
    const std::vector<std::vector<double>>& mixtures, std::size_t K,
    double beta, double truncation_tol) {
  if (mixtures.size() != q.size()) {
    throw ConfigError("mixture count must match key count");
  }
  const double t_c = solve_tc(q, K).t_c;
  std::vector<KeyRates> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    out[i] = lru_autorefresh_key(-std::expm1(-q[i] * t_c), mixtures[i], beta,
                                 truncation_tol);
  }
  return out;
}

ModelReport build_report(const std::vector<double>& q,
                         const std::vector<std::vector<double>>& mixtures,
                         std::size_t K, double beta, bool with_lru_numeric,
                         double truncation_tol) {
  ModelReport rep;
  rep.capacity = K;
  rep.beta = beta;
  rep.q = q;
  const auto tc = solve_tc(q, K);
  rep.t_c = tc.t_c;
  rep.h_lru = lru_hit_probabilities(q, tc.t_c);
  rep.hit_rate_lru = lru_hit_rate(q, tc.t_c);
  rep.hit_rate_ideal = ideal_hit_rate(q, K);
  rep.e_nc.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    rep.e_nc[i] = single_insertion_error(normalized(mixtures[i]));
    rep.e_nc_lru += q[i] * rep.h_lru[i] * rep.e_nc[i];
  }
  for (std::size_t i = 0; i < K; ++i) rep.e_nc_ideal += q[i] * rep.e_nc[i];

  auto ideal = refresh_and_error_ideal(q, mixtures, K, beta, truncation_tol);
  rep.ideal.assign(q.size(), KeyRates{});
  for (std::size_t i = 0; i < K; ++i) rep.ideal[i] = ideal.per_key[i];
  rep.refresh_rate_ideal = ideal.refresh_rate;
  rep.error_rate_ideal = ideal.error_rate;
  rep.inference_fraction_ideal = ideal.inference_fraction;

  if (with_lru_numeric) {
    rep.lru = lru_autorefresh_numeric(q, mixtures, K, beta,
                                      std::max(truncation_tol, 1e-12));
    for (std::size_t i = 0; i < q.size(); ++i) {
      rep.inference_fraction_lru += q[i] * rep.lru[i].refresh;
      rep.error_rate_lru += q[i] * rep.lru[i].error;
    }
  }
  return rep;
}

}  // namespace akcache::model
