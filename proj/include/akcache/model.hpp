#pragma once

#include <cstddef>
#include <vector>

namespace akcache::model {

// Validates a probability vector: non-negative entries summing to 1 within
// max_drift; returns the renormalized vector or throws ConfigError.
std::vector<double> normalized(std::vector<double> p, double max_drift = 1e-9);

struct CharacteristicTime {
  double t_c = 0.0;
  double residual = 0.0;  // sum_i (1 - exp(-q_i t_c)) - K at the root
};

// Root of sum_i (1 - exp(-q_i t)) = K, |residual| <= 1e-6. Requires
// 1 <= K < |q|; q non-increasing and normalized.
CharacteristicTime solve_tc(const std::vector<double>& q, std::size_t K);

// Per-key LRU hit probabilities h_i = 1 - exp(-q_i t_c).
std::vector<double> lru_hit_probabilities(const std::vector<double>& q,
                                          double t_c);

// Aggregate LRU hit rate sum_i q_i h_i.
double lru_hit_rate(const std::vector<double>& q, double t_c);

// Ideal-cache hit rate: sum of the K largest popularities.
double ideal_hit_rate(const std::vector<double>& q, std::size_t K);

// Error probability of serving the insertion-time label: 1 - sum_j p_j^2.
double single_insertion_error(const std::vector<double>& p);

enum class PolicyModel { Lru, Ideal };

struct NoControlError {
  std::vector<double> e;  // per key
  double aggregate = 0.0;
};

// Error rate without any verification: LRU weights each key by q_i h_i,
// ideal sums q_i e_i over the top K keys.
NoControlError nocontrol_error(const std::vector<double>& q,
                               const std::vector<std::vector<double>>& mixtures,
                               std::size_t K, PolicyModel policy);

struct KeyRates {
  double refresh = 0.0;  // fraction of this key's arrivals that run inference
  double error = 0.0;    // fraction of this key's arrivals served a wrong label
};

// Closed-form per-key refresh and error rates for a permanently cached key
// under auto-refresh with back-off beta. A dominant class with probability
// >= 1/beta puts the key in the divergent regime (refresh 0, error
// 1 - p_max); otherwise the series are summed to the given truncation
// tolerance.
KeyRates prop1_ideal(const std::vector<double>& p, double beta,
                     double truncation_tol = 1e-10);

struct IdealSummary {
  double hit_rate = 0.0;
  double refresh_rate = 0.0;        // sum_{i<=K} q_i r_i
  double error_rate = 0.0;          // sum_{i<=K} q_i e_i
  double inference_fraction = 0.0;  // refresh_rate + (1 - hit_rate)
  std::vector<KeyRates> per_key;    // top K keys
};

IdealSummary refresh_and_error_ideal(
    const std::vector<double>& q,
    const std::vector<std::vector<double>>& mixtures, std::size_t K,
    double beta, double truncation_tol = 1e-10);

// Auto-refresh under LRU for one key with hit probability h: the key-run
// process (insertion to eviction or mismatch) is solved exactly per
// verification interval, with the run-start class distribution obtained by
// damped fixed-point iteration. Returns the fraction of the key's arrivals
// requiring inference (insertions included) and the error fraction.
KeyRates lru_autorefresh_key(double h, const std::vector<double>& p,
                             double beta, double truncation_tol = 1e-9);

// Per-key LRU auto-refresh rates for a whole popularity law; solves the
// characteristic time internally.
std::vector<KeyRates> lru_autorefresh_numeric(
    const std::vector<double>& q,
    const std::vector<std::vector<double>>& mixtures, std::size_t K,
    double beta, double truncation_tol = 1e-9);

// Everything the `model` CLI subcommand emits.
struct ModelReport {
  double t_c = 0.0;
  std::size_t capacity = 0;
  double beta = 0.0;
  std::vector<double> q;
  std::vector<double> h_lru;
  std::vector<double> e_nc;
  std::vector<KeyRates> ideal;  // sized |q|; zero for rank > K
  std::vector<KeyRates> lru;    // empty unless with_lru_numeric
  double hit_rate_lru = 0.0;
  double hit_rate_ideal = 0.0;
  double e_nc_lru = 0.0;
  double e_nc_ideal = 0.0;
  double refresh_rate_ideal = 0.0;
  double error_rate_ideal = 0.0;
  double inference_fraction_ideal = 0.0;
  double inference_fraction_lru = 0.0;  // sum q_i r_i, insertions included
  double error_rate_lru = 0.0;
};

ModelReport build_report(const std::vector<double>& q,
                         const std::vector<std::vector<double>>& mixtures,
                         std::size_t K, double beta, bool with_lru_numeric,
                         double truncation_tol = 1e-10);

}  // namespace akcache::model
