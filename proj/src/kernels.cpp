#include "aif/kernels.hpp"

#include <cmath>
#include <limits>

namespace aif::kernels {

namespace {

inline double product_at(const StateSpace& space, std::span<const Categorical> factors, std::size_t s) {
  double w = 1.0;
  for (std::size_t f = 0; f < factors.size(); ++f) w *= factors[f][space.digit(s, f)];
  return w;
}

inline double log_likelihood_at(const GenerativeModel& m, const Observation& obs, std::size_t num_states, std::size_t s) {
  double ll = 0.0;
  for (std::size_t g = 0; g < obs.size(); ++g) {
    const double a = m.A[g].data()[obs[g] * num_states + s];
    ll += a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
  }
  return ll;
}

inline double predictive_at(std::span<const double> a, std::span<const double> w, std::size_t o) {
  const std::size_t n = w.size();
  double sum = 0.0;
  for (std::size_t s = 0; s < n; ++s) sum += a[o * n + s] * w[s];
  return sum;
}

inline double slice_entropy_at(std::span<const double> a, std::size_t outcomes, std::size_t n, std::size_t s) {
  double h = 0.0;
  for (std::size_t o = 0; o < outcomes; ++o) h -= xlogx(a[o * n + s]);
  return h;
}

void check_product_args(const StateSpace& space, std::span<const Categorical> factors) {
  if (factors.size() != space.num_factors()) throw Error(Errc::DimMismatch, "joint_product factor count mismatch");
  for (std::size_t f = 0; f < factors.size(); ++f)
    if (factors[f].size() != space.dims()[f]) throw Error(Errc::DimMismatch, "joint_product cardinality mismatch");
}

}  // namespace

std::vector<double> joint_product(const StateSpace& space, std::span<const Categorical> factors) {
  check_product_args(space, factors);
  const std::size_t n = space.size();
  std::vector<double> w(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t s = 0; s < count; ++s) w[s] = product_at(space, factors, static_cast<std::size_t>(s));
  return w;
}

std::vector<double> joint_log_likelihood(const GenerativeModel& m, const Observation& obs) {
  check_observation(m, obs);
  const std::size_t n = m.num_states();
  std::vector<double> ll(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t s = 0; s < count; ++s) ll[s] = log_likelihood_at(m, obs, n, static_cast<std::size_t>(s));
  return ll;
}

std::vector<double> predictive(const Tensor& a, std::span<const double> weights) {
  const std::size_t outcomes = a.shape().at(0);
  if (a.size() != outcomes * weights.size()) throw Error(Errc::DimMismatch, "predictive: weights do not match the likelihood");
  std::vector<double> q(outcomes);
  const auto count = static_cast<std::ptrdiff_t>(outcomes);
#pragma omp parallel for schedule(static) if (weights.size() >= kParallelThreshold)
  for (std::ptrdiff_t o = 0; o < count; ++o) q[o] = predictive_at(a.data(), weights, static_cast<std::size_t>(o));
  return q;
}

std::vector<double> slice_entropy(const Tensor& a, std::size_t num_states) {
  const std::size_t outcomes = a.shape().at(0);
  if (a.size() != outcomes * num_states) throw Error(Errc::DimMismatch, "slice_entropy: state count mismatch");
  std::vector<double> h(num_states);
  const auto count = static_cast<std::ptrdiff_t>(num_states);
#pragma omp parallel for schedule(static) if (num_states >= kParallelThreshold)
  for (std::ptrdiff_t s = 0; s < count; ++s) h[s] = slice_entropy_at(a.data(), outcomes, num_states, static_cast<std::size_t>(s));
  return h;
}

namespace serial {

std::vector<double> joint_product(const StateSpace& space, std::span<const Categorical> factors) {
  check_product_args(space, factors);
  std::vector<double> w(space.size());
  for (std::size_t s = 0; s < w.size(); ++s) w[s] = product_at(space, factors, s);
  return w;
}

std::vector<double> joint_log_likelihood(const GenerativeModel& m, const Observation& obs) {
  check_observation(m, obs);
  const std::size_t n = m.num_states();
  std::vector<double> ll(n);
  for (std::size_t s = 0; s < n; ++s) ll[s] = log_likelihood_at(m, obs, n, s);
  return ll;
}

std::vector<double> predictive(const Tensor& a, std::span<const double> weights) {
  const std::size_t outcomes = a.shape().at(0);
  if (a.size() != outcomes * weights.size()) throw Error(Errc::DimMismatch, "predictive: weights do not match the likelihood");
  std::vector<double> q(outcomes);
  for (std::size_t o = 0; o < outcomes; ++o) q[o] = predictive_at(a.data(), weights, o);
  return q;
}

std::vector<double> slice_entropy(const Tensor& a, std::size_t num_states) {
  const std::size_t outcomes = a.shape().at(0);
  if (a.size() != outcomes * num_states) throw Error(Errc::DimMismatch, "slice_entropy: state count mismatch");
  std::vector<double> h(num_states);
  for (std::size_t s = 0; s < num_states; ++s) h[s] = slice_entropy_at(a.data(), outcomes, num_states, s);
  return h;
}

}  // namespace serial

}  // namespace aif::kernels
