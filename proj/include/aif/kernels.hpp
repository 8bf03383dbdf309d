#pragma once

// Data-parallel inner loops over the joint hidden-state space.
//
// Each kernel has an OpenMP version in aif::kernels and a plain loop in
// aif::kernels::serial. Parallel versions partition by output index only, so
// every output element is computed by the same sequence of floating-point
// operations as its serial counterpart and results are bit-identical.

#include <cstddef>
#include <span>
#include <vector>

#include "aif/model.hpp"

namespace aif::kernels {

/// Work below this many joint states runs on the calling thread.
inline constexpr std::size_t kParallelThreshold = 4096;

/// w[s] = prod_f q_f(s_f) over the joint state space.
std::vector<double> joint_product(const StateSpace& space, std::span<const Categorical> factors);

/// ll[s] = sum_m ln A_m[o_m, s]; -inf where any likelihood is zero.
std::vector<double> joint_log_likelihood(const GenerativeModel& m, const Observation& obs);

/// q(o) = sum_s A[o, s] w[s] for one modality.
std::vector<double> predictive(const Tensor& a, std::span<const double> weights);

/// h[s] = entropy of the outcome slice A[:, s].
std::vector<double> slice_entropy(const Tensor& a, std::size_t num_states);

namespace serial {

std::vector<double> joint_product(const StateSpace& space, std::span<const Categorical> factors);
std::vector<double> joint_log_likelihood(const GenerativeModel& m, const Observation& obs);
std::vector<double> predictive(const Tensor& a, std::span<const double> weights);
std::vector<double> slice_entropy(const Tensor& a, std::size_t num_states);

}  // namespace serial

}  // namespace aif::kernels
