#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aif {

enum class Errc {
  AllZero,
  NegativeEntry,
  NonFinite,
  NotNormalized,
  DimMismatch,
  ShapeMismatch,
  ModelInvalid,
  TooLarge,
  ZeroEvidence,
  BadControlIndex,
  NonPositiveGamma,
  Empty,
  BudgetExceeded,
  CyclicWithTreeSweep,
  InvalidGraph,
  UnknownVariable,
  NotYetRun,
  SegmentTooLong,
  TooManySegments,
  VectorTooLong,
  InvalidMessage,
  InvalidAddress,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  TrailingBytes,
  CrcMismatch,
  NonFiniteValue,
  NegativePrecision,
  KTooLarge,
  Closed,
  FrameTooLarge,
  ConfigInvalid,
  IoError,
  InvalidArgument,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Tolerance used for every stochasticity check (sums to one).
inline constexpr double kProbTol = 1e-9;
/// Finite stand-in for ln 0 where an update would otherwise see -inf * 0.
inline constexpr double kLogFloor = -700.0;

/// Normalized probability vector. Immutable once constructed.
class Categorical {
 public:
  /// Point mass on a single outcome.
  Categorical();
  /// Validates that `probs` is non-empty, non-negative and sums to one within kProbTol.
  explicit Categorical(std::vector<double> probs);
  Categorical(std::initializer_list<double> probs);

  static Categorical uniform(std::size_t n);
  static Categorical delta(std::size_t n, std::size_t index);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  const std::vector<double>& vec() const noexcept { return probs_; }
  std::size_t argmax() const;

  friend bool operator==(const Categorical&, const Categorical&) = default;

 private:
  std::vector<double> probs_;
};

/// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const;
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Mixed-radix enumeration of joint hidden states, last factor fastest.
class StateSpace {
 public:
  explicit StateSpace(std::vector<std::size_t> dims);

  std::size_t size() const noexcept { return size_; }
  std::size_t num_factors() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t stride(std::size_t factor) const { return strides_[factor]; }
  /// Index of `factor` inside the joint state `joint`.
  std::size_t digit(std::size_t joint, std::size_t factor) const {
    return (joint / strides_[factor]) % dims_[factor];
  }
  std::vector<std::size_t> decode(std::size_t joint) const;
  std::size_t encode(std::span<const std::size_t> digits) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

// Zero-probability convention used throughout: 0 * ln 0 = 0.

Categorical normalize(std::span<const double> v);
Categorical softmax(std::span<const double> logits);
double kl_divergence(const Categorical& q, const Categorical& p);
double entropy(const Categorical& p);

/// Softmax that accepts -inf entries (zero mass); at least one entry must be finite.
std::vector<double> softmax_with_zeros(std::span<const double> logits);
/// Elementwise ln, mapping 0 to -inf.
std::vector<double> log_vec(std::span<const double> v);
/// p * ln p with the 0 * ln 0 = 0 convention.
double xlogx(double p);
/// p * ln(p / q) with 0 * ln(0 / q) = 0 and +inf when p > 0 == q.
double xlogxy(double p, double q);

}  // namespace aif
