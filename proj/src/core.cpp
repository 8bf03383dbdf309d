#include "aif/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace aif {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::AllZero: return "AllZero";
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ModelInvalid: return "ModelInvalid";
    case Errc::TooLarge: return "TooLarge";
    case Errc::ZeroEvidence: return "ZeroEvidence";
    case Errc::BadControlIndex: return "BadControlIndex";
    case Errc::NonPositiveGamma: return "NonPositiveGamma";
    case Errc::Empty: return "Empty";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::CyclicWithTreeSweep: return "CyclicWithTreeSweep";
    case Errc::InvalidGraph: return "InvalidGraph";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::NotYetRun: return "NotYetRun";
    case Errc::SegmentTooLong: return "SegmentTooLong";
    case Errc::TooManySegments: return "TooManySegments";
    case Errc::VectorTooLong: return "VectorTooLong";
    case Errc::InvalidMessage: return "InvalidMessage";
    case Errc::InvalidAddress: return "InvalidAddress";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::Truncated: return "Truncated";
    case Errc::TrailingBytes: return "TrailingBytes";
    case Errc::CrcMismatch: return "CrcMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::NegativePrecision: return "NegativePrecision";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::Closed: return "Closed";
    case Errc::FrameTooLarge: return "FrameTooLarge";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IoError: return "IoError";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

// ---------------------------------------------------------------------------
// Categorical

Categorical::Categorical() : probs_{1.0} {}

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(Errc::Empty, "categorical needs at least one entry");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p)) throw Error(Errc::NonFinite, "categorical entry is not finite");
    if (p < 0.0) throw Error(Errc::NegativeEntry, "categorical entry is negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    std::ostringstream os;
    os.precision(17);
    os << "categorical sums to " << sum;
    throw Error(Errc::NotNormalized, os.str());
  }
}

Categorical::Categorical(std::initializer_list<double> probs)
    : Categorical(std::vector<double>(probs)) {}

Categorical Categorical::uniform(std::size_t n) {
  if (n == 0) throw Error(Errc::Empty, "uniform over zero outcomes");
  return Categorical(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Categorical Categorical::delta(std::size_t n, std::size_t index) {
  if (index >= n) throw Error(Errc::DimMismatch, "delta index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Categorical(std::move(p));
}

std::size_t Categorical::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (auto d : shape_) n *= d;
  data_.assign(n, fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  std::size_t n = 1;
  for (auto d : shape_) n *= d;
  if (n != data_.size()) throw Error(Errc::ShapeMismatch, "tensor data does not match its shape");
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw Error(Errc::ShapeMismatch, "tensor index rank mismatch");
  std::size_t off = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= shape_[k]) throw Error(Errc::ShapeMismatch, "tensor index out of range");
    off = off * shape_[k] + index[k];
  }
  return off;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(std::vector<std::size_t> dims) : dims_(std::move(dims)), strides_(dims_.size()) {
  std::size_t stride = 1;
  for (std::size_t f = dims_.size(); f-- > 0;) {
    strides_[f] = stride;
    stride *= dims_[f];
  }
  size_ = stride;
}

std::vector<std::size_t> StateSpace::decode(std::size_t joint) const {
  std::vector<std::size_t> out(dims_.size());
  for (std::size_t f = 0; f < dims_.size(); ++f) out[f] = digit(joint, f);
  return out;
}

std::size_t StateSpace::encode(std::span<const std::size_t> digits) const {
  std::size_t joint = 0;
  for (std::size_t f = 0; f < dims_.size(); ++f) joint += digits[f] * strides_[f];
  return joint;
}

// ---------------------------------------------------------------------------
// Elementary functionals

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

double xlogxy(double p, double q) {
  if (p <= 0.0) return 0.0;
  if (q <= 0.0) return std::numeric_limits<double>::infinity();
  return p * std::log(p / q);
}

Categorical normalize(std::span<const double> v) {
  if (v.empty()) throw Error(Errc::Empty, "normalize of an empty vector");
  double sum = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::NonFinite, "normalize input is not finite");
    if (x < 0.0) throw Error(Errc::NegativeEntry, "normalize input has a negative entry");
    sum += x;
  }
  if (sum == 0.0) throw Error(Errc::AllZero, "normalize input is all zero");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= sum;
  return Categorical(std::move(out));
}

std::vector<double> softmax_with_zeros(std::span<const double> logits) {
  if (logits.empty()) throw Error(Errc::Empty, "softmax of an empty vector");
  double top = -std::numeric_limits<double>::infinity();
  for (double x : logits) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
      throw Error(Errc::NonFinite, "softmax logit is NaN or +inf");
    top = std::max(top, x);
  }
  if (!std::isfinite(top)) throw Error(Errc::AllZero, "every logit is -inf");
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

Categorical softmax(std::span<const double> logits) {
  for (double x : logits)
    if (!std::isfinite(x)) throw Error(Errc::NonFinite, "softmax logit is not finite");
  return Categorical(softmax_with_zeros(logits));
}

std::vector<double> log_vec(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = v[i] > 0.0 ? std::log(v[i]) : -std::numeric_limits<double>::infinity();
  return out;
}

double kl_divergence(const Categorical& q, const Categorical& p) {
  if (q.size() != p.size()) throw Error(Errc::DimMismatch, "kl_divergence dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) kl += xlogxy(q[i], p[i]);
  // Rounding can push an exact zero slightly negative.
  return std::max(kl, 0.0);
}

double entropy(const Categorical& p) {
  double h = 0.0;
  for (double x : p.probs()) h -= xlogx(x);
  return std::max(h, 0.0);
}

}  // namespace aif
