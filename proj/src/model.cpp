#include "aif/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aif {

std::size_t GenerativeModel::num_controls(std::size_t factor) const {
  if (factor >= B.size() || B[factor].rank() != 3) throw Error(Errc::DimMismatch, "no transition tensor for factor");
  return B[factor].shape()[2];
}

std::size_t GenerativeModel::num_states() const {
  std::size_t n = 1;
  for (auto d : factor_dims) n *= d;
  return n;
}

namespace {

std::string join_index(std::span<const std::size_t> idx) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
  os << ']';
  return os.str();
}

}  // namespace

std::vector<Violation> validate_model(const GenerativeModel& m) {
  std::vector<Violation> out;
  auto add = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };

  if (m.factor_dims.empty()) add("factor_dims", "at least one hidden-state factor is required");
  for (std::size_t f = 0; f < m.factor_dims.size(); ++f)
    if (m.factor_dims[f] < 2) add("factor_dims[" + std::to_string(f) + "]", "cardinality must be >= 2");
  if (m.modality_dims.empty()) add("modality_dims", "at least one modality is required");
  for (std::size_t g = 0; g < m.modality_dims.size(); ++g)
    if (m.modality_dims[g] < 2) add("modality_dims[" + std::to_string(g) + "]", "cardinality must be >= 2");

  const StateSpace space(m.factor_dims);
  const std::size_t num_states = space.size();

  // Likelihoods.
  if (m.A.size() != m.modality_dims.size()) add("A", "expected one likelihood tensor per modality");
  for (std::size_t g = 0; g < std::min(m.A.size(), m.modality_dims.size()); ++g) {
    const auto& a = m.A[g];
    std::vector<std::size_t> want{m.modality_dims[g]};
    want.insert(want.end(), m.factor_dims.begin(), m.factor_dims.end());
    const std::string base = "A[" + std::to_string(g) + "]";
    if (a.shape() != want) {
      add(base, "shape " + join_index(a.shape()) + " does not match " + join_index(want));
      continue;
    }
    const auto data = a.data();
    const std::size_t outcomes = m.modality_dims[g];
    for (std::size_t s = 0; s < num_states; ++s) {
      double sum = 0.0;
      bool bad = false;
      for (std::size_t o = 0; o < outcomes; ++o) {
        const double v = data[o * num_states + s];
        if (!std::isfinite(v) || v < 0.0) bad = true;
        sum += v;
      }
      const std::string path = base + "[:," + join_index(space.decode(s)).substr(1);
      if (bad) add(path, "slice has a negative or non-finite entry");
      if (std::abs(sum - 1.0) > kProbTol) {
        std::ostringstream os;
        os.precision(12);
        os << "slice sums to " << sum;
        add(path, os.str());
      }
    }
  }

  // Transitions.
  if (m.B.size() != m.factor_dims.size()) add("B", "expected one transition tensor per factor");
  for (std::size_t f = 0; f < std::min(m.B.size(), m.factor_dims.size()); ++f) {
    const auto& b = m.B[f];
    const std::string base = "B[" + std::to_string(f) + "]";
    const std::size_t n = m.factor_dims[f];
    if (b.rank() != 3 || b.shape()[0] != n || b.shape()[1] != n || b.shape()[2] < 1) {
      add(base, "shape " + join_index(b.shape()) + " must be [" + std::to_string(n) + "," + std::to_string(n) + ",controls>=1]");
      continue;
    }
    const std::size_t controls = b.shape()[2];
    for (std::size_t u = 0; u < controls; ++u) {
      for (std::size_t s = 0; s < n; ++s) {
        double sum = 0.0;
        bool bad = false;
        for (std::size_t sp = 0; sp < n; ++sp) {
          const double v = b.at({sp, s, u});
          if (!std::isfinite(v) || v < 0.0) bad = true;
          sum += v;
        }
        const std::string path = base + "[:," + std::to_string(s) + "," + std::to_string(u) + "]";
        if (bad) add(path, "column has a negative or non-finite entry");
        if (std::abs(sum - 1.0) > kProbTol) {
          std::ostringstream os;
          os.precision(12);
          os << "column sums to " << sum;
          add(path, os.str());
        }
      }
    }
  }

  // Preferences.
  if (m.C.size() != m.modality_dims.size()) add("C", "expected one preference vector per modality");
  for (std::size_t g = 0; g < std::min(m.C.size(), m.modality_dims.size()); ++g) {
    const std::string base = "C[" + std::to_string(g) + "]";
    if (m.C[g].size() != m.modality_dims[g]) add(base, "length does not match modality cardinality");
    for (std::size_t o = 0; o < m.C[g].size(); ++o)
      if (!std::isfinite(m.C[g][o])) add(base + "[" + std::to_string(o) + "]", "preference is not finite");
  }

  // Initial priors.
  if (m.D.size() != m.factor_dims.size()) add("D", "expected one prior per factor");
  for (std::size_t f = 0; f < std::min(m.D.size(), m.factor_dims.size()); ++f)
    if (m.D[f].size() != m.factor_dims[f]) add("D[" + std::to_string(f) + "]", "length does not match factor cardinality");

  // Policies.
  if (!m.policies.empty()) {
    if (m.E.size() != m.policies.size()) add("E", "policy prior length does not match the number of policies");
    const std::size_t horizon = m.policies.front().horizon();
    for (std::size_t k = 0; k < m.policies.size(); ++k) {
      const auto& pol = m.policies[k];
      const std::string base = "policies[" + std::to_string(k) + "]";
      if (pol.horizon() == 0) add(base, "horizon must be >= 1");
      if (pol.horizon() != horizon) add(base, "horizon differs from policies[0]");
      for (std::size_t t = 0; t < pol.horizon(); ++t) {
        if (pol.controls[t].size() != m.factor_dims.size()) {
          add(base + "[" + std::to_string(t) + "]", "expected one control per factor");
          continue;
        }
        for (std::size_t f = 0; f < pol.controls[t].size(); ++f) {
          const bool have_b = f < m.B.size() && m.B[f].rank() == 3;
          if (have_b && pol.controls[t][f] >= m.B[f].shape()[2])
            add(base + "[" + std::to_string(t) + "][" + std::to_string(f) + "]", "control index out of range");
        }
      }
    }
  }
  return out;
}

namespace {

std::string summarize(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << v.size() << " model violation(s)";
  for (const auto& x : v) os << "; " << x.path << ": " << x.message;
  return os.str();
}

}  // namespace

ModelError::ModelError(std::vector<Violation> violations)
    : Error(Errc::ModelInvalid, summarize(violations)), violations_(std::move(violations)) {}

void require_valid(const GenerativeModel& m) {
  auto v = validate_model(m);
  if (!v.empty()) throw ModelError(std::move(v));
}

std::vector<Policy> enumerate_policies(const GenerativeModel& m, std::size_t horizon) {
  if (horizon == 0) throw Error(Errc::Empty, "policy horizon must be >= 1");
  std::vector<std::size_t> controls(m.num_factors());
  for (std::size_t f = 0; f < m.num_factors(); ++f) controls[f] = m.num_controls(f);
  const StateSpace actions(controls);
  std::vector<std::size_t> per_step(horizon, actions.size());
  const StateSpace sequences(per_step);
  std::vector<Policy> out;
  out.reserve(sequences.size());
  for (std::size_t k = 0; k < sequences.size(); ++k) {
    Policy p;
    for (std::size_t t = 0; t < horizon; ++t) p.controls.push_back(actions.decode(sequences.digit(k, t)));
    out.push_back(std::move(p));
  }
  return out;
}

void check_beliefs(const GenerativeModel& m, const BeliefState& q) {
  if (q.factors.size() != m.num_factors()) throw Error(Errc::DimMismatch, "belief factor count does not match the model");
  for (std::size_t f = 0; f < q.factors.size(); ++f)
    if (q.factors[f].size() != m.factor_dims[f])
      throw Error(Errc::DimMismatch, "belief for factor " + std::to_string(f) + " has the wrong cardinality");
  if (!q.precision.empty()) {
    if (q.precision.size() != q.factors.size()) throw Error(Errc::DimMismatch, "precision count does not match factors");
    for (double p : q.precision)
      if (!(p > 0.0) || !std::isfinite(p)) throw Error(Errc::NonFinite, "precision must be finite and > 0");
  }
}

void check_observation(const GenerativeModel& m, const Observation& obs) {
  if (obs.size() != m.num_modalities()) throw Error(Errc::DimMismatch, "observation count does not match modalities");
  for (std::size_t g = 0; g < obs.size(); ++g)
    if (obs[g] >= m.modality_dims[g])
      throw Error(Errc::DimMismatch, "observation for modality " + std::to_string(g) + " out of range");
}

}  // namespace aif
