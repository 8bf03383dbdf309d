#include <doctest.h>

#include <cmath>

#include "aif/inference.hpp"
#include "oracles.hpp"

using namespace aif;
using doctest::Approx;

namespace {

GenerativeModel two_state(std::vector<double> a = {0.9, 0.1, 0.1, 0.9}, std::vector<double> d = {0.5, 0.5}) {
  GenerativeModel m;
  m.factor_dims = {2};
  m.modality_dims = {2};
  m.A = {Tensor({2, 2}, std::move(a))};
  m.B = {Tensor({2, 2, 1}, {1, 0, 0, 1})};
  m.C = {{0.0, 0.0}};
  m.D = {Categorical(std::move(d))};
  return m;
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aif::Error");
  return Errc::InvalidArgument;
}

std::vector<double> flat(const BeliefState& q, std::size_t f) { return q[f].vec(); }

}  // namespace

TEST_CASE("exact_posterior examples") {
  const auto m = two_state();
  auto p0 = exact_posterior(m, Observation{0});
  CHECK(p0.beliefs[0][0] == Approx(0.9).epsilon(1e-12));
  CHECK(p0.log_evidence == Approx(std::log(0.5)).epsilon(1e-12));
  auto p1 = exact_posterior(m, Observation{1});
  CHECK(p1.beliefs[0][1] == Approx(0.9).epsilon(1e-12));
  const auto u = two_state({0.5, 0.5, 0.5, 0.5}, {0.3, 0.7});
  auto pu = exact_posterior(u, Observation{0});
  CHECK(pu.beliefs[0][0] == Approx(0.3).epsilon(1e-12));
  CHECK(pu.log_evidence == Approx(std::log(0.5)).epsilon(1e-12));

  const auto zero = two_state({1, 0, 0, 1}, {1, 0});
  CHECK(code_of([&] { exact_posterior(zero, Observation{1}); }) == Errc::ZeroEvidence);
  CHECK(code_of([&] { exact_posterior(m, Observation{2}); }) != Errc::ZeroEvidence);
}

TEST_CASE("exact_posterior matches enumeration oracle on random multi-factor models") {
  oracle::Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    auto m = oracle::random_model(rng, {2, 3}, {3, 2}, {});
    Observation obs{std::size_t(i % 3), std::size_t(i % 2)};
    const auto got = exact_posterior(m, obs);
    const auto want = oracle::posterior(m, obs);
    CHECK(got.log_evidence == Approx(want.log_evidence).epsilon(1e-12));
    for (std::size_t f = 0; f < 2; ++f) CHECK(oracle::l1(flat(got.beliefs, f), want.marginals[f]) < 1e-12);
  }
}

TEST_CASE("variational_free_energy examples") {
  const auto m = two_state();
  auto tight = variational_free_energy(BeliefState{{Categorical{0.9, 0.1}}, {}}, m, {0}, true);
  CHECK(tight.free_energy == Approx(std::log(2.0)).epsilon(1e-12));
  REQUIRE(tight.negative_log_evidence.has_value());
  CHECK(*tight.negative_log_evidence == Approx(std::log(2.0)).epsilon(1e-12));

  auto at_prior = variational_free_energy(m.prior(), m, {0});
  const double acc = 0.5 * std::log(0.9) + 0.5 * std::log(0.1);
  CHECK(at_prior.complexity == 0.0);
  CHECK(at_prior.accuracy == Approx(acc).epsilon(1e-12));
  CHECK(at_prior.free_energy == Approx(-acc).epsilon(1e-12));
  CHECK(-acc == Approx(1.2040).epsilon(1e-4));

  const auto u = two_state({0.5, 0.5, 0.5, 0.5});
  auto unif = variational_free_energy(u.prior(), u, {1}, true);
  CHECK(unif.free_energy == Approx(*unif.negative_log_evidence).epsilon(1e-14));

  const auto rec = at_prior.to_record();
  CHECK(rec.size() >= 3);
  CHECK(rec[0].first == "free_energy");
}

TEST_CASE("infer_states examples") {
  const auto m = two_state();
  auto r = infer_states(m, {0});
  CHECK(r.converged);
  CHECK(std::abs(r.beliefs[0][0] - 0.9) < 1e-8);

  const auto u = two_state({0.5, 0.5, 0.5, 0.5}, {0.3, 0.7});
  auto ru = infer_states(u, {0});
  CHECK(ru.iterations == 1);
  CHECK(ru.converged);
  CHECK(ru.beliefs[0][0] == Approx(0.3).epsilon(1e-14));

  // Separable two-factor likelihood: one modality per factor.
  oracle::Rng rng(22);
  auto sep = oracle::random_model(rng, {3, 2}, {3, 2}, {});
  for (std::size_t g = 0; g < 2; ++g) {
    std::vector<std::vector<double>> cols;
    for (std::size_t s = 0; s < sep.factor_dims[g]; ++s) cols.push_back(oracle::random_probs(rng, sep.modality_dims[g]));
    for (const auto& s : oracle::joint_states(sep.factor_dims))
      for (std::size_t o = 0; o < sep.modality_dims[g]; ++o) {
        std::size_t off = o;
        for (std::size_t f = 0; f < 2; ++f) off = off * sep.factor_dims[f] + s[f];
        sep.A[g].data()[off] = cols[s[g]][o];
      }
  }
  const Observation obs{2, 1};
  auto rs = infer_states(sep, obs);
  CHECK(rs.converged);
  for (std::size_t f = 0; f < 2; ++f) {
    std::vector<double> want(sep.factor_dims[f]);
    double z = 0.0;
    for (std::size_t s = 0; s < want.size(); ++s) {
      const std::vector<std::size_t> idx = f == 0 ? std::vector<std::size_t>{s, 0} : std::vector<std::size_t>{0, s};
      want[s] = sep.D[f][s] * oracle::lik(sep, f, obs[f], idx);
      z += want[s];
    }
    for (auto& w : want) w /= z;
    CHECK(oracle::l1(flat(rs.beliefs, f), want) < 1e-6);
  }
}

TEST_CASE("infer_states reports non-convergence instead of throwing") {
  const auto m = two_state();
  InferenceOptions opts;
  opts.max_iters = 1;
  auto r = infer_states(m, {0}, opts);
  CHECK_FALSE(r.converged);
  CHECK(r.residual > 0.0);
  CHECK(r.iterations == 1);
}

TEST_CASE("infer_states handles deterministic likelihoods across factors") {
  // Factor 0 is observed exactly; factor 1 is revealed only at one value of factor 0.
  GenerativeModel m;
  m.factor_dims = {2, 2};
  m.modality_dims = {2, 3};
  m.A = {Tensor({2, 2, 2}, {1, 1, 0, 0, 0, 0, 1, 1}), Tensor({3, 2, 2}, {0, 0, 1, 0, 0, 0, 0, 1, 1, 1, 0, 0})};
  m.B = {Tensor({2, 2, 1}, {1, 0, 0, 1}), Tensor({2, 2, 1}, {1, 0, 0, 1})};
  m.C = {{0, 0}, {0, 0, 0}};
  m.D = {Categorical{0.5, 0.5}, Categorical{0.5, 0.5}};
  REQUIRE(validate_model(m).empty());
  auto r = infer_states(m, {1, 1});
  CHECK(r.beliefs[0][1] == Approx(1.0));
  CHECK(r.beliefs[1][1] == Approx(1.0));
  const auto zero = exact_posterior(m, Observation{1, 1});
  CHECK(oracle::l1(flat(r.beliefs, 1), zero.beliefs[1].vec()) < 1e-6);
}

TEST_CASE("Dirichlet likelihood update examples") {
  auto c = DirichletCounts::filled({2, 2}, 1.0);
  auto c2 = update_likelihood_counts(c, 0, BeliefState{{Categorical{0.9, 0.1}}, {}});
  const auto& t = c2.counts();
  CHECK(t.at({0, 0}) == Approx(1.9));
  CHECK(t.at({0, 1}) == Approx(1.1));
  CHECK(t.at({1, 0}) == 1.0);
  CHECK(t.at({1, 1}) == 1.0);
  CHECK(c2.expected().at({0, 0}) == Approx(1.9 / 2.9).epsilon(1e-12));
  CHECK(1.9 / 2.9 == Approx(0.655).epsilon(1e-3));

  CHECK(code_of([&] { update_likelihood_counts(c, 0, BeliefState{{Categorical{0.2, 0.3, 0.5}}, {}}); }) ==
        Errc::ShapeMismatch);
  CHECK(code_of([&] { update_likelihood_counts(c, 0, BeliefState{{Categorical{0.5, 0.5}}, {}}, 0.0); }) ==
        Errc::InvalidArgument);
  CHECK(code_of([] { DirichletCounts(Tensor({2, 2}, {1, 0, 1, 1})); }) == Errc::NegativeEntry);
}

TEST_CASE("Dirichlet transition update examples") {
  auto c = DirichletCounts::filled({2, 2, 2}, 1.0);
  auto c2 = update_transition_counts(c, Categorical{1, 0}, Categorical{0, 1}, 1);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t u = 0; u < 2; ++u) CHECK(c2.counts().at({a, b, u}) == (a == 1 && b == 0 && u == 1 ? 2.0 : 1.0));

  auto c3 = update_transition_counts(c, Categorical{0.5, 0.5}, Categorical{0.5, 0.5}, 0);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      CHECK(c3.counts().at({a, b, 0}) == Approx(1.25));
      CHECK(c3.counts().at({a, b, 1}) == 1.0);
    }
  CHECK(code_of([&] { update_transition_counts(c, Categorical{1, 0}, Categorical{0, 1}, 2); }) == Errc::ShapeMismatch);
}

TEST_CASE("Dirichlet learning converges on seeded data") {
  oracle::Rng rng(23);
  // Likelihood: observations from state 0 with p(o=0|s=0) = 0.9, q fixed at [1, 0].
  auto a = DirichletCounts::filled({2, 2}, 1.0);
  const BeliefState q{{Categorical{1, 0}}, {}};
  for (int i = 0; i < 1000; ++i) a = update_likelihood_counts(a, oracle::uniform01(rng) < 0.9 ? 0 : 1, q);
  CHECK(std::abs(a.expected().at({0, 0}) - 0.9) < 0.05);

  // Transitions: deterministic swap under control 0.
  auto b = DirichletCounts::filled({2, 2, 1}, 1.0);
  std::size_t s = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t next = 1 - s;
    b = update_transition_counts(b, Categorical::delta(2, s), Categorical::delta(2, next), 0);
    s = next;
  }
  const auto eb = b.expected();
  CHECK(std::abs(eb.at({1, 0, 0}) - 1.0) + std::abs(eb.at({0, 0, 0})) < 0.05);
  CHECK(std::abs(eb.at({0, 1, 0}) - 1.0) + std::abs(eb.at({1, 1, 0})) < 0.05);
}

TEST_CASE("compare_models examples") {
  const auto m1 = two_state({1, 0, 0, 1}, {0.9, 0.1});
  const auto m2 = two_state({1, 0, 0, 1}, {0.1, 0.9});
  std::vector<GenerativeModel> c{m1, m2};
  auto r = compare_models(c, Observation{0});
  CHECK(r.free_energies[0] == Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(r.free_energies[1] == Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK(r.selected == 0);

  std::vector<GenerativeModel> same{m1, m1};
  CHECK(compare_models(same, Observation{1}).selected == 0);

  // Evidence accumulates toward the generator.
  oracle::Rng rng(24);
  const auto gen = two_state({0.9, 0.1, 0.1, 0.9}, {0.8, 0.2});
  const auto flatA = two_state({0.5, 0.5, 0.5, 0.5}, {0.8, 0.2});
  std::vector<Observation> seq;
  for (int i = 0; i < 10; ++i) seq.push_back({oracle::uniform01(rng) < 0.9 ? 0u : 1u});
  std::vector<GenerativeModel> pair{flatA, gen};
  CHECK(compare_models(pair, seq).selected == 1);

  // A candidate that cannot explain the data loses instead of throwing.
  std::vector<GenerativeModel> with_impossible{two_state({1, 0, 0, 1}, {1, 0}), m1};
  auto ri = compare_models(with_impossible, Observation{1});
  CHECK(std::isinf(ri.free_energies[0]));
  CHECK(ri.selected == 1);
}

// --- properties -----------------------------------------------------------

TEST_CASE("property: free energy bounds surprise and is tight at the posterior") {
  oracle::Rng rng(25);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + i % 2, o = 2 + (i / 2) % 2;
    auto m = oracle::random_model(rng, {n}, {o}, {});
    const Observation obs{std::size_t(i % o)};
    const BeliefState q{{oracle::random_categorical(rng, n)}, {}};
    const auto rep = variational_free_energy(q, m, obs, true);
    const double nle = -oracle::posterior(m, obs).log_evidence;
    CHECK(rep.free_energy >= nle - 1e-9);
    CHECK(std::abs(rep.free_energy - (rep.complexity - rep.accuracy)) <= 1e-10);
    const auto exact = exact_posterior(m, obs);
    const auto at = variational_free_energy(exact.beliefs, m, obs);
    CHECK(std::abs(at.free_energy - nle) <= 1e-8);
  }
}

TEST_CASE("property: mean-field matches enumeration on single-factor models") {
  oracle::Rng rng(26);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + i % 4;
    auto m = oracle::random_model(rng, {n}, {3}, {});
    const Observation obs{std::size_t(i % 3)};
    const auto r = infer_states(m, obs);
    CHECK(oracle::l1(r.beliefs[0].vec(), oracle::posterior(m, obs).marginals[0]) <= 1e-6);
  }
}

TEST_CASE("property: compare_models is invariant to candidate order") {
  oracle::Rng rng(27);
  for (int i = 0; i < 30; ++i) {
    std::vector<GenerativeModel> c;
    for (int k = 0; k < 4; ++k) c.push_back(oracle::random_model(rng, {2}, {3}, {}));
    const Observation obs{std::size_t(i % 3)};
    const auto fwd = compare_models(c, obs);
    std::vector<GenerativeModel> rev(c.rbegin(), c.rend());
    const auto back = compare_models(rev, obs);
    CHECK(fwd.free_energies[fwd.selected] == back.free_energies[back.selected]);
    CHECK(fwd.selected == 3 - back.selected);
  }
}
