#include "aif/env.hpp"

namespace aif {

std::size_t sample_index(std::mt19937_64& rng, std::span<const double> p) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

// --- T-maze ---------------------------------------------------------------

namespace tmaze {

GenerativeModel build_model(const Params& p) {
  GenerativeModel m;
  m.factor_dims = {4, 2};
  m.modality_dims = {4, 3, 3};

  Tensor a_loc({4, 4, 2});
  Tensor a_rew({3, 4, 2});
  Tensor a_cue({3, 4, 2});
  for (std::size_t loc = 0; loc < 4; ++loc) {
    for (std::size_t ctx = 0; ctx < 2; ++ctx) {
      a_loc.at({loc, loc, ctx}) = 1.0;
      if (loc == kLeft || loc == kRight) {
        const bool match = (loc == kLeft) == (ctx == kContextLeft);
        a_rew.at({kRewarded, loc, ctx}) = match ? p.reward_prob : 1.0 - p.reward_prob;
        a_rew.at({kPunished, loc, ctx}) = match ? 1.0 - p.reward_prob : p.reward_prob;
      } else {
        a_rew.at({kNoReward, loc, ctx}) = 1.0;
      }
      if (loc == kCue) a_cue.at({ctx == kContextLeft ? kCueLeft : kCueRight, loc, ctx}) = 1.0;
      else a_cue.at({kCueNull, loc, ctx}) = 1.0;
    }
  }
  m.A = {std::move(a_loc), std::move(a_rew), std::move(a_cue)};

  Tensor b_loc({4, 4, 4});
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t u = 0; u < 4; ++u) {
      const bool absorbing = s == kLeft || s == kRight;
      b_loc.at({absorbing ? s : u, s, u}) = 1.0;
    }
  Tensor b_ctx({2, 2, 1});
  b_ctx.at({0, 0, 0}) = 1.0;
  b_ctx.at({1, 1, 0}) = 1.0;
  m.B = {std::move(b_loc), std::move(b_ctx)};

  m.C = {std::vector<double>(4, 0.0), {0.0, p.reward_preference, -p.reward_preference}, std::vector<double>(3, 0.0)};
  m.D = {Categorical::delta(4, kCenter), Categorical::uniform(2)};
  require_valid(m);
  return m;
}

}  // namespace tmaze

Observation TMazeEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  const double half[] = {0.5, 0.5};
  context_ = sample_index(rng_, half);
  location_ = tmaze::kCenter;
  return observe();
}

Observation TMazeEnv::step(const Action& action) {
  if (action.empty() || action[0] >= 4) throw Error(Errc::BadControlIndex, "T-maze location control out of range");
  if (location_ != tmaze::kLeft && location_ != tmaze::kRight) location_ = action[0];
  return observe();
}

Observation TMazeEnv::observe() {
  using namespace tmaze;
  std::size_t reward = kNoReward;
  if (location_ == kLeft || location_ == kRight) {
    const bool match = (location_ == kLeft) == (context_ == kContextLeft);
    const double pr = match ? params_.reward_prob : 1.0 - params_.reward_prob;
    const double dist[] = {0.0, pr, 1.0 - pr};
    reward = sample_index(rng_, dist);
  }
  std::size_t cue = kCueNull;
  if (location_ == kCue) cue = context_ == kContextLeft ? kCueLeft : kCueRight;
  return {location_, reward, cue};
}

// --- Elephant room --------------------------------------------------------

namespace elephant {

std::size_t feature(std::size_t what, std::size_t part) {
  static constexpr std::size_t kTable[kNumParts][kNumWhat] = {
      {0, 0, 2},  // trunk: elephant and statue feel alike
      {1, 2, 1},  // leg: elephant and empty feel alike
      {2, 2, 1},  // tail: elephant and statue feel alike
  };
  return kTable[part][what];
}

Tensor feature_likelihood(double noise) {
  if (!(noise >= 0.0 && noise < 1.0)) throw Error(Errc::InvalidArgument, "noise must lie in [0, 1)");
  Tensor t({kNumFeatures, kNumWhat, kNumParts});
  for (std::size_t w = 0; w < kNumWhat; ++w)
    for (std::size_t part = 0; part < kNumParts; ++part)
      for (std::size_t o = 0; o < kNumFeatures; ++o)
        t.at({o, w, part}) = o == feature(w, part) ? 1.0 - noise : noise / (kNumFeatures - 1);
  return t;
}

Tensor part_likelihood(double noise, std::size_t part) {
  const Tensor full = feature_likelihood(noise);
  Tensor t({kNumFeatures, kNumWhat});
  for (std::size_t o = 0; o < kNumFeatures; ++o)
    for (std::size_t w = 0; w < kNumWhat; ++w) t.at({o, w}) = full.at({o, w, part});
  return t;
}

GenerativeModel build_agent_model(double noise, const Categorical& what_prior) {
  if (what_prior.size() != kNumWhat) throw Error(Errc::DimMismatch, "what prior must have 3 entries");
  GenerativeModel m;
  m.factor_dims = {kNumWhat, kNumParts};
  m.modality_dims = {kNumFeatures, kNumParts};
  Tensor proprio({kNumParts, kNumWhat, kNumParts});
  for (std::size_t w = 0; w < kNumWhat; ++w)
    for (std::size_t part = 0; part < kNumParts; ++part) proprio.at({part, w, part}) = 1.0;
  m.A = {feature_likelihood(noise), std::move(proprio)};
  for (std::size_t n : m.factor_dims) {
    Tensor b({n, n, 1});
    for (std::size_t s = 0; s < n; ++s) b.at({s, s, 0}) = 1.0;
    m.B.push_back(std::move(b));
  }
  m.C = {std::vector<double>(kNumFeatures, 0.0), std::vector<double>(kNumParts, 0.0)};
  m.D = {what_prior, Categorical::uniform(kNumParts)};
  require_valid(m);
  return m;
}

}  // namespace elephant

ElephantRoomEnv::ElephantRoomEnv(std::size_t what, std::vector<std::size_t> placements, double noise)
    : what_(what), placements_(std::move(placements)), noise_(noise) {
  if (what_ >= elephant::kNumWhat) throw Error(Errc::InvalidArgument, "unknown object");
  for (std::size_t p : placements_)
    if (p >= elephant::kNumParts) throw Error(Errc::InvalidArgument, "unknown part");
  if (!(noise_ >= 0.0 && noise_ < 1.0)) throw Error(Errc::InvalidArgument, "noise must lie in [0, 1)");
}

Observation ElephantRoomEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return observe();
}

Observation ElephantRoomEnv::step(const Action&) { return observe(); }

std::vector<std::size_t> ElephantRoomEnv::true_state() const {
  std::vector<std::size_t> s{what_};
  s.insert(s.end(), placements_.begin(), placements_.end());
  return s;
}

Observation ElephantRoomEnv::observe() {
  Observation obs;
  for (std::size_t part : placements_) {
    const std::size_t clean = elephant::feature(what_, part);
    std::vector<double> p(elephant::kNumFeatures, noise_ / (elephant::kNumFeatures - 1));
    p[clean] = 1.0 - noise_;
    obs.push_back(sample_index(rng_, p));
    obs.push_back(part);
  }
  return obs;
}

}  // namespace aif
