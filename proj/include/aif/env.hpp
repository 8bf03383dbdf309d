#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "aif/model.hpp"

namespace aif {

/// Generative process: the world the agents act in, kept separate from the
/// models they hold about it.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual Observation step(const Action& action) = 0;
  /// Oracle access for metrics; agents never see this.
  virtual std::vector<std::size_t> true_state() const = 0;
};

/// Draws an index from `p` using 53 bits of one generator output.
std::size_t sample_index(std::mt19937_64& rng, std::span<const double> p);

// --- T-maze ---------------------------------------------------------------

namespace tmaze {

enum Location : std::size_t { kCenter = 0, kLeft = 1, kRight = 2, kCue = 3 };
enum Context : std::size_t { kContextLeft = 0, kContextRight = 1 };
enum Reward : std::size_t { kNoReward = 0, kRewarded = 1, kPunished = 2 };
enum Cue : std::size_t { kCueLeft = 0, kCueRight = 1, kCueNull = 2 };

struct Params {
  double reward_prob = 0.95;       ///< chance of reward in the arm matching the context
  double reward_preference = 3.0;  ///< C over (none, reward, punish) is (0, +r, -r)
};

/// Factors: location (4), context (2). Modalities: location (4), reward (3), cue (3).
/// Location control u moves to location u; the arms are absorbing.
GenerativeModel build_model(const Params& p = {});

}  // namespace tmaze

class TMazeEnv final : public Environment {
 public:
  explicit TMazeEnv(tmaze::Params p = {}) : params_(p) {}
  Observation reset(std::uint64_t seed) override;
  Observation step(const Action& action) override;
  std::vector<std::size_t> true_state() const override { return {location_, context_}; }

 private:
  Observation observe();

  tmaze::Params params_;
  std::mt19937_64 rng_;
  std::size_t location_ = tmaze::kCenter;
  std::size_t context_ = tmaze::kContextLeft;
};

// --- Elephant room --------------------------------------------------------

namespace elephant {

enum What : std::size_t { kElephant = 0, kStatue = 1, kEmpty = 2 };
enum Part : std::size_t { kTrunk = 0, kLeg = 1, kTail = 2 };
inline constexpr std::size_t kNumWhat = 3;
inline constexpr std::size_t kNumParts = 3;
inline constexpr std::size_t kNumFeatures = 3;

/// Noise-free feature felt at each part for each "what".
std::size_t feature(std::size_t what, std::size_t part);

/// p(feature | what, part) as [feature, what, part]; with probability `noise`
/// the felt feature is uniform over the other two.
Tensor feature_likelihood(double noise);
/// p(feature | what) at one part, as [feature, what].
Tensor part_likelihood(double noise, std::size_t part);

/// One agent's model. Factors: what (3), where (3). Modalities: felt feature
/// (3), proprioceptive location (3). Both factors are static.
GenerativeModel build_agent_model(double noise, const Categorical& what_prior);

}  // namespace elephant

/// All agents feel the same hidden object from their own fixed part.
/// Observations are [feature_0, part_0, feature_1, part_1, ...].
class ElephantRoomEnv final : public Environment {
 public:
  ElephantRoomEnv(std::size_t what, std::vector<std::size_t> placements, double noise);
  Observation reset(std::uint64_t seed) override;
  Observation step(const Action& action) override;
  /// [what, part_0, part_1, ...]
  std::vector<std::size_t> true_state() const override;

 private:
  Observation observe();

  std::size_t what_;
  std::vector<std::size_t> placements_;
  double noise_;
  std::mt19937_64 rng_;
};

}  // namespace aif
