#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aif/core.hpp"

namespace aif::net {

/// Hierarchical origin of a message, e.g. room/zone-3/agent-7.
struct SpatialAddress {
  std::vector<std::string> segments;
  std::optional<std::array<double, 3>> coords;  ///< metres

  /// Throws InvalidAddress on empty segments, '/' inside a segment or bad UTF-8.
  void validate() const;
  std::string canonical() const;
  static SpatialAddress parse(std::string_view canonical);

  friend bool operator==(const SpatialAddress&, const SpatialAddress&) = default;
};

/// The wire unit: log-evidence about one shared factor plus its provenance.
struct BeliefMessage {
  SpatialAddress origin;
  std::uint32_t factor_id = 0;
  std::vector<double> log_evidence;
  double precision = 1.0;
  std::uint64_t timestamp = 0;

  /// Throws InvalidMessage / NonFiniteValue / NegativePrecision / InvalidAddress.
  void validate() const;
};

/// Field-for-field equality with bitwise comparison of every real.
bool bit_equal(const BeliefMessage& a, const BeliefMessage& b);

inline constexpr std::array<std::uint8_t, 4> kMagic{'A', 'I', 'M', 'P'};
inline constexpr std::uint8_t kWireVersion = 1;

/// Little-endian layout:
///   "AIMP" | version u8 | segment count u8 | (len u16, utf-8)* | coords flag u8
///   | [3 x f64] | factor_id u32 | timestamp u64 | precision f64
///   | length u16 | f64 * length | crc32 u32 over everything before it
std::vector<std::uint8_t> encode_message(const BeliefMessage& msg);
/// Total on arbitrary input: throws aif::Error, never reads past the buffer.
BeliefMessage decode_message(std::span<const std::uint8_t> bytes);

struct SharedFactor {
  std::size_t cardinality = 0;
  std::string description;
  Categorical prior;
};

/// Out-of-band agreement on what each shared factor id means.
class SharedFactorRegistry {
 public:
  void add(std::uint32_t id, SharedFactor factor);
  const SharedFactor& at(std::uint32_t id) const;
  bool contains(std::uint32_t id) const { return factors_.contains(id); }
  std::size_t size() const noexcept { return factors_.size(); }
  const std::map<std::uint32_t, SharedFactor>& factors() const noexcept { return factors_; }

  static SharedFactorRegistry from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

 private:
  std::map<std::uint32_t, SharedFactor> factors_;
};

/// posterior = softmax(ln prior + own + sum_i precision_i * log_evidence_i).
/// Messages are combined in a canonical order, so the result does not depend
/// on the order of `msgs`.
Categorical fuse_evidence(const Categorical& prior, std::span<const BeliefMessage> msgs,
                          std::optional<std::span<const double>> own_log_evidence = std::nullopt);

/// Mutual information between a factor distributed as `belief` and the outcome
/// of a source with outcome-by-state likelihood [outcomes, states].
double expected_info_gain_of_source(const Categorical& belief, const Tensor& likelihood);
/// Same quantity as H[q(o)] - E_q(s) H[p(o | s)].
double expected_info_gain_by_entropies(const Categorical& belief, const Tensor& likelihood);

struct Source {
  std::uint32_t id = 0;
  Tensor likelihood;
};

/// Ids of the k most informative sources, by descending gain; ties go to the lower id.
std::vector<std::uint32_t> select_sources(const Categorical& belief, std::span<const Source> sources, std::size_t k);

}  // namespace aif::net
