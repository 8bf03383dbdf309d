#include "aif/belief_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <tuple>

#include <zlib.h>

namespace aif::net {

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int k = 0; k < n; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t position() const noexcept { return pos_; }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) throw Error(Errc::Truncated, "message ends inside a field");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }

 private:
  std::uint64_t le(std::size_t n) {
    const auto b = take(n);
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

// ---------------------------------------------------------------------------

void SpatialAddress::validate() const {
  if (segments.empty()) throw Error(Errc::InvalidAddress, "address needs at least one segment");
  for (const auto& s : segments) {
    if (s.empty()) throw Error(Errc::InvalidAddress, "address segment is empty");
    if (s.find('/') != std::string::npos) throw Error(Errc::InvalidAddress, "address segment contains '/'");
    if (!valid_utf8(s)) throw Error(Errc::InvalidAddress, "address segment is not valid UTF-8");
  }
  if (coords)
    for (double c : *coords)
      if (!std::isfinite(c)) throw Error(Errc::NonFiniteValue, "address coordinate is not finite");
}

std::string SpatialAddress::canonical() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out.push_back('/');
    out += segments[i];
  }
  return out;
}

SpatialAddress SpatialAddress::parse(std::string_view canonical) {
  SpatialAddress a;
  std::size_t start = 0;
  while (true) {
    const auto slash = canonical.find('/', start);
    a.segments.emplace_back(canonical.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  a.validate();
  return a;
}

void BeliefMessage::validate() const {
  origin.validate();
  if (log_evidence.empty()) throw Error(Errc::InvalidMessage, "log-evidence vector is empty");
  for (double x : log_evidence)
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteValue, "log-evidence entry is not finite");
  if (!std::isfinite(precision)) throw Error(Errc::NonFiniteValue, "precision is not finite");
  if (precision < 0.0) throw Error(Errc::NegativePrecision, "precision is negative");
}

bool bit_equal(const BeliefMessage& a, const BeliefMessage& b) {
  auto same = [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); };
  if (a.origin.segments != b.origin.segments || a.factor_id != b.factor_id || a.timestamp != b.timestamp) return false;
  if (a.origin.coords.has_value() != b.origin.coords.has_value()) return false;
  if (a.origin.coords)
    for (std::size_t i = 0; i < 3; ++i)
      if (!same((*a.origin.coords)[i], (*b.origin.coords)[i])) return false;
  if (!same(a.precision, b.precision) || a.log_evidence.size() != b.log_evidence.size()) return false;
  for (std::size_t i = 0; i < a.log_evidence.size(); ++i)
    if (!same(a.log_evidence[i], b.log_evidence[i])) return false;
  return true;
}

std::vector<std::uint8_t> encode_message(const BeliefMessage& msg) {
  msg.validate();
  if (msg.origin.segments.size() > 255) throw Error(Errc::TooManySegments, "at most 255 address segments fit on the wire");
  for (const auto& s : msg.origin.segments)
    if (s.size() > 65535) throw Error(Errc::SegmentTooLong, "address segment longer than 65535 bytes");
  if (msg.log_evidence.size() > 65535) throw Error(Errc::VectorTooLong, "log-evidence vector longer than 65535");

  Writer w;
  w.bytes(kMagic);
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(msg.origin.segments.size()));
  for (const auto& s : msg.origin.segments) {
    w.u16(static_cast<std::uint16_t>(s.size()));
    w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  w.u8(msg.origin.coords ? 1 : 0);
  if (msg.origin.coords)
    for (double c : *msg.origin.coords) w.f64(c);
  w.u32(msg.factor_id);
  w.u64(msg.timestamp);
  w.f64(msg.precision);
  w.u16(static_cast<std::uint16_t>(msg.log_evidence.size()));
  for (double x : msg.log_evidence) w.f64(x);
  w.u32(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

BeliefMessage decode_message(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw Error(Errc::BadMagic, "missing AIMP magic");
  const std::uint8_t version = r.u8();
  if (version != kWireVersion) throw Error(Errc::UnsupportedVersion, "wire version " + std::to_string(version));

  BeliefMessage msg;
  const std::uint8_t count = r.u8();
  for (std::uint8_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    const auto seg = r.take(len);
    msg.origin.segments.emplace_back(reinterpret_cast<const char*>(seg.data()), seg.size());
  }
  const std::uint8_t has_coords = r.u8();
  if (has_coords > 1) throw Error(Errc::InvalidMessage, "coords flag must be 0 or 1");
  if (has_coords) {
    std::array<double, 3> c{};
    for (double& x : c) x = r.f64();
    msg.origin.coords = c;
  }
  msg.factor_id = r.u32();
  msg.timestamp = r.u64();
  msg.precision = r.f64();
  const std::uint16_t len = r.u16();
  msg.log_evidence.resize(len);
  for (double& x : msg.log_evidence) x = r.f64();

  const std::size_t body = r.position();
  const std::uint32_t crc = r.u32();
  if (r.position() != bytes.size()) throw Error(Errc::TrailingBytes, "bytes after the checksum");
  if (crc != crc32_of(bytes.first(body))) throw Error(Errc::CrcMismatch, "checksum does not match");

  msg.validate();
  return msg;
}

// ---------------------------------------------------------------------------

void SharedFactorRegistry::add(std::uint32_t id, SharedFactor factor) {
  if (factor.cardinality < 2) throw Error(Errc::InvalidArgument, "shared factor cardinality must be >= 2");
  if (factor.prior.size() != factor.cardinality) throw Error(Errc::DimMismatch, "reference prior has the wrong length");
  if (!factors_.emplace(id, std::move(factor)).second)
    throw Error(Errc::InvalidArgument, "shared factor id " + std::to_string(id) + " registered twice");
}

const SharedFactor& SharedFactorRegistry::at(std::uint32_t id) const {
  auto it = factors_.find(id);
  if (it == factors_.end()) throw Error(Errc::InvalidArgument, "unknown shared factor id " + std::to_string(id));
  return it->second;
}

SharedFactorRegistry SharedFactorRegistry::from_json(const nlohmann::json& doc) {
  SharedFactorRegistry reg;
  if (!doc.is_array()) throw Error(Errc::ConfigInvalid, "registry must be an array");
  try {
    for (const auto& entry : doc) {
      const auto card = entry.at("cardinality").get<std::size_t>();
      SharedFactor f{card, entry.value("description", std::string{}),
                     entry.contains("prior") ? Categorical(entry.at("prior").get<std::vector<double>>())
                                             : Categorical::uniform(card)};
      reg.add(entry.at("id").get<std::uint32_t>(), std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("registry: ") + e.what());
  }
  return reg;
}

nlohmann::json SharedFactorRegistry::to_json() const {
  auto doc = nlohmann::json::array();
  for (const auto& [id, f] : factors_)
    doc.push_back({{"id", id}, {"cardinality", f.cardinality}, {"description", f.description}, {"prior", f.prior.vec()}});
  return doc;
}

// ---------------------------------------------------------------------------

Categorical fuse_evidence(const Categorical& prior, std::span<const BeliefMessage> msgs,
                          std::optional<std::span<const double>> own_log_evidence) {
  const std::size_t n = prior.size();
  std::vector<double> logits = log_vec(prior.probs());
  if (own_log_evidence) {
    if (own_log_evidence->size() != n) throw Error(Errc::DimMismatch, "own log-evidence has the wrong length");
    for (std::size_t i = 0; i < n; ++i) logits[i] += (*own_log_evidence)[i];
  }

  std::vector<std::size_t> order(msgs.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& m : msgs) {
    m.validate();
    if (m.log_evidence.size() != n) throw Error(Errc::DimMismatch, "message log-evidence has the wrong length");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = msgs[a];
    const auto& y = msgs[b];
    return std::tie(x.origin.segments, x.factor_id, x.timestamp, x.precision, x.log_evidence) <
           std::tie(y.origin.segments, y.factor_id, y.timestamp, y.precision, y.log_evidence);
  });
  for (std::size_t k : order) {
    const auto& m = msgs[k];
    if (m.precision == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) logits[i] += m.precision * m.log_evidence[i];
  }
  return Categorical(softmax_with_zeros(logits));
}

namespace {

void check_source(const Categorical& belief, const Tensor& likelihood) {
  if (likelihood.rank() != 2 || likelihood.shape()[1] != belief.size())
    throw Error(Errc::DimMismatch, "source likelihood must be [outcomes, states] matching the belief");
  const std::size_t outcomes = likelihood.shape()[0];
  const std::size_t states = likelihood.shape()[1];
  for (std::size_t s = 0; s < states; ++s) {
    double sum = 0.0;
    for (std::size_t o = 0; o < outcomes; ++o) {
      const double v = likelihood.data()[o * states + s];
      if (!std::isfinite(v) || v < 0.0) throw Error(Errc::NegativeEntry, "source likelihood entry is negative or non-finite");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbTol) throw Error(Errc::NotNormalized, "source likelihood column does not sum to 1");
  }
}

std::vector<double> outcome_marginal(const Categorical& belief, const Tensor& likelihood) {
  const std::size_t outcomes = likelihood.shape()[0];
  const std::size_t states = likelihood.shape()[1];
  std::vector<double> qo(outcomes, 0.0);
  for (std::size_t o = 0; o < outcomes; ++o)
    for (std::size_t s = 0; s < states; ++s) qo[o] += likelihood.data()[o * states + s] * belief[s];
  return qo;
}

}  // namespace

double expected_info_gain_of_source(const Categorical& belief, const Tensor& likelihood) {
  check_source(belief, likelihood);
  const std::size_t outcomes = likelihood.shape()[0];
  const std::size_t states = likelihood.shape()[1];
  const auto qo = outcome_marginal(belief, likelihood);
  // sum_o q(o) KL[q(s | o) || q(s)] with q(s | o) = L[o, s] q(s) / q(o).
  double gain = 0.0;
  for (std::size_t o = 0; o < outcomes; ++o) {
    if (qo[o] <= 0.0) continue;
    double kl = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
      const double post = likelihood.data()[o * states + s] * belief[s] / qo[o];
      kl += xlogxy(post, belief[s]);
    }
    gain += qo[o] * kl;
  }
  return std::max(gain, 0.0);
}

double expected_info_gain_by_entropies(const Categorical& belief, const Tensor& likelihood) {
  check_source(belief, likelihood);
  const std::size_t outcomes = likelihood.shape()[0];
  const std::size_t states = likelihood.shape()[1];
  const auto qo = outcome_marginal(belief, likelihood);
  double h_outcome = 0.0;
  for (double p : qo) h_outcome -= xlogx(p);
  double h_cond = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    double h = 0.0;
    for (std::size_t o = 0; o < outcomes; ++o) h -= xlogx(likelihood.data()[o * states + s]);
    h_cond += belief[s] * h;
  }
  return h_outcome - h_cond;
}

std::vector<std::uint32_t> select_sources(const Categorical& belief, std::span<const Source> sources, std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (k > sources.size()) throw Error(Errc::KTooLarge, "k exceeds the number of sources");
  std::vector<std::pair<double, std::uint32_t>> ranked;
  ranked.reserve(sources.size());
  for (const auto& s : sources) ranked.emplace_back(expected_info_gain_of_source(belief, s.likelihood), s.id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].second);
  return out;
}

}  // namespace aif::net
