#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "pmsm/error.hpp"
#include "pmsm/features.hpp"
#include "pmsm/models.hpp"

namespace pmsm {

// Binary layout, little-endian:
//   "PMSMCKPT" u32 version
//   u8 variant, u64 input, u64 hidden, u64 output
//   u32 block count, then per block: u32 name length, name, u64 rows, u64 cols
//   f64 parameters, blocks in order
//   u8 standardize_targets, u64 channels, f64 mean[channels], f64 std[channels],
//   f64 target_mean[4], f64 target_std[4]
//   u32 length + feature config text (key=value lines)
//   u64 FNV-1a of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'P', 'M', 'S', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  StandardizationStats stats;
  FeatureConfig features;
};

/// key=value text form of a feature configuration.
inline std::string feature_config_text(const FeatureConfig& c) {
  std::ostringstream o;
  o << "predictors=";
  for (std::size_t i = 0; i < c.predictors.size(); ++i) o << (i ? "," : "") << c.predictors[i];
  o << "\nsynthetic_set=";
  for (std::size_t i = 0; i < c.synthetic.size(); ++i) o << (i ? "," : "") << name_of(c.synthetic[i]);
  o << "\nspans=";
  for (std::size_t i = 0; i < c.spans.size(); ++i) o << (i ? "," : "") << c.spans[i];
  o << "\ninclude_raw=" << (c.include_raw ? 1 : 0) << "\nwindow=" << c.window
    << "\nstride=" << c.stride << "\nstandardize_targets=" << (c.standardize_targets ? 1 : 0)
    << '\n';
  return o.str();
}

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline Synthetic parse_synthetic_name(std::string_view n) {
  for (auto s : parse_synthetic_set("all"))
    if (name_of(s) == n) return s;
  throw ConfigError("unknown synthetic attribute '" + std::string(n) + "'");
}

}  // namespace detail

inline FeatureConfig parse_feature_config_text(std::string_view text) {
  FeatureConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("feature config line without '=': " + line);
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "predictors") {
      c.predictors = detail::split_list(val);
    } else if (key == "synthetic_set") {
      c.synthetic.clear();
      for (const auto& n : detail::split_list(val)) c.synthetic.push_back(detail::parse_synthetic_name(n));
    } else if (key == "spans") {
      c.spans.clear();
      for (const auto& n : detail::split_list(val)) c.spans.push_back(std::stoul(n));
    } else if (key == "include_raw") {
      c.include_raw = val == "1";
    } else if (key == "window") {
      c.window = std::stoul(val);
    } else if (key == "stride") {
      c.stride = std::stoul(val);
    } else if (key == "standardize_targets") {
      c.standardize_targets = val == "1";
    } else {
      throw ConfigError("unknown feature config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    buf_.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.append(s); }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  const std::string& bytes() const { return buf_; }

private:
  std::string buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string get_string() { return std::string(get_bytes(get<std::uint32_t>())); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw CorruptCheckpoint("checkpoint is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
  w.put(kCheckpointVersion);
  const ModelParams& p = ck.params;
  w.put(static_cast<std::uint8_t>(p.variant));
  w.put(static_cast<std::uint64_t>(p.dims.input));
  w.put(static_cast<std::uint64_t>(p.dims.hidden));
  w.put(static_cast<std::uint64_t>(p.dims.output));
  const auto blocks = p.blocks();
  w.put(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.put_string(b.name);
    w.put(static_cast<std::uint64_t>(b.value->rows()));
    w.put(static_cast<std::uint64_t>(b.value->cols()));
  }
  for (const auto& b : blocks)
    for (double v : b.value->values()) w.put(v);
  const auto& s = ck.stats;
  w.put(static_cast<std::uint8_t>(s.standardize_targets ? 1 : 0));
  w.put(static_cast<std::uint64_t>(s.channel_mean.size()));
  for (double v : s.channel_mean) w.put(v);
  for (double v : s.channel_std) w.put(v);
  for (double v : s.target_mean) w.put(v);
  for (double v : s.target_std) w.put(v);
  w.put_string(feature_config_text(ck.features));
  const std::uint64_t sum = detail::fnv1a(w.bytes());
  w.put(sum);
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes,
                                         std::optional<Variant> expected = std::nullopt) {
  if (bytes.size() < sizeof kCheckpointMagic + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CorruptCheckpoint("not a checkpoint file (bad magic or truncated)");
  detail::ByteReader r(bytes);
  r.get_bytes(sizeof kCheckpointMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) +
                          ")");
  }
  {
    detail::ByteReader tail(bytes.substr(bytes.size() - 8));
    if (tail.get<std::uint64_t>() != detail::fnv1a(bytes.substr(0, bytes.size() - 8)))
      throw CorruptCheckpoint("checkpoint checksum mismatch (corrupt or truncated file)");
  }

  const auto vtag = r.get<std::uint8_t>();
  if (vtag > 2) throw CorruptCheckpoint("unknown variant tag " + std::to_string(vtag));
  const auto variant = static_cast<Variant>(vtag);
  if (expected && *expected != variant) {
    throw VariantMismatch("checkpoint holds variant '" + std::string(variant_name(variant)) +
                          "', expected '" + std::string(variant_name(*expected)) + "'");
  }
  ModelDims dims;
  dims.input = r.get<std::uint64_t>();
  dims.hidden = r.get<std::uint64_t>();
  dims.output = r.get<std::uint64_t>();
  if (dims.input == 0 || dims.hidden == 0 || dims.output == 0 || dims.input > (1u << 20) ||
      dims.hidden > (1u << 16) || dims.output > (1u << 16))
    throw CorruptCheckpoint("implausible model dimensions");

  Checkpoint ck;
  ck.params = ModelParams::zeros(variant, dims);
  auto blocks = ck.params.blocks();
  const auto count = r.get<std::uint32_t>();
  if (count != blocks.size()) throw CorruptCheckpoint("block count does not match variant");
  for (auto& b : blocks) {
    const std::string name = r.get_string();
    const auto rows = r.get<std::uint64_t>(), cols = r.get<std::uint64_t>();
    if (name != b.name || rows != b.value->rows() || cols != b.value->cols())
      throw CorruptCheckpoint("shape table mismatch at block '" + name + "'");
  }
  for (auto& b : blocks)
    for (double& v : b.value->values()) v = r.get<double>();

  auto& s = ck.stats;
  s.standardize_targets = r.get<std::uint8_t>() != 0;
  const auto channels = r.get<std::uint64_t>();
  if (channels != dims.input) throw CorruptCheckpoint("standardization stats do not match input width");
  s.channel_mean.resize(channels);
  s.channel_std.resize(channels);
  for (double& v : s.channel_mean) v = r.get<double>();
  for (double& v : s.channel_std) v = r.get<double>();
  for (double& v : s.target_mean) v = r.get<double>();
  for (double& v : s.target_std) v = r.get<double>();
  ck.features = parse_feature_config_text(r.get_string());
  if (r.remaining() != 8) throw CorruptCheckpoint("trailing bytes in checkpoint");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path,
                                  std::optional<Variant> expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, expected);
}

}  // namespace pmsm
