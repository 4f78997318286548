#include "dirhoi/parameters.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "dirhoi/errors.hpp"

namespace dirhoi {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Tensor& ParameterSet::create(const std::string& name, Shape shape, Init init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  const std::size_t n = shape_numel(shape);
  std::vector<double> v(n, 0.0);
  const std::uint64_t key = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  std::mt19937_64 rng(seq);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      std::fill(v.begin(), v.end(), 1.0);
      break;
    case Init::kXavier: {
      const double fan_in = shape.size() == 2 ? static_cast<double>(shape[0]) : 1.0;
      const double fan_out = shape.size() == 2 ? static_cast<double>(shape[1]) : static_cast<double>(n);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& x : v) x = dist(rng);
      break;
    }
    case Init::kNormal: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (auto& x : v) x = dist(rng);
      break;
    }
  }
  index_[name] = entries_.size();
  entries_.emplace_back(name, Tensor(std::move(shape), std::move(v), true));
  return entries_.back().second;
}

bool ParameterSet::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return entries_[it->second].second;
}

Tensor& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return entries_[it->second].second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

// ---- checkpoint -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'I', 'R', 'H', 'O', 'I', 'C', 'K'};

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint is truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint64_t>(out, e);
    for (double x : t.values()) put<double>(out, x);
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.text(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.text(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    }
    const std::size_t n = shape_numel(e.shape);
    e.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) e.values[k] = r.get<double>();
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint");
  return entries;
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_checkpoint(ParameterSet& params, const std::vector<CheckpointEntry>& entries) {
  if (entries.size() != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(entries.size()) +
                      " parameters, model expects " + std::to_string(params.size()));
  }
  for (const auto& e : entries) {
    if (!params.contains(e.name)) throw ConfigError("checkpoint parameter " + e.name + " is unknown");
    Tensor& t = params.get(e.name);
    if (t.shape() != e.shape) {
      throw DimensionError("checkpoint shape " + shape_str(e.shape) + " for " + e.name +
                           ", model has " + shape_str(t.shape()));
    }
    auto dst = t.mutable_values();
    std::copy(e.values.begin(), e.values.end(), dst.begin());
  }
}

}  // namespace dirhoi
