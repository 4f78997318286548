#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "dirhoi/tensor.hpp"

namespace dirhoi {

enum class Init { kZeros, kOnes, kXavier, kNormal };

// Ordered, named collection of trainable leaves. Each parameter draws its
// initial values from a generator keyed by (seed, name), so two models that
// share a parameter name start from identical values for it regardless of
// which other parameters exist.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::uint64_t seed) : seed_(seed) {}

  Tensor& create(const std::string& name, Shape shape, Init init);

  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  void zero_grad();

 private:
  std::uint64_t seed_ = 0;
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary checkpoint:
//   magic "DIRHOICK" | u32 version | u32 count |
//   count × (u32 name_len | name | u32 rank | rank × u64 extent | f64 values)
// All integers and doubles little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into matching parameters. Every parameter must be
// present with the same shape; extra checkpoint entries are an error too.
void load_checkpoint(ParameterSet& params, const std::vector<CheckpointEntry>& entries);

std::uint64_t fnv1a(const std::string& text);

}  // namespace dirhoi
