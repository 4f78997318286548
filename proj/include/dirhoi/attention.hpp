#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "dirhoi/geometry.hpp"
#include "dirhoi/tensor.hpp"

namespace dirhoi {

// Split of the T cross-attention heads into human, object and global groups.
// Concatenation order of head outputs is always human, object, global.
struct HeadGrouping {
  std::size_t human = 2;
  std::size_t object = 2;
  std::size_t global = 4;

  std::size_t total() const { return human + object + global; }
  bool operator==(const HeadGrouping&) const = default;
};

// One human/object mask pair per shunted query row.
struct ShuntedMaskSet {
  std::vector<PatchMask> human;
  std::vector<PatchMask> object;

  std::size_t size() const { return human.size(); }
  bool empty() const { return human.empty(); }
};

// Applies `masks` to query rows [first_row, first_row + masks.size()).
struct ShuntSpec {
  HeadGrouping grouping;
  std::size_t first_row = 0;
  const ShuntedMaskSet* masks = nullptr;
};

struct AttentionOptions {
  std::size_t heads = 1;
  // Per query row, how many leading keys it may attend to. Empty: all keys.
  std::vector<std::size_t> visible_keys;
  std::optional<ShuntSpec> shunt;
  bool record = false;
};

struct AttentionResult {
  Tensor output;
  // Post-mask attention maps laid out [head][query][key]; filled when recording.
  std::vector<double> maps;
};

// Scaled dot-product attention over T heads of width D/T. Masked heads are
// multiplied by their mask after the softmax without renormalization. The
// output is the concatenation of the per-head results, with no output
// projection.
AttentionResult multi_head_attention(const Tensor& q, const Tensor& k,
                                     const Tensor& v,
                                     const AttentionOptions& options);

struct CrossAttentionWeights {
  Tensor query_weight;  // D×D
  Tensor query_bias;    // D
  Tensor key_weight;    // D×D
  Tensor key_bias;      // D
  Tensor value_weight;  // D×D, head j owns columns [j·D/T, (j+1)·D/T)
};

// Cross-attention between queries and encoder memory. The attention query is
// (queries + prev)·W^Q; keys are (memory + memory_pos)·W^K and values
// memory·W^V.
AttentionResult cross_attention(const CrossAttentionWeights& weights,
                                const Tensor& queries, const Tensor& prev,
                                const Tensor& memory, const Tensor& memory_pos,
                                const AttentionOptions& options);

// Stores the post-mask maps of recorded layers for inspection.
class AttentionRecorder {
 public:
  AttentionRecorder(std::size_t grid_rows, std::size_t grid_cols)
      : rows_(grid_rows), cols_(grid_cols) {}

  void set_enabled(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_; }
  void clear() { layers_.clear(); }

  void store(std::size_t layer, std::size_t heads, std::size_t queries,
             std::vector<double> maps);

  std::size_t layer_count() const { return layers_.size(); }
  std::size_t head_count(std::size_t layer) const;
  std::size_t query_count(std::size_t layer) const;

  // One rows×cols grid per query for the given layer and head. Throws
  // StateError when recording was off or the layer was never stored.
  std::vector<std::vector<double>> dump(std::size_t layer,
                                        std::size_t head) const;

  // Writes attn_L<layer>_H<head>_Q<query>.txt for every stored map; returns
  // the number of files written.
  std::size_t write_grids(const std::filesystem::path& dir) const;

 private:
  struct Layer {
    std::size_t heads = 0;
    std::size_t queries = 0;
    std::vector<double> maps;
  };

  const Layer& layer_or_throw(std::size_t layer) const;

  std::size_t rows_;
  std::size_t cols_;
  bool enabled_ = false;
  std::map<std::size_t, Layer> layers_;
};

}  // namespace dirhoi
