#include "dirhoi/model.hpp"

#include <cmath>
#include <numbers>

#include "dirhoi/errors.hpp"

namespace dirhoi {

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.dim = 256;
  c.ffn_dim = 2048;
  c.num_queries = 64;
  c.max_sca_queries = 64;
  c.encoder_layers = 6;
  c.detection_layers = 3;
  c.interaction_layers = 3;
  c.pose_layers = 3;
  c.keypoints = 17;
  c.object_classes = 80;
  c.verb_classes = 117;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (grid_rows == 0 || grid_cols == 0) fail("grid must be non-empty");
  if (heads == 0 || dim % heads != 0) {
    fail("dim " + std::to_string(dim) + " is not divisible by " +
         std::to_string(heads) + " heads");
  }
  if (grouping.total() != heads) {
    fail("head grouping sums to " + std::to_string(grouping.total()) +
         ", expected " + std::to_string(heads));
  }
  if (dim % 16 != 0) fail("dim must be a multiple of 16 for the sinusoidal codes");
  if (num_queries == 0) fail("num_queries must be positive");
  if (keypoints == 0 || object_classes == 0 || verb_classes == 0) {
    fail("keypoint, object and verb counts must be positive");
  }
  if (encoder_layers == 0 || detection_layers == 0 || interaction_layers == 0) {
    fail("encoder, detection and interaction decoders need at least one layer");
  }
  if (use_ipe && pose_layers == 0) fail("pose decoder needs at least one layer");
  if (raw_features == 0 || ffn_dim == 0) fail("feature widths must be positive");
}

void sinusoid(double x, std::size_t freqs, double* out) {
  for (std::size_t f = 0; f < freqs; ++f) {
    const double e = freqs > 1 ? 4.0 * static_cast<double>(f) / static_cast<double>(freqs - 1) : 0.0;
    const double w = std::numbers::pi * std::exp2(e);
    out[2 * f] = std::sin(w * x);
    out[2 * f + 1] = std::cos(w * x);
  }
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_(config), params_(seed) {
  config_.validate();
  build_parameters();

  const std::size_t n = config_.grid_rows * config_.grid_cols;
  const std::size_t d = config_.dim;
  std::vector<double> pos(n * d);
  for (std::size_t r = 0; r < config_.grid_rows; ++r) {
    for (std::size_t c = 0; c < config_.grid_cols; ++c) {
      double* row = pos.data() + (r * config_.grid_cols + c) * d;
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(config_.grid_cols);
      const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(config_.grid_rows);
      sinusoid(x, d / 4, row);
      sinusoid(y, d / 4, row + d / 2);
    }
  }
  positions_ = Tensor({n, d}, std::move(pos));
}

// ---- parameter layout ---------------------------------------------------------

void Model::add_linear(const std::string& name, std::size_t in, std::size_t out,
                       bool bias) {
  params_.create(name + ".weight", {in, out}, Init::kXavier);
  if (bias) params_.create(name + ".bias", {out}, Init::kZeros);
}

void Model::add_attention(const std::string& name) {
  const std::size_t d = config_.dim;
  add_linear(name + ".q", d, d);
  add_linear(name + ".k", d, d);
  add_linear(name + ".v", d, d, false);
  add_linear(name + ".out", d, d);
}

void Model::add_norm(const std::string& name) {
  params_.create(name + ".gain", {config_.dim}, Init::kOnes);
  params_.create(name + ".bias", {config_.dim}, Init::kZeros);
}

void Model::add_ffn(const std::string& name) {
  add_linear(name + ".0", config_.dim, config_.ffn_dim);
  add_linear(name + ".1", config_.ffn_dim, config_.dim);
}

void Model::add_decoder(const std::string& name, std::size_t layers) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = name + "." + std::to_string(l);
    add_attention(p + ".self_attn");
    add_norm(p + ".norm1");
    add_attention(p + ".cross_attn");
    add_norm(p + ".norm2");
    add_ffn(p + ".ffn");
    add_norm(p + ".norm3");
  }
}

void Model::build_parameters() {
  const auto& c = config_;
  const std::size_t d = c.dim;
  add_linear("embed", c.raw_features, d);
  for (std::size_t l = 0; l < c.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    add_attention(p + ".self_attn");
    add_norm(p + ".norm1");
    add_ffn(p + ".ffn");
    add_norm(p + ".norm2");
  }
  params_.create("queries.learnable", {c.num_queries, d}, Init::kNormal);
  if (c.use_sca && c.sca_queries) add_linear("sca.query_proj", d, d);

  add_decoder("detection", c.detection_layers);
  add_linear("head.human.0", d, d);
  add_linear("head.human.1", d, 4);
  add_linear("head.object.0", d, d);
  add_linear("head.object.1", d, 4);
  add_linear("head.object_class", d, c.object_classes + 1);

  add_decoder("interaction", c.interaction_layers);
  add_linear("head.verb", d, c.verb_classes);

  if (c.use_ipe) {
    add_decoder("pose", c.pose_layers);
    add_linear("head.keypoints.0", d, d);
    add_linear("head.keypoints.1", d, 2 * c.keypoints);
    if (c.fusion == Fusion::kEarly) {
      add_linear("fusion.0", d, d);
      add_linear("fusion.1", d, d);
    } else {
      add_linear("head.verb_pose", d, c.verb_classes);
    }
    if (c.use_ipa_mask) {
      add_linear("ipa.0", d, d);
      add_linear("ipa.1", d, d);
      add_linear("ipa.2", d, c.keypoints);
    }
  }
}

// ---- building blocks ------------------------------------------------------------

Tensor Model::linear(const std::string& name, const Tensor& x) const {
  Tensor y = matmul(x, params_.get(name + ".weight"));
  const std::string b = name + ".bias";
  return params_.contains(b) ? add_row(y, params_.get(b)) : y;
}

Tensor Model::norm(const std::string& name, const Tensor& x) const {
  return layer_norm(x, params_.get(name + ".gain"), params_.get(name + ".bias"),
                    config_.layer_norm_eps);
}

Tensor Model::ffn(const std::string& name, const Tensor& x) const {
  return linear(name + ".1", relu(linear(name + ".0", x)));
}

Tensor Model::self_attention(const std::string& name, const Tensor& x,
                             const Tensor& pos,
                             const std::vector<std::size_t>& visible) const {
  const Tensor qk_in = pos.defined() ? add(x, pos) : x;
  AttentionOptions opt;
  opt.heads = config_.heads;
  opt.visible_keys = visible;
  auto res = multi_head_attention(linear(name + ".q", qk_in), linear(name + ".k", qk_in),
                                  linear(name + ".v", x), opt);
  return linear(name + ".out", res.output);
}

Tensor Model::decoder(const std::string& name, std::size_t layers,
                      const Tensor& queries, const Tensor& memory,
                      const std::vector<std::size_t>& visible,
                      const AttentionOptions& cross_template,
                      AttentionRecorder* recorder,
                      std::size_t record_offset) const {
  const Tensor mem_pos = config_.positional_encoding ? positions_ : Tensor();
  Tensor tgt = queries;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = name + "." + std::to_string(l);
    tgt = norm(p + ".norm1", add(tgt, self_attention(p + ".self_attn", tgt, queries, visible)));

    const std::string ca = p + ".cross_attn";
    CrossAttentionWeights w{params_.get(ca + ".q.weight"), params_.get(ca + ".q.bias"),
                            params_.get(ca + ".k.weight"), params_.get(ca + ".k.bias"),
                            params_.get(ca + ".v.weight")};
    AttentionOptions opt = cross_template;
    opt.record = recorder != nullptr && recorder->enabled();
    auto res = cross_attention(w, queries, tgt, memory, mem_pos, opt);
    if (opt.record) {
      recorder->store(record_offset + l, opt.heads, queries.dim(0), std::move(res.maps));
    }
    tgt = norm(p + ".norm2", add(tgt, linear(ca + ".out", res.output)));
    tgt = norm(p + ".norm3", add(tgt, ffn(p + ".ffn", tgt)));
  }
  return tgt;
}

Tensor Model::encode(const Tensor& features) const {
  const std::size_t n = config_.grid_rows * config_.grid_cols;
  if (features.rank() != 2 || features.dim(0) != n ||
      features.dim(1) != config_.raw_features) {
    throw DimensionError("scene features " + shape_str(features.shape()) +
                         " do not match the " + std::to_string(n) + "x" +
                         std::to_string(config_.raw_features) + " patch grid");
  }
  Tensor x = linear("embed", features);
  if (config_.positional_encoding) x = add(x, positions_);
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    x = norm(p + ".norm1", add(x, self_attention(p + ".self_attn", x, Tensor(), {})));
    x = norm(p + ".norm2", add(x, ffn(p + ".ffn", x)));
  }
  return x;
}

std::pair<Tensor, ShuntedMaskSet> Model::build_sca_queries(
    const std::vector<BoxPair>& pairs) const {
  const std::size_t d = config_.dim;
  const std::size_t n = std::min(pairs.size(), config_.max_sca_queries);
  ShuntedMaskSet masks;
  if (n == 0) return {Tensor(), masks};
  if (!params_.contains("sca.query_proj.weight")) {
    throw StateError("model was built without SCA queries");
  }
  const std::size_t per_value = d / 8;
  std::vector<double> code(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = pairs[i].human.as_array();
    const auto o = pairs[i].object.as_array();
    double* row = code.data() + i * d;
    for (std::size_t v = 0; v < 4; ++v) sinusoid(h[v], per_value / 2, row + v * per_value);
    for (std::size_t v = 0; v < 4; ++v) sinusoid(o[v], per_value / 2, row + (4 + v) * per_value);
    masks.human.push_back(rasterize_mask(pairs[i].human, config_.grid_rows, config_.grid_cols));
    masks.object.push_back(rasterize_mask(pairs[i].object, config_.grid_rows, config_.grid_cols));
  }
  Tensor q = linear("sca.query_proj", Tensor({n, d}, std::move(code)));
  return {q, std::move(masks)};
}

namespace {

BBox row_box(const Tensor& boxes, std::size_t row) {
  return {boxes.at(row, 0), boxes.at(row, 1), boxes.at(row, 2), boxes.at(row, 3)};
}

}  // namespace

ModelOutput Model::forward(const ForwardInputs& in) const {
  const auto& c = config_;
  ModelOutput out;
  if (in.recorder) in.recorder->clear();

  const Tensor memory = encode(in.features);

  Tensor queries = params_.get("queries.learnable");
  const std::size_t n_l = c.num_queries;
  ShuntedMaskSet gt_masks;
  std::size_t n_s = 0;
  if (in.training && c.use_sca && c.sca_queries && !in.gt_pairs.empty()) {
    auto [q_s, masks] = build_sca_queries(in.gt_pairs);
    n_s = q_s.dim(0);
    gt_masks = std::move(masks);
    queries = concat({queries, q_s}, 0);
  }
  out.learnable_rows = n_l;
  out.sca_rows = n_s;
  const std::size_t rows = n_l + n_s;

  std::vector<std::size_t> visible(rows, rows);
  if (c.isolate_learnable) {
    for (std::size_t i = 0; i < n_l; ++i) visible[i] = n_l;
  }

  AttentionOptions plain;
  plain.heads = c.heads;
  const Tensor q_int = decoder("detection", c.detection_layers, queries, memory, visible,
                               plain, nullptr, 0);
  out.detection_embedding = q_int;

  out.human_boxes = sigmoid(linear("head.human.1", relu(linear("head.human.0", q_int))));
  out.object_boxes = sigmoid(linear("head.object.1", relu(linear("head.object.0", q_int))));
  out.object_logits = linear("head.object_class", q_int);

  // Shunted masks, training only.
  AttentionOptions shunted = plain;
  if (in.training && c.use_sca) {
    auto predicted = [&](std::size_t first, std::size_t count) {
      ShuntedMaskSet m;
      for (std::size_t i = first; i < first + count; ++i) {
        m.human.push_back(rasterize_mask(row_box(out.human_boxes, i), c.grid_rows, c.grid_cols));
        m.object.push_back(rasterize_mask(row_box(out.object_boxes, i), c.grid_rows, c.grid_cols));
      }
      return m;
    };
    if (c.sca_queries) {
      if (n_s > 0) {
        out.masks = c.sca_gt_masks ? std::move(gt_masks) : predicted(n_l, n_s);
        out.mask_first_row = n_l;
      }
    } else {
      out.masks = predicted(0, n_l);
      out.mask_first_row = 0;
    }
    if (!out.masks.empty()) {
      shunted.shunt = ShuntSpec{c.grouping, out.mask_first_row, &out.masks};
    }
  }

  out.interaction_queries = q_int;
  out.appearance_embedding = decoder("interaction", c.interaction_layers, q_int, memory,
                                     visible, shunted, in.recorder, 0);

  if (c.use_ipe) {
    out.pose_queries = q_int;
    out.pose_embedding = decoder("pose", c.pose_layers, q_int, memory, visible, plain,
                                 in.recorder, c.interaction_layers);
    out.keypoints = sigmoid(linear("head.keypoints.1",
                                   relu(linear("head.keypoints.0", out.pose_embedding))));
    if (in.training && c.use_ipa_mask) {
      const Tensor h = relu(linear("ipa.0", q_int));
      out.keypoint_weights = softmax(linear("ipa.2", linear("ipa.1", h)), 1);
    }
    if (c.fusion == Fusion::kEarly) {
      out.interaction_embedding = add(out.appearance_embedding,
                                      linear("fusion.1", relu(linear("fusion.0", out.pose_embedding))));
      out.verb_logits = linear("head.verb", out.interaction_embedding);
    } else {
      out.interaction_embedding = out.appearance_embedding;
      out.verb_logits = add(linear("head.verb", out.appearance_embedding),
                            linear("head.verb_pose", out.pose_embedding));
    }
  } else {
    out.interaction_embedding = out.appearance_embedding;
    out.verb_logits = linear("head.verb", out.appearance_embedding);
  }
  return out;
}

}  // namespace dirhoi
