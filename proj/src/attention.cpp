#include "dirhoi/attention.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "dirhoi/errors.hpp"

namespace dirhoi {

namespace {

// Per-(head,row) offset into an owned copy of the masks; npos means unmasked.
// The copy lives in the backward closure, so callers may drop their masks.
struct ResolvedMasks {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> offset;
  std::vector<std::uint8_t> cells;

  const std::uint8_t* at(std::size_t i) const {
    return offset[i] == npos ? nullptr : cells.data() + offset[i];
  }
};

ResolvedMasks resolve_masks(const AttentionOptions& opt, std::size_t nq, std::size_t nk) {
  ResolvedMasks out;
  out.offset.assign(opt.heads * nq, ResolvedMasks::npos);
  if (!opt.shunt) return out;
  const ShuntSpec& s = *opt.shunt;
  if (s.grouping.total() != opt.heads) {
    throw ConfigError("head grouping " + std::to_string(s.grouping.human) + "+" +
                      std::to_string(s.grouping.object) + "+" +
                      std::to_string(s.grouping.global) + " does not sum to " +
                      std::to_string(opt.heads) + " heads");
  }
  if (!s.masks) return out;
  const ShuntedMaskSet& m = *s.masks;
  if (m.object.size() != m.human.size()) {
    throw DimensionError("shunted mask set has unequal human/object counts");
  }
  if (s.first_row + m.size() > nq) {
    throw DimensionError("shunted masks address rows beyond the query count");
  }
  out.cells.reserve(2 * m.size() * nk);
  for (std::size_t idx = 0; idx < m.size(); ++idx) {
    if (m.human[idx].cells.size() != nk || m.object[idx].cells.size() != nk) {
      throw DimensionError("shunted mask size differs from the key count");
    }
    const std::size_t row = s.first_row + idx;
    const std::size_t human_at = out.cells.size();
    out.cells.insert(out.cells.end(), m.human[idx].cells.begin(), m.human[idx].cells.end());
    const std::size_t object_at = out.cells.size();
    out.cells.insert(out.cells.end(), m.object[idx].cells.begin(), m.object[idx].cells.end());
    for (std::size_t h = 0; h < s.grouping.human; ++h) out.offset[h * nq + row] = human_at;
    for (std::size_t h = 0; h < s.grouping.object; ++h)
      out.offset[(s.grouping.human + h) * nq + row] = object_at;
  }
  return out;
}

// dst[c×n] = columns [off, off + width) of src[n×d], transposed.
void head_transpose(const double* src, double* dst, std::size_t n, std::size_t d,
                    std::size_t off, std::size_t width) {
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < width; ++c) dst[c * n + j] = src[j * d + off + c];
}

}  // namespace

AttentionResult multi_head_attention(const Tensor& q, const Tensor& k,
                                     const Tensor& v,
                                     const AttentionOptions& options) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("attention operands must be matrices");
  }
  const std::size_t nq = q.dim(0), nk = k.dim(0), d = q.dim(1);
  const std::size_t heads = options.heads;
  if (k.dim(1) != d || v.dim(1) != d || v.dim(0) != nk) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + ", k " +
                         shape_str(k.shape()) + ", v " + shape_str(v.shape()));
  }
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model width " + std::to_string(d) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  std::vector<std::size_t> visible = options.visible_keys;
  if (visible.empty()) visible.assign(nq, nk);
  if (visible.size() != nq) throw DimensionError("visible_keys per row mismatch");
  for (auto& c : visible) {
    if (c == 0 || c > nk) throw DimensionError("row must see 1..nk keys");
  }
  auto masks = resolve_masks(options, nq, nk);

  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double* Q = q.values().data();
  const double* K = k.values().data();
  const double* V = v.values().data();

  for (double x : q.values())
    if (!std::isfinite(x)) throw NumericError("attention query is not finite");

  // Pre-mask softmax probabilities, [head][row][key].
  std::vector<double> probs(heads * nq * nk, 0.0);
  std::vector<double> out(nq * d, 0.0);
  AttentionResult result;
  if (options.record) result.maps.assign(heads * nq * nk, 0.0);

  std::vector<double> kt(dh * nk);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    head_transpose(K, kt.data(), nk, d, off, dh);
    for (std::size_t i = 0; i < nq; ++i) {
      const std::size_t vis = visible[i];
      double* p = probs.data() + (h * nq + i) * nk;
      const double* qi = Q + i * d + off;
      for (std::size_t c = 0; c < dh; ++c) {
        const double qc = qi[c];
        const double* kc = kt.data() + c * nk;
        for (std::size_t j = 0; j < vis; ++j) p[j] += qc * kc[j];
      }
      double mx = -INFINITY;
      for (std::size_t j = 0; j < vis; ++j) {
        p[j] *= scale;
        mx = std::max(mx, p[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < vis; ++j) {
        p[j] = std::exp(p[j] - mx);
        total += p[j];
      }
      for (std::size_t j = 0; j < vis; ++j) p[j] /= total;

      const std::uint8_t* m = masks.at(h * nq + i);
      double* oi = out.data() + i * d + off;
      double* rec = options.record ? result.maps.data() + (h * nq + i) * nk : nullptr;
      for (std::size_t j = 0; j < vis; ++j) {
        const double a = m ? p[j] * static_cast<double>(m[j]) : p[j];
        if (rec) rec[j] = a;
        if (a == 0.0) continue;
        const double* vj = V + j * d + off;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += a * vj[c];
      }
    }
  }

  result.output = Tensor::from_op(
      {nq, d}, std::move(out), {q, k, v},
      [=, probs = std::move(probs), masks = std::move(masks),
       visible = std::move(visible)](detail::Node& self) {
        const double* G = self.grad.data();
        const double* Qv = self.parents[0]->value.data();
        const double* Kv = self.parents[1]->value.data();
        const double* Vv = self.parents[2]->value.data();
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        double* gq = pq.requires_grad ? pq.ensure_grad().data() : nullptr;
        double* gk = pk.requires_grad ? pk.ensure_grad().data() : nullptr;
        double* gv = pv.requires_grad ? pv.ensure_grad().data() : nullptr;
        std::vector<double> da(nk);
        std::vector<double> vt(dh * nk);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * dh;
          head_transpose(Vv, vt.data(), nk, d, off, dh);
          for (std::size_t i = 0; i < nq; ++i) {
            const std::size_t vis = visible[i];
            const double* p = probs.data() + (h * nq + i) * nk;
            const std::uint8_t* m = masks.at(h * nq + i);
            const double* gi = G + i * d + off;
            std::fill(da.begin(), da.begin() + static_cast<std::ptrdiff_t>(vis), 0.0);
            for (std::size_t c = 0; c < dh; ++c) {
              const double gc = gi[c];
              const double* vc = vt.data() + c * nk;
              for (std::size_t j = 0; j < vis; ++j) da[j] += gc * vc[j];
            }
            double dot = 0.0;
            for (std::size_t j = 0; j < vis; ++j) {
              const double mj = m ? static_cast<double>(m[j]) : 1.0;
              const double g = da[j];
              if (gv && mj != 0.0) {
                double* gvj = gv + j * d + off;
                const double a = p[j] * mj;
                for (std::size_t c = 0; c < dh; ++c) gvj[c] += a * gi[c];
              }
              da[j] = g * mj;
              dot += p[j] * da[j];
            }
            const double* qi = Qv + i * d + off;
            double* gqi = gq ? gq + i * d + off : nullptr;
            for (std::size_t j = 0; j < vis; ++j) {
              const double ds = p[j] * (da[j] - dot) * scale;
              if (ds == 0.0) continue;
              const double* kj = Kv + j * d + off;
              if (gqi)
                for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
              if (gk) {
                double* gkj = gk + j * d + off;
                for (std::size_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
              }
            }
          }
        }
      });
  return result;
}

AttentionResult cross_attention(const CrossAttentionWeights& w,
                                const Tensor& queries, const Tensor& prev,
                                const Tensor& memory, const Tensor& memory_pos,
                                const AttentionOptions& options) {
  const Tensor q = add_row(matmul(add(queries, prev), w.query_weight), w.query_bias);
  const Tensor keys_in = memory_pos.defined() ? add(memory, memory_pos) : memory;
  const Tensor k = add_row(matmul(keys_in, w.key_weight), w.key_bias);
  const Tensor v = matmul(memory, w.value_weight);
  return multi_head_attention(q, k, v, options);
}

void AttentionRecorder::store(std::size_t layer, std::size_t heads,
                              std::size_t queries, std::vector<double> maps) {
  if (!enabled_) return;
  if (maps.size() != heads * queries * rows_ * cols_) {
    throw DimensionError("recorded attention maps do not match the patch grid");
  }
  layers_[layer] = Layer{heads, queries, std::move(maps)};
}

const AttentionRecorder::Layer& AttentionRecorder::layer_or_throw(
    std::size_t layer) const {
  if (!enabled_) throw StateError("attention recording is disabled");
  auto it = layers_.find(layer);
  if (it == layers_.end()) {
    throw StateError("no attention recorded for layer " + std::to_string(layer));
  }
  return it->second;
}

std::size_t AttentionRecorder::head_count(std::size_t layer) const {
  return layer_or_throw(layer).heads;
}

std::size_t AttentionRecorder::query_count(std::size_t layer) const {
  return layer_or_throw(layer).queries;
}

std::vector<std::vector<double>> AttentionRecorder::dump(std::size_t layer,
                                                         std::size_t head) const {
  const Layer& l = layer_or_throw(layer);
  if (head >= l.heads) throw DimensionError("head index out of range");
  const std::size_t nk = rows_ * cols_;
  std::vector<std::vector<double>> grids(l.queries);
  for (std::size_t i = 0; i < l.queries; ++i) {
    const double* src = l.maps.data() + (head * l.queries + i) * nk;
    grids[i].assign(src, src + nk);
  }
  return grids;
}

std::size_t AttentionRecorder::write_grids(const std::filesystem::path& dir) const {
  if (!enabled_) throw StateError("attention recording is disabled");
  std::filesystem::create_directories(dir);
  std::size_t written = 0;
  for (const auto& [layer, l] : layers_) {
    for (std::size_t h = 0; h < l.heads; ++h) {
      const auto grids = dump(layer, h);
      for (std::size_t qi = 0; qi < grids.size(); ++qi) {
        const auto path = dir / ("attn_L" + std::to_string(layer) + "_H" +
                                 std::to_string(h) + "_Q" + std::to_string(qi) +
                                 ".txt");
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        os << std::setprecision(9);
        for (std::size_t r = 0; r < rows_; ++r) {
          for (std::size_t c = 0; c < cols_; ++c) {
            if (c) os << ' ';
            os << grids[qi][r * cols_ + c];
          }
          os << '\n';
        }
        ++written;
      }
    }
  }
  return written;
}

}  // namespace dirhoi
