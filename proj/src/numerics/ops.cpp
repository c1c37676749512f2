#include "gvmt/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gvmt/errors.h"

namespace gvmt::num {

using detail::TensorImpl;

namespace {

bool tracks(const Tensor& t) { return grad_enabled() && t.requires_grad(); }

// Builds the result tensor and, when any input is tracked, records `fn` on the graph.
template <class Fn>
Tensor record(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs, Fn&& fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  bool any = false;
  for (const auto& in : inputs) any = any || tracks(in);
  if (!any) return out;
  auto node = std::make_shared<detail::Node>();
  for (const auto& in : inputs) node->parents.push_back(in.impl());
  node->backward = std::forward<Fn>(fn);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
  return out;
}

template <class Fn>
Tensor record_many(Shape shape, std::vector<double> data, std::span<const Tensor> inputs, Fn&& fn) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  bool any = false;
  for (const auto& in : inputs) any = any || tracks(in);
  if (!any) return out;
  auto node = std::make_shared<detail::Node>();
  for (const auto& in : inputs) node->parents.push_back(in.impl());
  node->backward = std::forward<Fn>(fn);
  out.impl()->requires_grad = true;
  out.impl()->node = std::move(node);
  return out;
}

TensorImpl& parent(TensorImpl& out, std::size_t i) { return *out.node->parents[i]; }

void require_matrix(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_row_of(const Tensor& x, const Tensor& v, const char* op) {
  require_matrix(x, op);
  if (v.numel() != x.cols()) {
    throw ShapeError(std::string(op) + ": broadcast row " + shape_str(v.shape()) + " does not fit " +
                     shape_str(x.shape()));
  }
}

template <class F>
Tensor unary(const Tensor& a, F f, std::function<void(TensorImpl&)> bw) {
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return record(a.shape(), std::move(out), {a}, std::move(bw));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " · " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* o = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* br = B + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return record({m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    TensorImpl& pb = parent(o, 1);
    const double* G = o.grad.data();
    if (pa.requires_grad) {
      const double* B = pb.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* g = G + i * n;
          const double* br = B + p * n;
          for (std::size_t j = 0; j < n; ++j) s += g[j] * br[j];
          pa.grad[i * k + p] += s;
        }
      }
    }
    if (pb.requires_grad) {
      const double* A = pa.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* gb = pb.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * g[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto in = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return record({n, m}, std::move(out), {a}, [m, n](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) pa.grad[i * n + j] += o.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return record(a.shape(), std::move(out), {a, b}, [](TensorImpl& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      TensorImpl& pp = parent(o, p);
      if (!pp.requires_grad) continue;
      for (std::size_t i = 0; i < o.grad.size(); ++i) pp.grad[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return record(a.shape(), std::move(out), {a, b}, [](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    TensorImpl& pb = parent(o, 1);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += o.grad[i];
      if (pb.requires_grad) pb.grad[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return record(a.shape(), std::move(out), {a, b}, [](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    TensorImpl& pb = parent(o, 1);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += o.grad[i] * pb.data[i];
      if (pb.requires_grad) pb.grad[i] += o.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) { return affine(a, s, 0.0); }

Tensor affine(const Tensor& a, double m, double c) {
  return unary(a, [m, c](double x) { return m * x + c; }, [m](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) pa.grad[i] += m * o.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (pa.data[i] > 0.0) pa.grad[i] += o.grad[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  auto f = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  return unary(a, f, [](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double s = o.data[i];
      pa.grad[i] += o.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor add_row(const Tensor& x, const Tensor& v) {
  require_row_of(x, v, "add_row");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto in = x.data(), row = v.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] + row[j];
  return record(x.shape(), std::move(out), {x, v}, [m, n](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    TensorImpl& pv = parent(o, 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = o.grad[i * n + j];
        if (px.requires_grad) px.grad[i * n + j] += g;
        if (pv.requires_grad) pv.grad[j] += g;
      }
    }
  });
}

Tensor mul_row(const Tensor& x, const Tensor& v) {
  require_row_of(x, v, "mul_row");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto in = x.data(), row = v.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] * row[j];
  return record(x.shape(), std::move(out), {x, v}, [m, n](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    TensorImpl& pv = parent(o, 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = o.grad[i * n + j];
        if (px.requires_grad) px.grad[i * n + j] += g * pv.data[j];
        if (pv.requires_grad) pv.grad[j] += g * px.data[i * n + j];
      }
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& w, std::span<const std::size_t> row_to_weight) {
  require_matrix(x, "scale_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (row_to_weight.size() != m) throw ShapeError("scale_rows: one weight index per row required");
  for (auto idx : row_to_weight)
    if (idx >= w.numel()) throw ShapeError("scale_rows: weight index out of range");
  std::vector<std::size_t> map(row_to_weight.begin(), row_to_weight.end());
  std::vector<double> out(m * n);
  auto in = x.data(), wt = w.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] * wt[map[i]];
  return record(x.shape(), std::move(out), {x, w}, [m, n, map = std::move(map)](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    TensorImpl& pw = parent(o, 1);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = o.grad[i * n + j];
        if (px.requires_grad) px.grad[i * n + j] += g * pw.data[map[i]];
        acc += g * px.data[i * n + j];
      }
      if (pw.requires_grad) pw.grad[map[i]] += acc;
    }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return record({1}, {s}, {a}, [](TensorImpl& o) {
    TensorImpl& pa = parent(o, 0);
    for (auto& g : pa.grad) g += o.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mean_rows(const Tensor& x) {
  require_matrix(x, "mean_rows");
  const std::size_t offsets[2] = {0, x.rows()};
  return segment_mean_rows(x, offsets);
}

Tensor segment_mean_rows(const Tensor& x, std::span<const std::size_t> offsets) {
  require_matrix(x, "segment_mean_rows");
  const std::size_t n = x.cols();
  if (offsets.size() < 2 || offsets.back() > x.rows()) throw ShapeError("segment_mean_rows: bad offsets");
  const std::size_t b = offsets.size() - 1;
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  std::vector<double> out(b * n, 0.0);
  auto in = x.data();
  for (std::size_t s = 0; s < b; ++s) {
    if (off[s + 1] <= off[s]) throw ShapeError("segment_mean_rows: empty segment");
    const double inv = 1.0 / static_cast<double>(off[s + 1] - off[s]);
    for (std::size_t i = off[s]; i < off[s + 1]; ++i)
      for (std::size_t j = 0; j < n; ++j) out[s * n + j] += in[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[s * n + j] *= inv;
  }
  return record({b, n}, std::move(out), {x}, [b, n, off = std::move(off)](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    for (std::size_t s = 0; s < b; ++s) {
      const double inv = 1.0 / static_cast<double>(off[s + 1] - off[s]);
      for (std::size_t i = off[s]; i < off[s + 1]; ++i)
        for (std::size_t j = 0; j < n; ++j) px.grad[i * n + j] += o.grad[s * n + j] * inv;
    }
  });
}

Tensor mean_of_blocks(const Tensor& x, std::span<const BlockGroup> groups) {
  require_matrix(x, "mean_of_blocks");
  const std::size_t n = x.cols();
  std::vector<BlockGroup> gs(groups.begin(), groups.end());
  std::size_t total = 0;
  for (const auto& g : gs) {
    if (g.n_blocks == 0 || g.block_rows == 0) throw ShapeError("mean_of_blocks: empty group");
    if (g.begin + g.block_rows * g.n_blocks > x.rows()) throw ShapeError("mean_of_blocks: group out of range");
    total += g.block_rows;
  }
  if (total == 0) throw ShapeError("mean_of_blocks: no groups");
  std::vector<double> out(total * n, 0.0);
  auto in = x.data();
  std::size_t row = 0;
  for (const auto& g : gs) {
    const double inv = 1.0 / static_cast<double>(g.n_blocks);
    for (std::size_t r = 0; r < g.block_rows; ++r) {
      double* o = &out[(row + r) * n];
      // fixed block order keeps the reduction deterministic
      for (std::size_t blk = 0; blk < g.n_blocks; ++blk) {
        const double* src = &in[(g.begin + blk * g.block_rows + r) * n];
        for (std::size_t j = 0; j < n; ++j) o[j] += src[j];
      }
      for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
    }
    row += g.block_rows;
  }
  return record({total, n}, std::move(out), {x}, [n, gs = std::move(gs)](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    std::size_t row = 0;
    for (const auto& g : gs) {
      const double inv = 1.0 / static_cast<double>(g.n_blocks);
      for (std::size_t r = 0; r < g.block_rows; ++r) {
        const double* go = &o.grad[(row + r) * n];
        for (std::size_t blk = 0; blk < g.n_blocks; ++blk) {
          double* dst = &px.grad[(g.begin + blk * g.block_rows + r) * n];
          for (std::size_t j = 0; j < n; ++j) dst[j] += go[j] * inv;
        }
      }
      row += g.block_rows;
    }
  });
}

Tensor normalize_sum(const Tensor& x, double factor) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  if (!(s > 0.0)) throw NumericError("normalize_sum: non-positive total");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.data()[i] / s;
  return record(x.shape(), std::move(out), {x}, [s, factor](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    // d(f·x_i/s)/dx_j = f·(δ_ij − x_i/s)/s
    double dot = 0.0;
    for (std::size_t i = 0; i < o.grad.size(); ++i) dot += o.grad[i] * px.data[i];
    for (std::size_t j = 0; j < o.grad.size(); ++j) px.grad[j] += factor * (o.grad[j] - dot / s) / s;
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_matrix(table, "gather_rows");
  const std::size_t n = table.cols();
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * n);
  auto in = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(idx[i]) + " out of range " +
                       std::to_string(table.rows()));
    }
    std::copy_n(&in[idx[i] * n], n, &out[i * n]);
  }
  const std::size_t count = idx.size();
  return record({count, n}, std::move(out), {table}, [n, idx = std::move(idx)](TensorImpl& o) {
    TensorImpl& pt = parent(o, 0);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) pt.grad[idx[i] * n + j] += o.grad[i * n + j];
  });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols) {
  require_matrix(x, "gather_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (cols.empty()) throw ShapeError("gather_cols: no columns");
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  for (auto c : idx)
    if (c >= n) throw ShapeError("gather_cols: column out of range");
  const std::size_t k = idx.size();
  std::vector<double> out(m * k);
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = in[i * n + idx[j]];
  return record({m, k}, std::move(out), {x}, [m, n, k, idx = std::move(idx)](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) px.grad[i * n + idx[j]] += o.grad[i * k + j];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t n = x.cols();
  if (count == 0 || begin + count > x.rows()) throw ShapeError("slice_rows: range out of bounds");
  auto in = x.data();
  std::vector<double> out(in.begin() + begin * n, in.begin() + (begin + count) * n);
  return record({count, n}, std::move(out), {x}, [begin, n](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) px.grad[begin * n + i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (count == 0 || begin + count > n) throw ShapeError("slice_cols: range out of bounds");
  std::vector<double> out(m * count);
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(&in[i * n + begin], count, &out[i * count]);
  return record({m, count}, std::move(out), {x}, [m, n, begin, count](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) px.grad[i * n + begin + j] += o.grad[i * count + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<double> out;
  std::vector<std::size_t> starts;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeError("concat_rows: column counts differ");
    starts.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    m += p.rows();
  }
  return record_many({m, n}, std::move(out), parts, [starts = std::move(starts)](TensorImpl& o) {
    for (std::size_t k = 0; k < starts.size(); ++k) {
      TensorImpl& pp = parent(o, k);
      if (!pp.requires_grad) continue;
      for (std::size_t i = 0; i < pp.data.size(); ++i) pp.grad[i] += o.grad[starts[k] + i];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(&p.data()[i * w], w, &out[i * n + c0]);
    c0 += w;
  }
  return record_many({m, n}, std::move(out), parts, [m, n, widths = std::move(widths)](TensorImpl& o) {
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      TensorImpl& pp = parent(o, k);
      const std::size_t w = widths[k];
      if (pp.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) pp.grad[i * w + j] += o.grad[i * n + c0 + j];
      }
      c0 += w;
    }
  });
}

Tensor softmax_rows(const Tensor& x, std::optional<std::span<const bool>> mask) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<bool> keep(m * n, true);
  if (mask) {
    if (mask->size() != m * n) throw ShapeError("softmax_rows: mask size differs from input");
    for (std::size_t i = 0; i < m * n; ++i) keep[i] = (*mask)[i];
  }
  std::vector<double> out(m * n, 0.0);
  auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (keep[i * n + j]) mx = std::max(mx, in[i * n + j]);
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw NumericError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep[i * n + j]) continue;
      out[i * n + j] = std::exp(in[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return record(x.shape(), std::move(out), {x}, [m, n](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += o.grad[i * n + j] * o.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) px.grad[i * n + j] += o.data[i * n + j] * (o.grad[i * n + j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_row_of(x, gain, "layer_norm");
  require_row_of(x, bias, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  auto in = x.data(), g = gain.data(), b = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = in[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (in[i * n + j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * g[j] + b[j];
    }
  }
  return record(x.shape(), std::move(out), {x, gain, bias},
                [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl& o) {
                  TensorImpl& px = parent(o, 0);
                  TensorImpl& pg = parent(o, 1);
                  TensorImpl& pb = parent(o, 2);
                  std::vector<double> dxhat(n);
                  for (std::size_t i = 0; i < m; ++i) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      const double gy = o.grad[i * n + j];
                      if (pg.requires_grad) pg.grad[j] += gy * xhat[i * n + j];
                      if (pb.requires_grad) pb.grad[j] += gy;
                      dxhat[j] = gy * pg.data[j];
                      mean_d += dxhat[j];
                      mean_dx += dxhat[j] * xhat[i * n + j];
                    }
                    if (!px.requires_grad) continue;
                    mean_d /= static_cast<double>(n);
                    mean_dx /= static_cast<double>(n);
                    for (std::size_t j = 0; j < n; ++j) {
                      px.grad[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
                    }
                  }
                });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (auto& v : mask) v = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
  return record(x.shape(), std::move(out), {x}, [mask = std::move(mask)](TensorImpl& o) {
    TensorImpl& px = parent(o, 0);
    for (std::size_t i = 0; i < o.grad.size(); ++i) px.grad[i] += o.grad[i] * mask[i];
  });
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_data({rows, cols}, std::move(v), true);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const AttentionGroup> groups,
                 const AttentionOptions& options, AttentionProbs* probs) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  const std::size_t d = q.cols();
  const std::size_t heads = options.heads;
  if (k.cols() != d || v.cols() != d) throw ShapeError("attention: q/k/v widths differ");
  if (k.rows() != v.rows()) throw ShapeError("attention: keys and values differ in length");
  if (heads == 0 || d % heads != 0) throw ShapeError("attention: width not divisible by head count");
  if (options.key_mask && options.key_mask->size() != k.rows()) throw ShapeError("attention: key mask size");
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<AttentionGroup> gs(groups.begin(), groups.end());
  std::vector<std::size_t> p_off;  // probability storage offset per group
  std::size_t total_q = 0, total_p = 0;
  for (const auto& g : gs) {
    if (g.q_len == 0 || g.k_len == 0) throw NumericError("attention: empty attention target");
    if (g.q_begin + g.q_len > q.rows() || g.k_begin + g.k_len > k.rows()) {
      throw ShapeError("attention: group out of range");
    }
    p_off.push_back(total_p);
    total_p += heads * g.q_len * g.k_len;
    total_q += g.q_len;
  }
  if (gs.empty()) throw ShapeError("attention: no groups");

  std::vector<bool> kmask;
  if (options.key_mask) kmask.assign(options.key_mask->begin(), options.key_mask->end());
  const bool causal = options.causal;
  auto visible = [&](const AttentionGroup& g, std::size_t i, std::size_t j) {
    if (causal && j > i + (g.k_len - std::min(g.k_len, g.q_len))) return false;
    if (!kmask.empty() && !kmask[g.k_begin + j]) return false;
    return true;
  };

  const double* Q = q.data().data();
  const double* K = k.data().data();
  const double* V = v.data().data();
  std::vector<double> P(total_p, 0.0);
  std::vector<double> out(total_q * d, 0.0);
  std::vector<std::size_t> out_row(gs.size());
  std::size_t orow = 0;
  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    const auto& g = gs[gi];
    out_row[gi] = orow;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < g.q_len; ++i) {
        double* pr = &P[p_off[gi] + (h * g.q_len + i) * g.k_len];
        const double* qi = Q + (g.q_begin + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < g.k_len; ++j) {
          if (!visible(g, i, j)) continue;
          const double* kj = K + (g.k_begin + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          pr[j] = s * sc;
          mx = std::max(mx, pr[j]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
          throw NumericError("attention: query row has no visible key");
        }
        double z = 0.0;
        for (std::size_t j = 0; j < g.k_len; ++j) {
          if (!visible(g, i, j)) {
            pr[j] = 0.0;
            continue;
          }
          pr[j] = std::exp(pr[j] - mx);
          z += pr[j];
        }
        double* oi = &out[(orow + i) * d + h * dh];
        for (std::size_t j = 0; j < g.k_len; ++j) {
          pr[j] /= z;
          if (pr[j] == 0.0) continue;
          const double* vj = V + (g.k_begin + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += pr[j] * vj[c];
        }
      }
    }
    orow += g.q_len;
  }
  if (probs) {
    probs->values = P;
    probs->group_offsets = p_off;
  }

  return record({total_q, d}, std::move(out), {q, k, v},
                [gs = std::move(gs), p_off = std::move(p_off), out_row = std::move(out_row), P = std::move(P),
                 heads, dh, d, sc](TensorImpl& o) {
                  TensorImpl& pq = parent(o, 0);
                  TensorImpl& pk = parent(o, 1);
                  TensorImpl& pv = parent(o, 2);
                  std::vector<double> dp;
                  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
                    const auto& g = gs[gi];
                    dp.assign(g.k_len, 0.0);
                    for (std::size_t h = 0; h < heads; ++h) {
                      for (std::size_t i = 0; i < g.q_len; ++i) {
                        const double* pr = &P[p_off[gi] + (h * g.q_len + i) * g.k_len];
                        const double* go = &o.grad[(out_row[gi] + i) * d + h * dh];
                        double dot = 0.0;
                        for (std::size_t j = 0; j < g.k_len; ++j) {
                          if (pr[j] == 0.0) {
                            dp[j] = 0.0;
                            continue;
                          }
                          const double* vj = &pv.data[(g.k_begin + j) * d + h * dh];
                          double s = 0.0;
                          for (std::size_t c = 0; c < dh; ++c) s += go[c] * vj[c];
                          dp[j] = s;
                          dot += pr[j] * s;
                          if (pv.requires_grad) {
                            double* gv = &pv.grad[(g.k_begin + j) * d + h * dh];
                            for (std::size_t c = 0; c < dh; ++c) gv[c] += pr[j] * go[c];
                          }
                        }
                        const std::size_t qrow = (g.q_begin + i) * d + h * dh;
                        for (std::size_t j = 0; j < g.k_len; ++j) {
                          if (pr[j] == 0.0) continue;
                          const double ds = pr[j] * (dp[j] - dot) * sc;
                          const std::size_t krow = (g.k_begin + j) * d + h * dh;
                          if (pq.requires_grad)
                            for (std::size_t c = 0; c < dh; ++c) pq.grad[qrow + c] += ds * pk.data[krow + c];
                          if (pk.requires_grad)
                            for (std::size_t c = 0; c < dh; ++c) pk.grad[krow + c] += ds * pq.data[qrow + c];
                        }
                      }
                    }
                  }
                });
}

Tensor cross_entropy_label_smoothed(const Tensor& logits, std::span<const long> targets, double epsilon) {
  require_matrix(logits, "cross_entropy");
  const std::size_t n = logits.rows(), V = logits.cols();
  if (targets.size() != n) throw ShapeError("cross_entropy: one target per logit row required");
  if (epsilon < 0.0 || epsilon >= 1.0) throw ConfigError("cross_entropy: epsilon must be in [0,1)");
  std::vector<long> tg(targets.begin(), targets.end());
  std::size_t counted = 0;
  for (auto t : tg) {
    if (t == kIgnoreTarget) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= V) {
      throw ShapeError("cross_entropy: target id " + std::to_string(t) + " outside vocabulary of size " +
                       std::to_string(V));
    }
    ++counted;
  }
  if (counted == 0) throw ShapeError("cross_entropy: every target is ignored");
  auto in = logits.data();
  std::vector<double> prob(n * V);
  double loss = 0.0;
  const double off = epsilon / static_cast<double>(V);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &in[i * V];
    const double mx = *std::max_element(row, row + V);
    double z = 0.0;
    for (std::size_t y = 0; y < V; ++y) z += std::exp(row[y] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t y = 0; y < V; ++y) prob[i * V + y] = std::exp(row[y] - lse);
    if (tg[i] == kIgnoreTarget) continue;
    double li = 0.0;
    for (std::size_t y = 0; y < V; ++y) {
      const double qy = off + (static_cast<long>(y) == tg[i] ? 1.0 - epsilon : 0.0);
      li -= qy * (row[y] - lse);
    }
    loss += li;
  }
  loss /= static_cast<double>(counted);
  return record({1}, {loss}, {logits},
                [n, V, off, epsilon, counted, tg = std::move(tg), prob = std::move(prob)](TensorImpl& o) {
                  TensorImpl& pl = parent(o, 0);
                  const double g = o.grad[0] / static_cast<double>(counted);
                  for (std::size_t i = 0; i < n; ++i) {
                    if (tg[i] == kIgnoreTarget) continue;
                    for (std::size_t y = 0; y < V; ++y) {
                      const double qy = off + (static_cast<long>(y) == tg[i] ? 1.0 - epsilon : 0.0);
                      pl.grad[i * V + y] += g * (prob[i * V + y] - qy);
                    }
                  }
                });
}

}  // namespace gvmt::num
