#include "ftbert/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ftbert {

namespace {

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k x n] += A^T * B with A[m x k], B[m x n]
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void require_same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
}

template <typename T>
void check_finite(const Tensor<T>& x, const char* op) {
  for (T v : x.data()) {
    if (std::isnan(v)) throw NumericError(std::string(op) + ": NaN input");
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;

}  // namespace

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_matrix(x, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor<T> out({a.dim(0), b.dim(1)});
  gemm_acc(a.data().data(), b.data().data(), out.data().data(), a.dim(0), a.dim(1), b.dim(1));
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(x.shape()));
  }
  const std::size_t n = x.dim(axis);
  if (n == 0) throw ShapeError("softmax: empty axis");
  check_finite(x, "softmax");
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  const std::size_t outer = x.size() / (n * inner);
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[base + i * inner]);
      T total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T e = std::exp(x[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= total;
    }
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps) {
  const std::size_t h = x.cols();
  if (h < 2) throw ShapeError("layer_norm: last dimension must be >= 2");
  if (gamma.size() != h || beta.size() != h) {
    throw ShapeError("layer_norm: gain/bias " + shape_string(gamma.shape()) + "/" +
                     shape_string(beta.shape()) + " do not match input " + shape_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T* xr = x.data().data() + r * h;
    T mean = 0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= static_cast<T>(h);
    T var = 0;
    for (std::size_t j = 0; j < h; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(h);
    const T inv = T{1} / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t j = 0; j < h; ++j) {
      out[r * h + j] = (xr[j] - mean) * inv * gamma[j] + beta[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    const T u = static_cast<T>(kGeluC) * (v + static_cast<T>(kGeluK) * v * v * v);
    out[i] = T{0.5} * v * (T{1} + std::tanh(u));
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    for (auto in : {ia, ib}) {
      if (!t.requires_grad(in)) continue;
      auto& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    const auto& y = t.value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, double factor) {
  const T f = static_cast<T>(factor);
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= f;
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, f](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * f;
  });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> r) {
  require_same_tape(a, r);
  const auto& av = a.value();
  const auto& rv = r.value();
  const std::size_t n = av.cols();
  if (rv.size() != n) {
    throw ShapeError("add_row: row " + shape_string(rv.shape()) + " does not match " +
                     shape_string(av.shape()));
  }
  Tensor<T> out = av;
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  const auto ia = a.id, ir = r.id;
  return a.tape->record(std::move(out), {ia, ir}, [ia, ir, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ir)) {
      auto& gr = t.grad(ir);
      const std::size_t m = g.size() / n;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    }
  });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  Tensor<T> out = matmul(a.value(), b.value());
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (t.requires_grad(ia)) {
      const Tensor<T> bt = transpose(bv);
      gemm_acc(g.data().data(), bt.data().data(), t.grad(ia).data().data(), m, n, k);
    }
    if (t.requires_grad(ib)) {
      gemm_tn_acc(av.data().data(), g.data().data(), t.grad(ib).data().data(), m, k, n);
    }
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) {
    throw ShapeError("matmul_nt: shape mismatch " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()) + "^T");
  }
  Tensor<T> out = matmul(av, transpose(bv));
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    if (t.requires_grad(ia)) {
      gemm_acc(g.data().data(), bv.data().data(), t.grad(ia).data().data(), m, n, k);
    }
    if (t.requires_grad(ib)) {
      gemm_tn_acc(g.data().data(), av.data().data(), t.grad(ib).data().data(), m, n, k);
    }
  });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  const auto& xv = x.value();
  Tensor<T> out = softmax(xv, xv.rank() == 0 ? 0 : xv.rank() - 1);
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& gx = t.grad(ix);
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  const std::size_t h = xv.cols();
  if (h < 2) throw ShapeError("layer_norm: last dimension must be >= 2");
  if (gv.size() != h || bv.size() != h) {
    throw ShapeError("layer_norm: gain/bias " + shape_string(gv.shape()) + "/" +
                     shape_string(bv.shape()) + " do not match input " + shape_string(xv.shape()));
  }
  const std::size_t m = xv.rows();
  Tensor<T> xhat(xv.shape());
  std::vector<T> inv_std(m);
  Tensor<T> out(xv.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const T* xr = xv.data().data() + r * h;
    T mean = 0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= static_cast<T>(h);
    T var = 0;
    for (std::size_t j = 0; j < h; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(h);
    const T inv = T{1} / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = inv;
    for (std::size_t j = 0; j < h; ++j) {
      const T n = (xr[j] - mean) * inv;
      xhat[r * h + j] = n;
      out[r * h + j] = n * gv[j] + bv[j];
    }
  }
  const auto ix = x.id, ig = gamma.id, ib = beta.id;
  return x.tape->record(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, h, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t,
                                                                               std::size_t self) {
        const auto& g = t.grad(self);
        const auto& gv = t.value(ig);
        if (t.requires_grad(ig)) {
          auto& gg = t.grad(ig);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < h; ++j) gg[j] += g[r * h + j] * xhat[r * h + j];
        }
        if (t.requires_grad(ib)) {
          auto& gb = t.grad(ib);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < h; ++j) gb[j] += g[r * h + j];
        }
        if (t.requires_grad(ix)) {
          auto& gx = t.grad(ix);
          std::vector<T> gh(h);
          for (std::size_t r = 0; r < m; ++r) {
            T mean_g = 0, mean_gx = 0;
            for (std::size_t j = 0; j < h; ++j) {
              gh[j] = g[r * h + j] * gv[j];
              mean_g += gh[j];
              mean_gx += gh[j] * xhat[r * h + j];
            }
            mean_g /= static_cast<T>(h);
            mean_gx /= static_cast<T>(h);
            for (std::size_t j = 0; j < h; ++j) {
              gx[r * h + j] += inv_std[r] * (gh[j] - mean_g - xhat[r * h + j] * mean_gx);
            }
          }
        }
      });
}

template <typename T>
Var<T> gelu(Var<T> x) {
  Tensor<T> out = gelu(x.value());
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ix);
    auto& gx = t.grad(ix);
    const T c = static_cast<T>(kGeluC), k = static_cast<T>(kGeluK);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = xv[i];
      const T th = std::tanh(c * (v + k * v * v * v));
      const T d = T{0.5} * (T{1} + th) +
                  T{0.5} * v * (T{1} - th * th) * c * (T{1} + T{3} * k * v * v);
      gx[i] += g[i] * d;
    }
  });
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  const auto& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("embedding: table must be a matrix");
  const std::size_t v = tv.dim(0), h = tv.dim(1);
  Tensor<T> out({ids.size(), h});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw ShapeError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(v) + " rows");
    }
    std::copy_n(tv.data().data() + ids[i] * h, h, out.data().data() + i * h);
  }
  const auto it = table.id;
  std::vector<int> saved(ids.begin(), ids.end());
  return table.tape->record(std::move(out), {it},
                            [it, h, saved = std::move(saved)](Tape<T>& t, std::size_t self) {
                              const auto& g = t.grad(self);
                              auto& gt = t.grad(it);
                              for (std::size_t i = 0; i < saved.size(); ++i) {
                                T* dst = gt.data().data() + saved[i] * h;
                                const T* src = g.data().data() + i * h;
                                for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
                              }
                            });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count) {
  const auto& xv = x.value();
  const std::size_t n = xv.cols(), m = xv.rows();
  if (start + count > n) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_string(xv.shape()));
  }
  Tensor<T> out({m, count});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.data().data() + i * n + start, count, out.data().data() + i * count);
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix},
                        [ix, start, count, n, m](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto& gx = t.grad(ix);
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < count; ++j)
                              gx[i * n + start + j] += g[i * count + j];
                        });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths, ids;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p);
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    ids.push_back(p.id);
    total += p.cols();
  }
  Tensor<T> out({m, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    const std::size_t w = pv.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pv.data().data() + i * w, w, out.data().data() + i * total + offset);
    offset += w;
  }
  return parts[0].tape->record(
      std::move(out), ids, [ids, widths, m, total](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          const std::size_t w = widths[p];
          if (t.requires_grad(ids[p])) {
            auto& gp = t.grad(ids[p]);
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + offset + j];
          }
          offset += w;
        }
      });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  std::vector<std::size_t> sizes, ids;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p);
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    sizes.push_back(p.value().size());
    ids.push_back(p.id);
    total += p.rows();
  }
  Tensor<T> out({total, n});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + offset);
    offset += pv.size();
  }
  return parts[0].tape->record(std::move(out), ids, [ids, sizes](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (t.requires_grad(ids[p])) {
        auto& gp = t.grad(ids[p]);
        for (std::size_t i = 0; i < sizes[p]; ++i) gp[i] += g[offset + i];
      }
      offset += sizes[p];
    }
  });
}

template <typename T>
Var<T> first_rows(Var<T> x, std::size_t count) {
  const auto& xv = x.value();
  if (count > xv.rows()) {
    throw ShapeError("first_rows: " + std::to_string(count) + " rows requested from " +
                     shape_string(xv.shape()));
  }
  const std::size_t n = xv.cols();
  Tensor<T> out({count, n}, std::vector<T>(xv.data().begin(), xv.data().begin() + count * n));
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Var<T> gather_rows(Var<T> x, std::span<const std::size_t> indices) {
  const auto& xv = x.value();
  const std::size_t n = xv.cols();
  Tensor<T> out({indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " outside " +
                       shape_string(xv.shape()));
    }
    std::copy_n(xv.data().data() + indices[i] * n, n, out.data().data() + i * n);
  }
  const auto ix = x.id;
  std::vector<std::size_t> saved(indices.begin(), indices.end());
  return x.tape->record(std::move(out), {ix},
                        [ix, n, saved = std::move(saved)](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto& gx = t.grad(ix);
                          for (std::size_t i = 0; i < saved.size(); ++i)
                            for (std::size_t j = 0; j < n; ++j) gx[saved[i] * n + j] += g[i * n + j];
                        });
}

template <typename T>
Var<T> row(Var<T> x, std::size_t r) {
  const auto& xv = x.value();
  if (r >= xv.rows()) {
    throw ShapeError("row: index " + std::to_string(r) + " outside " + shape_string(xv.shape()));
  }
  const std::size_t n = xv.cols();
  Tensor<T> out({1, n}, std::vector<T>(xv.data().begin() + r * n, xv.data().begin() + (r + 1) * n));
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, r, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[j];
  });
}

template <typename T>
Var<T> mean_rows(Var<T> x) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor<T> out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += xv[i * n + j];
  for (auto& v : out.data()) v /= static_cast<T>(m);
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j] / static_cast<T>(m);
  });
}

template <typename T>
Var<T> max_rows(Var<T> x) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor<T> out({1, n});
  std::vector<std::size_t> argmax(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    T best = xv[j];
    for (std::size_t i = 1; i < m; ++i) {
      if (xv[i * n + j] > best) {
        best = xv[i * n + j];
        argmax[j] = i;
      }
    }
    out[j] = best;
  }
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix},
                        [ix, n, argmax = std::move(argmax)](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto& gx = t.grad(ix);
                          for (std::size_t j = 0; j < n; ++j) gx[argmax[j] * n + j] += g[j];
                        });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().data()) total += v;
  const auto ix = x.id;
  return x.tape->record(Tensor<T>::scalar(total), {ix}, [ix](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (auto& v : t.grad(ix).data()) v += g;
  });
}

template <typename T>
Var<T> dropout(Var<T> x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  const auto& xv = x.value();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(xv.size());
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() < p ? T{0} : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix},
                        [ix, mask = std::move(mask)](Tape<T>& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          auto& gx = t.grad(ix);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                        });
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets) {
  const auto& lv = logits.value();
  const std::size_t m = lv.rows(), c = lv.cols();
  if (targets.size() != m) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_string(lv.shape()));
  }
  Tensor<T> probs({m, c});
  std::size_t labelled = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] < 0) continue;
    if (static_cast<std::size_t>(targets[i]) >= c) {
      throw ShapeError("cross_entropy: target " + std::to_string(targets[i]) + " >= " +
                       std::to_string(c) + " classes");
    }
    ++labelled;
    const T* row_ptr = lv.data().data() + i * c;
    T mx = *std::max_element(row_ptr, row_ptr + c);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row_ptr[j] - mx);
      total += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= total;
    loss += static_cast<double>(std::log(total) + mx - row_ptr[targets[i]]);
  }
  const T denom = labelled ? static_cast<T>(labelled) : T{1};
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss / static_cast<double>(denom)));
  const auto il = logits.id;
  std::vector<int> saved(targets.begin(), targets.end());
  return logits.tape->record(
      std::move(out), {il},
      [il, c, denom, saved = std::move(saved), probs = std::move(probs)](Tape<T>& t,
                                                                         std::size_t self) {
        const T g = t.grad(self)[0] / denom;
        auto& gl = t.grad(il);
        for (std::size_t i = 0; i < saved.size(); ++i) {
          if (saved[i] < 0) continue;
          for (std::size_t j = 0; j < c; ++j) gl[i * c + j] += g * probs[i * c + j];
          gl[i * c + saved[i]] -= g;
        }
      });
}

#define FTBERT_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                            \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                double);                                                \
  template Tensor<T> gelu(const Tensor<T>&);                                            \
  template Tensor<T> transpose(const Tensor<T>&);                                       \
  template Var<T> add(Var<T>, Var<T>);                                                  \
  template Var<T> mul(Var<T>, Var<T>);                                                  \
  template Var<T> scale(Var<T>, double);                                                \
  template Var<T> add_row(Var<T>, Var<T>);                                              \
  template Var<T> matmul(Var<T>, Var<T>);                                               \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                            \
  template Var<T> softmax(Var<T>);                                                      \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, double);                           \
  template Var<T> gelu(Var<T>);                                                         \
  template Var<T> embedding(Var<T>, std::span<const int>);                              \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                         \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                              \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                              \
  template Var<T> row(Var<T>, std::size_t);                                             \
  template Var<T> first_rows(Var<T>, std::size_t);                                      \
  template Var<T> gather_rows(Var<T>, std::span<const std::size_t>);                    \
  template Var<T> mean_rows(Var<T>);                                                    \
  template Var<T> max_rows(Var<T>);                                                     \
  template Var<T> sum(Var<T>);                                                          \
  template Var<T> dropout(Var<T>, double, Rng&, bool);                                  \
  template Var<T> cross_entropy(Var<T>, std::span<const int>);

FTBERT_INSTANTIATE_OPS(float)
FTBERT_INSTANTIATE_OPS(double)

#undef FTBERT_INSTANTIATE_OPS

}  // namespace ftbert
