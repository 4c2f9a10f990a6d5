#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ftbert/core/rng.hpp"
#include "ftbert/core/tape.hpp"
#include "ftbert/core/tensor.hpp"

namespace ftbert {

inline constexpr double kLayerNormEps = 1e-5;

// Plain tensor kernels (no tape).

/// [m x k] * [k x n]. Throws ShapeError naming both shapes.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Numerically stable softmax along `axis` (max-subtracted).
/// Throws NumericError on NaN input.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = kLayerNormEps);

/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

// Recorded operations. All inputs must live on the same tape.

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, double factor);
/// Adds a length-n vector to every row of an [m x n] matrix.
template <typename T>
Var<T> add_row(Var<T> a, Var<T> row);

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
/// a * b^T without materialising the transpose on the caller side.
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

/// Softmax over the last axis.
template <typename T>
Var<T> softmax(Var<T> x);
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps = kLayerNormEps);
template <typename T>
Var<T> gelu(Var<T> x);

/// Rows of `table` selected by `ids`: [ids.size() x H].
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count);
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts);
/// Row r as a [1 x n] matrix.
template <typename T>
Var<T> row(Var<T> x, std::size_t r);
template <typename T>
Var<T> first_rows(Var<T> x, std::size_t count);
/// Rows at `indices`, in that order.
template <typename T>
Var<T> gather_rows(Var<T> x, std::span<const std::size_t> indices);
/// Column-wise mean over rows: [m x n] -> [1 x n].
template <typename T>
Var<T> mean_rows(Var<T> x);
/// Column-wise max over rows; the gradient goes to the first maximal row.
template <typename T>
Var<T> max_rows(Var<T> x);
template <typename T>
Var<T> sum(Var<T> x);

/// Inverted dropout. Identity when `training` is false or p == 0.
template <typename T>
Var<T> dropout(Var<T> x, double p, Rng& rng, bool training);

/// Mean softmax cross-entropy over rows whose target is >= 0; rows with
/// target -1 are ignored. Returns 0 when no row is labelled.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets);

}  // namespace ftbert
