#pragma once

#include <cstddef>

// Row-major dense products. Every output element is accumulated over the
// inner dimension in increasing order, whatever the row count or thread
// split, so results are bit-identical across chunk sizes and thread counts.
namespace svaesr::kernels {

/// y[n x o] = bias + x[n x k] * m[k x o]; with accumulate, y += x * m instead.
/// bias may be null.
template <typename T>
void matmul_nn(const T* x, const T* m, const T* bias, T* y, int n, int k, int o,
               bool accumulate = false);

/// c[k x o] += a[n x k]^T * b[n x o].
template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int n, int k, int o);

/// dst[cols x rows] = src[rows x cols]^T.
template <typename T>
void transpose(const T* src, T* dst, int rows, int cols);

/// 3x3 zero-padded patch gather of an HWC tensor: row p = (ky, kx, c) neighbourhood of pixel p.
template <typename T>
void im2col3x3(const T* in, T* col, int h, int w, int c);

/// Adjoint of im2col3x3: dIn[q] = sum of the col entries that read pixel q.
template <typename T>
void col2im3x3(const T* col, T* in, int h, int w, int c);

namespace serial {

template <typename T>
void matmul_nn(const T* x, const T* m, const T* bias, T* y, int n, int k, int o,
               bool accumulate = false);
template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* c, int n, int k, int o);
template <typename T>
void im2col3x3(const T* in, T* col, int h, int w, int c);
template <typename T>
void col2im3x3(const T* col, T* in, int h, int w, int c);

}  // namespace serial

}  // namespace svaesr::kernels
