#include "svaesr/nn/layers.hpp"

#include <cmath>
#include <vector>

#include "svaesr/core/error.hpp"
#include "svaesr/kernels/dense.hpp"

namespace svaesr::nn {

namespace {

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[4];
  return buffers[slot];
}

// Copies columns [c0, c0 + width) of m into a contiguous rows x width block.
template <typename T>
void gather_columns(const Matrix<T>& m, int c0, int width, T* dst) {
  for (int r = 0; r < m.rows; ++r) std::copy(m.row(r) + c0, m.row(r) + c0 + width, dst + r * width);
}

template <typename T>
void scatter_columns(const T* src, int width, Matrix<T>& m, int c0) {
  for (int r = 0; r < m.rows; ++r) std::copy(src + r * width, src + (r + 1) * width, m.row(r) + c0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(ParamLayout& layout, const std::string& name, int in, int out, Init init, bool bias)
    : in_(in), out_(out), has_bias_(bias) {
  w_ = layout.add(name + ".weight", in, out, init, in).offset;
  if (bias) b_ = layout.add(name + ".bias", 1, out, Init::kZero).offset;
}

template <typename T>
void Linear::forward(std::span<const T> p, const T* x, int n, T* y) const {
  kernels::matmul_nn(x, p.data() + w_, has_bias_ ? p.data() + b_ : nullptr, y, n, in_, out_);
}

template <typename T>
void Linear::backward(std::span<const T> p, const T* x, const T* dy, int n, T* grads, T* dx) const {
  if (grads) {
    kernels::matmul_tn_acc(x, dy, grads + w_, n, in_, out_);
    if (has_bias_) {
      T* db = grads + b_;
      for (int i = 0; i < n; ++i) {
        const T* r = dy + static_cast<std::ptrdiff_t>(i) * out_;
        for (int j = 0; j < out_; ++j) db[j] += r[j];
      }
    }
  }
  if (dx) {
    auto& wt = scratch<T>(0);
    wt.resize(static_cast<std::size_t>(in_) * out_);
    kernels::transpose(p.data() + w_, wt.data(), in_, out_);
    kernels::matmul_nn(dy, wt.data(), static_cast<const T*>(nullptr), dx, n, out_, in_);
  }
}

// ---------------------------------------------------------------------------
// Conv3x3

Conv3x3::Conv3x3(ParamLayout& layout, const std::string& name, int in_channels, int out_channels,
                 Init init)
    : in_channels_(in_channels), linear_(layout, name, 9 * in_channels, out_channels, init) {}

template <typename T>
void Conv3x3::forward(std::span<const T> p, const T* in, int h, int w, T* out, Matrix<T>& col) const {
  col.resize(h * w, 9 * in_channels_);
  kernels::im2col3x3(in, col.data.data(), h, w, in_channels_);
  linear_.forward(p, col.data.data(), h * w, out);
}

template <typename T>
void Conv3x3::backward(std::span<const T> p, const Matrix<T>& col, const T* dout, int h, int w,
                       T* grads, T* din) const {
  if (!din) {
    linear_.backward(p, col.data.data(), dout, h * w, grads, static_cast<T*>(nullptr));
    return;
  }
  auto& dcol = scratch<T>(1);
  dcol.resize(col.size());
  linear_.backward(p, col.data.data(), dout, h * w, grads, dcol.data());
  kernels::col2im3x3(dcol.data(), din, h, w, in_channels_);
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
void relu_inplace(std::span<T> x) {
  for (T& v : x) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward_inplace(std::span<const T> activation, std::span<T> dx) {
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(activation[i] > T(0))) dx[i] = T(0);
}

// ---------------------------------------------------------------------------
// Attention

Attention::Attention(ParamLayout& layout, const std::string& name, int width, int heads)
    : width_(width), heads_(heads) {
  SVAESR_REQUIRE(heads >= 1 && width % heads == 0, "attention width must divide into heads");
  wq_ = Linear(layout, name + ".q", width, width, Init::kXavier);
  wk_ = Linear(layout, name + ".k", width, width, Init::kXavier);
  wv_ = Linear(layout, name + ".v", width, width, Init::kXavier);
  wo_ = Linear(layout, name + ".o", width, width, Init::kSmall);
}

template <typename T>
void Attention::forward(std::span<const T> p, const Matrix<T>& x, const Matrix<T>& ctx,
                        Matrix<T>& out, Cache<T>& cache) const {
  const int n = x.rows, m = ctx.rows, dh = width_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  cache.q.resize(n, width_);
  cache.k.resize(m, width_);
  cache.v.resize(m, width_);
  wq_.forward(p, x.data.data(), n, cache.q.data.data());
  wk_.forward(p, ctx.data.data(), m, cache.k.data.data());
  wv_.forward(p, ctx.data.data(), m, cache.v.data.data());
  cache.probs.resize(heads_ * n, m);
  cache.mixed.resize(n, width_);

  std::vector<T> qh(static_cast<std::size_t>(n) * dh), kh(static_cast<std::size_t>(m) * dh),
      kht(static_cast<std::size_t>(dh) * m), vh(static_cast<std::size_t>(m) * dh),
      oh(static_cast<std::size_t>(n) * dh);
  for (int h = 0; h < heads_; ++h) {
    gather_columns(cache.q, h * dh, dh, qh.data());
    gather_columns(cache.k, h * dh, dh, kh.data());
    gather_columns(cache.v, h * dh, dh, vh.data());
    kernels::transpose(kh.data(), kht.data(), m, dh);
    T* probs = cache.probs.row(h * n);
    kernels::matmul_nn(qh.data(), kht.data(), static_cast<const T*>(nullptr), probs, n, dh, m);
    for (int i = 0; i < n; ++i) {
      T* r = probs + static_cast<std::ptrdiff_t>(i) * m;
      T peak = r[0] * scale;
      for (int j = 0; j < m; ++j) peak = std::max(peak, r[j] * scale);
      T total = 0;
      for (int j = 0; j < m; ++j) {
        r[j] = std::exp(r[j] * scale - peak);
        total += r[j];
      }
      for (int j = 0; j < m; ++j) r[j] /= total;
    }
    kernels::matmul_nn(probs, vh.data(), static_cast<const T*>(nullptr), oh.data(), n, m, dh);
    scatter_columns(oh.data(), dh, cache.mixed, h * dh);
  }
  out.resize(n, width_);
  wo_.forward(p, cache.mixed.data.data(), n, out.data.data());
}

template <typename T>
void Attention::backward(std::span<const T> p, const Matrix<T>& x, const Matrix<T>& ctx,
                         const Cache<T>& cache, const Matrix<T>& dout, T* grads, Matrix<T>* dx,
                         Matrix<T>* dctx) const {
  const int n = x.rows, m = ctx.rows, dh = width_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Matrix<T> dmixed(n, width_);
  wo_.backward(p, cache.mixed.data.data(), dout.data.data(), n, grads, dmixed.data.data());

  Matrix<T> dq(n, width_), dk(m, width_), dv(m, width_);
  std::vector<T> qh(static_cast<std::size_t>(n) * dh), kh(static_cast<std::size_t>(m) * dh),
      vht(static_cast<std::size_t>(dh) * m), vh(static_cast<std::size_t>(m) * dh),
      doh(static_cast<std::size_t>(n) * dh), dprobs(static_cast<std::size_t>(n) * m),
      dqh(static_cast<std::size_t>(n) * dh), dkh(static_cast<std::size_t>(m) * dh),
      dvh(static_cast<std::size_t>(m) * dh);
  for (int h = 0; h < heads_; ++h) {
    gather_columns(cache.q, h * dh, dh, qh.data());
    gather_columns(cache.k, h * dh, dh, kh.data());
    gather_columns(cache.v, h * dh, dh, vh.data());
    gather_columns(dmixed, h * dh, dh, doh.data());
    kernels::transpose(vh.data(), vht.data(), m, dh);
    const T* probs = cache.probs.row(h * n);

    kernels::matmul_nn(doh.data(), vht.data(), static_cast<const T*>(nullptr), dprobs.data(), n, dh, m);
    std::fill(dvh.begin(), dvh.end(), T(0));
    kernels::matmul_tn_acc(probs, doh.data(), dvh.data(), n, m, dh);
    // Softmax Jacobian, folded with the 1/sqrt(dh) logit scale.
    for (int i = 0; i < n; ++i) {
      const T* pr = probs + static_cast<std::ptrdiff_t>(i) * m;
      T* dr = dprobs.data() + static_cast<std::ptrdiff_t>(i) * m;
      T dot = 0;
      for (int j = 0; j < m; ++j) dot += pr[j] * dr[j];
      for (int j = 0; j < m; ++j) dr[j] = pr[j] * (dr[j] - dot) * scale;
    }
    kernels::matmul_nn(dprobs.data(), kh.data(), static_cast<const T*>(nullptr), dqh.data(), n, m, dh);
    std::fill(dkh.begin(), dkh.end(), T(0));
    kernels::matmul_tn_acc(dprobs.data(), qh.data(), dkh.data(), n, m, dh);
    scatter_columns(dqh.data(), dh, dq, h * dh);
    scatter_columns(dkh.data(), dh, dk, h * dh);
    scatter_columns(dvh.data(), dh, dv, h * dh);
  }

  if (dx) dx->resize(n, width_);
  wq_.backward(p, x.data.data(), dq.data.data(), n, grads, dx ? dx->data.data() : nullptr);
  if (dctx) {
    dctx->resize(m, width_);
    Matrix<T> tmp(m, width_);
    wk_.backward(p, ctx.data.data(), dk.data.data(), m, grads, dctx->data.data());
    wv_.backward(p, ctx.data.data(), dv.data.data(), m, grads, tmp.data.data());
    for (std::size_t i = 0; i < tmp.size(); ++i) dctx->data[i] += tmp.data[i];
  } else {
    wk_.backward(p, ctx.data.data(), dk.data.data(), m, grads, static_cast<T*>(nullptr));
    wv_.backward(p, ctx.data.data(), dv.data.data(), m, grads, static_cast<T*>(nullptr));
  }
}

// ---------------------------------------------------------------------------
// FeedForward

FeedForward::FeedForward(ParamLayout& layout, const std::string& name, int width, int hidden) {
  up_ = Linear(layout, name + ".up", width, hidden, Init::kHe);
  down_ = Linear(layout, name + ".down", hidden, width, Init::kSmall);
}

template <typename T>
void FeedForward::forward(std::span<const T> p, const Matrix<T>& x, Matrix<T>& out,
                          Cache<T>& cache) const {
  cache.hidden.resize(x.rows, up_.out());
  up_.forward(p, x.data.data(), x.rows, cache.hidden.data.data());
  relu_inplace(std::span<T>(cache.hidden.data));
  out.resize(x.rows, down_.out());
  down_.forward(p, cache.hidden.data.data(), x.rows, out.data.data());
}

template <typename T>
void FeedForward::backward(std::span<const T> p, const Matrix<T>& x, const Cache<T>& cache,
                           const Matrix<T>& dout, T* grads, Matrix<T>* dx) const {
  Matrix<T> dhidden(x.rows, up_.out());
  down_.backward(p, cache.hidden.data.data(), dout.data.data(), x.rows, grads, dhidden.data.data());
  relu_backward_inplace(std::span<const T>(cache.hidden.data), std::span<T>(dhidden.data));
  if (dx) dx->resize(x.rows, up_.in());
  up_.backward(p, x.data.data(), dhidden.data.data(), x.rows, grads, dx ? dx->data.data() : nullptr);
}

#define SVAESR_INSTANTIATE_LAYERS(T)                                                             \
  template void Linear::forward<T>(std::span<const T>, const T*, int, T*) const;                 \
  template void Linear::backward<T>(std::span<const T>, const T*, const T*, int, T*, T*) const;  \
  template void Conv3x3::forward<T>(std::span<const T>, const T*, int, int, T*, Matrix<T>&) const; \
  template void Conv3x3::backward<T>(std::span<const T>, const Matrix<T>&, const T*, int, int, T*, \
                                     T*) const;                                                  \
  template void relu_inplace<T>(std::span<T>);                                                   \
  template void relu_backward_inplace<T>(std::span<const T>, std::span<T>);                      \
  template void Attention::forward<T>(std::span<const T>, const Matrix<T>&, const Matrix<T>&,     \
                                      Matrix<T>&, Cache<T>&) const;                              \
  template void Attention::backward<T>(std::span<const T>, const Matrix<T>&, const Matrix<T>&,    \
                                       const Cache<T>&, const Matrix<T>&, T*, Matrix<T>*,         \
                                       Matrix<T>*) const;                                        \
  template void FeedForward::forward<T>(std::span<const T>, const Matrix<T>&, Matrix<T>&,         \
                                        Cache<T>&) const;                                        \
  template void FeedForward::backward<T>(std::span<const T>, const Matrix<T>&, const Cache<T>&,   \
                                         const Matrix<T>&, T*, Matrix<T>*) const;

SVAESR_INSTANTIATE_LAYERS(float)
SVAESR_INSTANTIATE_LAYERS(double)

}  // namespace svaesr::nn
