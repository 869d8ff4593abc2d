#pragma once

#include <span>
#include <string>

#include "svaesr/nn/matrix.hpp"
#include "svaesr/nn/params.hpp"

// Layers are immutable descriptors holding offsets into a ParamLayout. The
// parameter and gradient vectors are passed in on every call, so one layer
// object serves float training, double gradient checks and concurrent
// inference alike. Gradients are always accumulated, never overwritten.
namespace svaesr::nn {

/// y = x W + b with W stored in x f y (in x out) order.
class Linear {
 public:
  Linear() = default;
  Linear(ParamLayout& layout, const std::string& name, int in, int out, Init init = Init::kHe,
         bool bias = true);

  int in() const { return in_; }
  int out() const { return out_; }
  std::size_t weight_offset() const { return w_; }

  template <typename T>
  void forward(std::span<const T> p, const T* x, int n, T* y) const;

  /// dx (n x in) is overwritten when non-null; grads accumulates when non-null.
  template <typename T>
  void backward(std::span<const T> p, const T* x, const T* dy, int n, T* grads, T* dx) const;

 private:
  int in_ = 0;
  int out_ = 0;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
  bool has_bias_ = false;
};

/// Same-padded 3x3 convolution over HWC tensors.
class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(ParamLayout& layout, const std::string& name, int in_channels, int out_channels,
          Init init = Init::kHe);

  int in_channels() const { return in_channels_; }
  int out_channels() const { return linear_.out(); }

  /// col receives the (h*w) x (9*in) patch matrix needed by backward.
  template <typename T>
  void forward(std::span<const T> p, const T* in, int h, int w, T* out, Matrix<T>& col) const;

  template <typename T>
  void backward(std::span<const T> p, const Matrix<T>& col, const T* dout, int h, int w, T* grads,
                T* din) const;

 private:
  int in_channels_ = 0;
  Linear linear_;
};

template <typename T>
void relu_inplace(std::span<T> x);

/// dx *= (activation > 0).
template <typename T>
void relu_backward_inplace(std::span<const T> activation, std::span<T> dx);

/// Multi-head scaled dot-product attention: queries from x, keys and values from ctx.
class Attention {
 public:
  template <typename T>
  struct Cache {
    Matrix<T> q, k, v;
    Matrix<T> probs;  // (heads * n) x m
    Matrix<T> mixed;  // n x width, concatenated heads before the output projection
  };

  Attention() = default;
  Attention(ParamLayout& layout, const std::string& name, int width, int heads);

  int width() const { return width_; }
  int heads() const { return heads_; }

  template <typename T>
  void forward(std::span<const T> p, const Matrix<T>& x, const Matrix<T>& ctx, Matrix<T>& out,
               Cache<T>& cache) const;

  /// dx and dctx are overwritten when non-null.
  template <typename T>
  void backward(std::span<const T> p, const Matrix<T>& x, const Matrix<T>& ctx,
                const Cache<T>& cache, const Matrix<T>& dout, T* grads, Matrix<T>* dx,
                Matrix<T>* dctx) const;

 private:
  int width_ = 0;
  int heads_ = 0;
  Linear wq_, wk_, wv_, wo_;
};

/// Two-layer ReLU perceptron used inside attention blocks.
class FeedForward {
 public:
  template <typename T>
  struct Cache {
    Matrix<T> hidden;
  };

  FeedForward() = default;
  FeedForward(ParamLayout& layout, const std::string& name, int width, int hidden);

  template <typename T>
  void forward(std::span<const T> p, const Matrix<T>& x, Matrix<T>& out, Cache<T>& cache) const;

  template <typename T>
  void backward(std::span<const T> p, const Matrix<T>& x, const Cache<T>& cache,
                const Matrix<T>& dout, T* grads, Matrix<T>* dx) const;

 private:
  Linear up_, down_;
};

}  // namespace svaesr::nn
