#include "svaesr/model/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svaesr/core/error.hpp"

namespace svaesr::model {

template <typename T>
LatentDistribution<T>::LatentDistribution(std::vector<T> m, std::vector<T> lv)
    : mean(std::move(m)), log_var(std::move(lv)) {
  SVAESR_REQUIRE(mean.size() == log_var.size(), "latent: mean and log_var sizes differ");
  for (T& v : log_var) v = std::clamp(v, T(kLogVarMin), T(kLogVarMax));
}

void EncoderConfig::validate() const {
  posenc.validate();
  SVAESR_REQUIRE(width >= 1 && heads >= 1 && width % heads == 0,
                 "encoder: width must be a positive multiple of heads");
  SVAESR_REQUIRE(self_blocks >= 0 && cross_blocks >= 0, "encoder: block counts must be >= 0");
  SVAESR_REQUIRE(ffn_mult >= 1, "encoder: ffn_mult must be positive");
  SVAESR_REQUIRE(latent_dim >= 1, "encoder: latent_dim must be positive");
  SVAESR_REQUIRE(tokens >= 1, "encoder: token budget must be positive");
}

std::vector<int> sample_indices(std::size_t available, int n, Rng& rng) {
  SVAESR_REQUIRE(n >= 0 && static_cast<std::size_t>(n) <= available,
                 "to_pixel_sampler: more tokens requested than pixels available");
  return draw_distinct(available, static_cast<std::size_t>(n), rng);
}

template <typename T>
void make_tokens(const T* rgb, std::span<const std::array<double, 2>> coords,
                 std::span<const int> indices, const posenc::PosEncConfig& pe, nn::Matrix<T>& out) {
  out.resize(static_cast<int>(indices.size()), 3 + pe.code_length());
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const int i = indices[t];
    T* row = out.row(static_cast<int>(t));
    std::copy(rgb + static_cast<std::ptrdiff_t>(i) * 3, rgb + static_cast<std::ptrdiff_t>(i) * 3 + 3,
              row);
    const T o[2] = {static_cast<T>(coords[i][0]), static_cast<T>(coords[i][1])};
    posenc::encode_into(o, 2, pe.degree, row + 3);
  }
}

template <typename T>
std::vector<T> pixel_rows(const ImageTensor& img) {
  const ImageTensor s = to_signed(to_rgb(img));
  std::vector<T> rows(s.pixels() * 3);
  for (int c = 0; c < 3; ++c) {
    const auto plane = s.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i) rows[i * 3 + c] = static_cast<T>(plane[i]);
  }
  return rows;
}

nn::Matrix<double> to_pixel_sampler(const ImageTensor& img, const CoordGrid& grid, int n, Rng& rng,
                                    const posenc::PosEncConfig& pe) {
  SVAESR_REQUIRE(grid.size() == img.pixels(), "to_pixel_sampler: grid does not match image");
  const auto idx = sample_indices(grid.size(), n, rng);
  const auto rgb = pixel_rows<double>(img);
  nn::Matrix<double> tokens;
  make_tokens<double>(rgb.data(), grid.coords, idx, pe, tokens);
  return tokens;
}

ConditionalEncoder::ConditionalEncoder(const EncoderConfig& cfg, nn::ParamLayout& layout) : cfg_(cfg) {
  cfg.validate();
  embed_y_ = nn::Linear(layout, "encoder.embed_y", cfg.token_dim(), cfg.width, nn::Init::kXavier);
  embed_r_ = nn::Linear(layout, "encoder.embed_r", cfg.token_dim(), cfg.width, nn::Init::kXavier);
  for (int b = 0; b < cfg.self_blocks + cfg.cross_blocks; ++b) {
    const std::string name =
        b < cfg.self_blocks ? "encoder.self" + std::to_string(b)
                            : "encoder.cross" + std::to_string(b - cfg.self_blocks);
    attn_.emplace_back(layout, name + ".attn", cfg.width, cfg.heads);
    ffn_.emplace_back(layout, name + ".ffn", cfg.width, cfg.ffn_mult * cfg.width);
  }
  head_ = nn::Linear(layout, "encoder.head", cfg.width, 2 * cfg.latent_dim, nn::Init::kSmall);
}

template <typename T>
LatentDistribution<T> ConditionalEncoder::forward(std::span<const T> p, const nn::Matrix<T>& y_tokens,
                                                  const nn::Matrix<T>& r_tokens,
                                                  Cache<T>* cache) const {
  SVAESR_REQUIRE(y_tokens.rows >= 1 && r_tokens.rows >= 1, "encoder: empty token sequence");
  SVAESR_REQUIRE(y_tokens.cols == cfg_.token_dim() && r_tokens.cols == cfg_.token_dim(),
                 "encoder: token width mismatch");
  Cache<T> local;
  Cache<T>& cc = cache ? *cache : local;
  const int n = y_tokens.rows, m = r_tokens.rows, width = cfg_.width;
  cc.y_tokens = y_tokens;
  cc.r_tokens = r_tokens;

  nn::Matrix<T> x(n, width);
  embed_y_.forward(p, y_tokens.data.data(), n, x.data.data());
  cc.r_embed.resize(m, width);
  embed_r_.forward(p, r_tokens.data.data(), m, cc.r_embed.data.data());

  cc.blocks.resize(attn_.size());
  for (std::size_t b = 0; b < attn_.size(); ++b) {
    Block<T>& blk = cc.blocks[b];
    blk.input = std::move(x);
    const nn::Matrix<T>& ctx = static_cast<int>(b) < cfg_.self_blocks ? blk.input : cc.r_embed;
    attn_[b].forward(p, blk.input, ctx, blk.attn, blk.attn_cache);
    blk.mid = blk.input;
    for (std::size_t i = 0; i < blk.mid.data.size(); ++i) blk.mid.data[i] += blk.attn.data[i];
    ffn_[b].forward(p, blk.mid, blk.ffn, blk.ffn_cache);
    x = blk.mid;
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += blk.ffn.data[i];
  }
  cc.out = std::move(x);

  cc.pooled.assign(width, T(0));
  for (int r = 0; r < n; ++r) {
    const T* row = cc.out.row(r);
    for (int j = 0; j < width; ++j) cc.pooled[j] += row[j];
  }
  for (T& v : cc.pooled) v /= static_cast<T>(n);

  const int dz = cfg_.latent_dim;
  std::vector<T> head(2 * dz);
  head_.forward(p, cc.pooled.data(), 1, head.data());
  cc.raw_log_var.assign(head.begin() + dz, head.end());
  return LatentDistribution<T>(std::vector<T>(head.begin(), head.begin() + dz),
                               std::vector<T>(head.begin() + dz, head.end()));
}

template <typename T>
void ConditionalEncoder::backward(std::span<const T> p, const Cache<T>& cache,
                                  std::span<const T> dmean, std::span<const T> dlog_var, T* grads,
                                  nn::Matrix<T>* dy_tokens) const {
  const int dz = cfg_.latent_dim, width = cfg_.width;
  const int n = cache.out.rows, m = cache.r_embed.rows;
  SVAESR_REQUIRE(static_cast<int>(dmean.size()) == dz && static_cast<int>(dlog_var.size()) == dz,
                 "encoder: gradient size mismatch");
  std::vector<T> dhead(2 * dz);
  for (int i = 0; i < dz; ++i) {
    dhead[i] = dmean[i];
    const T raw = cache.raw_log_var[i];
    const bool clamped = raw < T(kLogVarMin) || raw > T(kLogVarMax);
    dhead[dz + i] = clamped ? T(0) : dlog_var[i];
  }
  std::vector<T> dpooled(width);
  head_.backward(p, cache.pooled.data(), dhead.data(), 1, grads, dpooled.data());

  nn::Matrix<T> dx(n, width);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < width; ++j) dx(r, j) = dpooled[j] / static_cast<T>(n);
  nn::Matrix<T> dr(m, width);

  nn::Matrix<T> dffn_in, dq, dctx;
  for (int b = static_cast<int>(attn_.size()) - 1; b >= 0; --b) {
    const Block<T>& blk = cache.blocks[b];
    const bool self = b < cfg_.self_blocks;
    ffn_[b].backward(p, blk.mid, blk.ffn_cache, dx, grads, &dffn_in);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dffn_in.data[i];
    const nn::Matrix<T>& ctx = self ? blk.input : cache.r_embed;
    dq.resize(n, width);
    dctx.resize(ctx.rows, width);
    attn_[b].backward(p, blk.input, ctx, blk.attn_cache, dx, grads, &dq, &dctx);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dq.data[i];
    if (self) {
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dctx.data[i];
    } else {
      for (std::size_t i = 0; i < dr.data.size(); ++i) dr.data[i] += dctx.data[i];
    }
  }
  if (dy_tokens) dy_tokens->resize(n, cfg_.token_dim());
  embed_y_.backward(p, cache.y_tokens.data.data(), dx.data.data(), n, grads,
                    dy_tokens ? dy_tokens->data.data() : nullptr);
  if (grads)
    embed_r_.backward(p, cache.r_tokens.data.data(), dr.data.data(), m, grads,
                      static_cast<T*>(nullptr));
}

template <typename T>
std::vector<T> reparameterize(const LatentDistribution<T>& dist, std::span<const double> eps) {
  SVAESR_REQUIRE(static_cast<int>(eps.size()) == dist.dim(), "reparameterize: noise size mismatch");
  std::vector<T> z(dist.dim());
  for (int i = 0; i < dist.dim(); ++i)
    z[i] = dist.mean[i] + std::exp(dist.log_var[i] * T(0.5)) * static_cast<T>(eps[i]);
  return z;
}

template <typename T>
std::vector<T> reparameterize(const LatentDistribution<T>& dist, Rng& rng) {
  const auto eps = standard_normal_vector(dist.dim(), rng);
  return reparameterize(dist, std::span<const double>(eps));
}

std::vector<double> standard_normal_vector(int dim, Rng& rng) {
  SVAESR_REQUIRE(dim >= 0, "standard_normal_vector: negative dimension");
  std::vector<double> v(dim);
  for (double& x : v) x = standard_normal(rng);
  return v;
}

std::vector<double> sample_prior(int dim, Rng& rng) {
  SVAESR_REQUIRE(dim >= 1, "sample_prior: dimension must be positive");
  return standard_normal_vector(dim, rng);
}

#define SVAESR_INSTANTIATE_ENCODER(T)                                                            \
  template struct LatentDistribution<T>;                                                         \
  template void make_tokens<T>(const T*, std::span<const std::array<double, 2>>,                 \
                               std::span<const int>, const posenc::PosEncConfig&, nn::Matrix<T>&); \
  template std::vector<T> pixel_rows<T>(const ImageTensor&);                                     \
  template LatentDistribution<T> ConditionalEncoder::forward<T>(                                 \
      std::span<const T>, const nn::Matrix<T>&, const nn::Matrix<T>&, Cache<T>*) const;          \
  template void ConditionalEncoder::backward<T>(std::span<const T>, const Cache<T>&,             \
                                                std::span<const T>, std::span<const T>, T*,      \
                                                nn::Matrix<T>*) const;                           \
  template std::vector<T> reparameterize<T>(const LatentDistribution<T>&, std::span<const double>); \
  template std::vector<T> reparameterize<T>(const LatentDistribution<T>&, Rng&);

SVAESR_INSTANTIATE_ENCODER(float)
SVAESR_INSTANTIATE_ENCODER(double)

}  // namespace svaesr::model
