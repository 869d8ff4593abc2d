#include "svaesr/model/liif_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svaesr/core/error.hpp"
#include "svaesr/kernels/dense.hpp"

namespace svaesr::model {

namespace {

constexpr double kShiftEps = 1e-6;
constexpr double kAreaEps = 1e-9;

int nearest_index(double c, int length) {
  const int idx = static_cast<int>(std::floor((c + 1.0) * 0.5 * length));
  return std::clamp(idx, 0, length - 1);
}

template <typename T>
void bilinear_base(const std::vector<T>& base, int h, int w, double y, double x, T* rgb) {
  const double py = std::clamp(((y + 1.0) * h - 1.0) * 0.5, 0.0, static_cast<double>(h - 1));
  const double px = std::clamp(((x + 1.0) * w - 1.0) * 0.5, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(py), x0 = static_cast<int>(px);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const T fy = static_cast<T>(py - y0), fx = static_cast<T>(px - x0);
  const auto at = [&](int yy, int xx, int c) {
    return base[(static_cast<std::size_t>(yy) * w + xx) * 3 + c];
  };
  for (int c = 0; c < 3; ++c) {
    const T top = (T(1) - fx) * at(y0, x0, c) + fx * at(y0, x1, c);
    const T bottom = (T(1) - fx) * at(y1, x0, c) + fx * at(y1, x1, c);
    rgb[c] = (T(1) - fy) * top + fy * bottom;
  }
}

}  // namespace

void DecoderConfig::validate() const {
  posenc.validate();
  SVAESR_REQUIRE(posenc.input_dim == 2, "decoder: positional encoding must be two-dimensional");
  SVAESR_REQUIRE(features >= 1, "decoder: feature channels must be positive");
  SVAESR_REQUIRE(mlp_width >= 1 && mlp_depth >= 2, "decoder: render MLP needs at least two hidden layers");
  SVAESR_REQUIRE(hf_dim >= 0 && latent_dim >= 1, "decoder: invalid latent/HF sizes");
}

LiifDecoder::LiifDecoder(const DecoderConfig& cfg, nn::ParamLayout& layout) : cfg_(cfg) {
  cfg.validate();
  const int fan_in = code_dim() + rest_dim();
  code_w_ = layout.add("decoder.stage1.code", code_dim(), cfg.mlp_width, nn::Init::kHe, fan_in).offset;
  stage1_rest_ = nn::Linear(layout, "decoder.stage1.rest", rest_dim(), cfg.mlp_width);
  const int stage2_in = cfg.mlp_width + cfg.posenc.band_length() + cfg.hf_dim;
  for (int i = 1; i < cfg.mlp_depth; ++i)
    hidden_.emplace_back(layout, "decoder.hidden" + std::to_string(i),
                         i == 1 ? stage2_in : cfg.mlp_width, cfg.mlp_width);
  out_ = nn::Linear(layout, "decoder.out", cfg.mlp_width, 3, nn::Init::kSmall);
  if (cfg.hf_dim > 0)
    latent_proj_ = nn::Linear(layout, "decoder.latent_proj", cfg.latent_dim, cfg.hf_dim,
                              nn::Init::kSmall);
}

int LiifDecoder::rest_dim() const {
  return 2 + cfg_.posenc.band_length() + (cfg_.cell_decode ? 2 : 0);
}

std::vector<LiifDecoder::Neighbour> LiifDecoder::neighbours(int h, int w,
                                                            std::array<double, 2> coord) const {
  std::vector<Neighbour> out;
  const double rx = 1.0 / h, ry = 1.0 / w;
  const int steps = cfg_.local_ensemble ? 2 : 1;
  for (int a = 0; a < steps; ++a) {
    for (int b = 0; b < steps; ++b) {
      double sy = coord[0], sx = coord[1];
      if (cfg_.local_ensemble) {
        sy += (a == 0 ? -rx : rx) + kShiftEps;
        sx += (b == 0 ? -ry : ry) + kShiftEps;
      }
      sy = std::clamp(sy, -1.0 + kShiftEps, 1.0 - kShiftEps);
      sx = std::clamp(sx, -1.0 + kShiftEps, 1.0 - kShiftEps);
      Neighbour nb;
      nb.row = nearest_index(sy, h);
      nb.col = nearest_index(sx, w);
      nb.rel[0] = (coord[0] - pixel_center(nb.row, h)) * h;
      nb.rel[1] = (coord[1] - pixel_center(nb.col, w)) * w;
      out.push_back(nb);
    }
  }
  if (!cfg_.local_ensemble) {
    out[0].weight = 1.0;
    return out;
  }
  double area[4], total = 0.0;
  for (int s = 0; s < 4; ++s) {
    area[s] = std::abs(out[s].rel[0] * out[s].rel[1]) + kAreaEps;
    total += area[s];
  }
  for (int s = 0; s < 4; ++s) out[s].weight = area[3 - s] / total;
  return out;
}

template <typename T>
void LiifDecoder::prepare(std::span<const T> p, const FeatureMap<T>& feat, Prepared<T>& out,
                          bool keep_for_backward) const {
  SVAESR_REQUIRE(feat.channels == cfg_.features, "decoder: feature channel mismatch");
  out.feat = &feat;
  const int positions = static_cast<int>(feat.positions());
  const int cd = code_dim(), width = cfg_.mlp_width;
  out.projection.resize(positions, width);
  const auto unfold_rows = [&](int y0, int y1, T* dst) {
    if (cfg_.unfold) {
      // im2col over the full map, restricted to rows [y0, y1).
      for (int y = y0; y < y1; ++y)
        for (int x = 0; x < feat.width; ++x) {
          T* row = dst + (static_cast<std::ptrdiff_t>(y - y0) * feat.width + x) * cd;
          for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx, row += feat.channels) {
              const int sy = y + ky, sx = x + kx;
              if (sy < 0 || sy >= feat.height || sx < 0 || sx >= feat.width) {
                std::fill(row, row + feat.channels, T(0));
              } else {
                const T* src = feat.codes.data() +
                               (static_cast<std::size_t>(sy) * feat.width + sx) * feat.channels;
                std::copy(src, src + feat.channels, row);
              }
            }
        }
    } else {
      std::copy(feat.codes.data() + static_cast<std::size_t>(y0) * feat.width * cd,
                feat.codes.data() + static_cast<std::size_t>(y1) * feat.width * cd, dst);
    }
  };
  if (keep_for_backward) {
    out.unfolded.resize(positions, cd);
    unfold_rows(0, feat.height, out.unfolded.data.data());
    kernels::matmul_nn(out.unfolded.data.data(), p.data() + code_w_, static_cast<const T*>(nullptr),
                       out.projection.data.data(), positions, cd, width);
    return;
  }
  out.unfolded = nn::Matrix<T>();
  const int band_rows = std::max(1, 8192 / std::max(1, feat.width));
#pragma omp parallel for schedule(dynamic)
  for (int y0 = 0; y0 < feat.height; y0 += band_rows) {
    const int y1 = std::min(feat.height, y0 + band_rows);
    std::vector<T> block(static_cast<std::size_t>(y1 - y0) * feat.width * cd);
    unfold_rows(y0, y1, block.data());
    kernels::matmul_nn(block.data(), p.data() + code_w_, static_cast<const T*>(nullptr),
                       out.projection.row(y0 * feat.width), (y1 - y0) * feat.width, cd, width);
  }
}

template <typename T>
void LiifDecoder::prepare_backward(std::span<const T> p, const Prepared<T>& prep,
                                   const nn::Matrix<T>& dprojection, T* grads,
                                   std::vector<T>* dcodes) const {
  SVAESR_REQUIRE(prep.unfolded.rows == dprojection.rows,
                 "decoder: prepare() was not run with keep_for_backward");
  const int positions = dprojection.rows, cd = code_dim(), width = cfg_.mlp_width;
  if (grads)
    kernels::matmul_tn_acc(prep.unfolded.data.data(), dprojection.data.data(), grads + code_w_,
                           positions, cd, width);
  if (!dcodes) return;
  std::vector<T> wt(static_cast<std::size_t>(cd) * width);
  kernels::transpose(p.data() + code_w_, wt.data(), cd, width);
  std::vector<T> dunfolded(static_cast<std::size_t>(positions) * cd);
  kernels::matmul_nn(dprojection.data.data(), wt.data(), static_cast<const T*>(nullptr),
                     dunfolded.data(), positions, width, cd);
  const FeatureMap<T>& feat = *prep.feat;
  dcodes->assign(feat.codes.size(), T(0));
  if (cfg_.unfold)
    kernels::col2im3x3(dunfolded.data(), dcodes->data(), feat.height, feat.width, feat.channels);
  else
    std::copy(dunfolded.begin(), dunfolded.end(), dcodes->begin());
}

template <typename T>
void LiifDecoder::query(std::span<const T> p, const Prepared<T>& prep, const CoordGrid& grid,
                        std::size_t begin, std::size_t count, const T* hf, int hf_stride, T* out,
                        QueryCache<T>* cache) const {
  SVAESR_REQUIRE(begin + count <= grid.size(), "decoder: query range outside grid");
  QueryCache<T> local;
  QueryCache<T>& cc = cache ? *cache : local;
  const FeatureMap<T>& feat = *prep.feat;
  const int shifts_n = shifts();
  const int rows = static_cast<int>(count) * shifts_n;
  const int width = cfg_.mlp_width, band = cfg_.posenc.band_length(), degree = cfg_.posenc.degree;
  const int rd = rest_dim(), s2 = width + band + cfg_.hf_dim;
  cc.queries = static_cast<int>(count);
  cc.shifts = shifts_n;
  cc.hf_stride = hf_stride;
  cc.code.resize(rows);
  cc.weight.resize(rows);
  cc.rest.resize(rows, rd);
  cc.stage2_in.resize(rows, s2);
  if (count == 0) return;

  for (std::size_t q = 0; q < count; ++q) {
    const auto nbs = neighbours(feat.height, feat.width, grid.coords[begin + q]);
    const auto& cell = grid.cells[begin + q];
    for (int s = 0; s < shifts_n; ++s) {
      const int r = static_cast<int>(q) * shifts_n + s;
      const auto& nb = nbs[s];
      cc.code[r] = nb.row * feat.width + nb.col;
      cc.weight[r] = static_cast<T>(nb.weight);
      T* rest = cc.rest.row(r);
      rest[0] = static_cast<T>(nb.rel[0]);
      rest[1] = static_cast<T>(nb.rel[1]);
      const T half[2] = {static_cast<T>(std::clamp(nb.rel[0] * 0.5, -1.0, 1.0)),
                         static_cast<T>(std::clamp(nb.rel[1] * 0.5, -1.0, 1.0))};
      posenc::encode_split_into(half, 2, degree, rest + 2, cc.stage2_in.row(r) + width);
      if (cfg_.cell_decode) {
        rest[2 + band] = static_cast<T>(cell[0] * feat.height);
        rest[3 + band] = static_cast<T>(cell[1] * feat.width);
      }
      T* hf_dst = cc.stage2_in.row(r) + width + band;
      if (hf)
        std::copy(hf + q * hf_stride, hf + q * hf_stride + cfg_.hf_dim, hf_dst);
      else
        std::fill(hf_dst, hf_dst + cfg_.hf_dim, T(0));
    }
  }

  cc.acts.resize(hidden_.size() + 1);
  nn::Matrix<T>& a0 = cc.acts[0];
  a0.resize(rows, width);
  stage1_rest_.forward(p, cc.rest.data.data(), rows, a0.data.data());
  for (int r = 0; r < rows; ++r) {
    T* dst = a0.row(r);
    const T* proj = prep.projection.row(cc.code[r]);
    for (int j = 0; j < width; ++j) {
      const T v = dst[j] + proj[j];
      dst[j] = v > T(0) ? v : T(0);
    }
    std::copy(dst, dst + width, cc.stage2_in.row(r));
  }
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    const nn::Matrix<T>& in = i == 0 ? cc.stage2_in : cc.acts[i];
    nn::Matrix<T>& act = cc.acts[i + 1];
    act.resize(rows, width);
    hidden_[i].forward(p, in.data.data(), rows, act.data.data());
    nn::relu_inplace(std::span<T>(act.data));
  }
  cc.pred.resize(rows, 3);
  out_.forward(p, cc.acts.back().data.data(), rows, cc.pred.data.data());

  for (std::size_t q = 0; q < count; ++q) {
    T rgb[3] = {T(0), T(0), T(0)};
    for (int s = 0; s < shifts_n; ++s) {
      const int r = static_cast<int>(q) * shifts_n + s;
      for (int c = 0; c < 3; ++c) rgb[c] += cc.weight[r] * cc.pred(r, c);
    }
    if (cfg_.base_skip) {
      T base[3];
      const auto& coord = grid.coords[begin + q];
      bilinear_base(feat.base, feat.height, feat.width, coord[0], coord[1], base);
      for (int c = 0; c < 3; ++c) rgb[c] += base[c];
    }
    std::copy(rgb, rgb + 3, out + q * 3);
  }
}

template <typename T>
void LiifDecoder::query_backward(std::span<const T> p, const Prepared<T>& prep,
                                 const QueryCache<T>& cache, const T* dout, T* grads,
                                 nn::Matrix<T>* dprojection, T* dhf) const {
  (void)prep;
  const int shifts_n = cache.shifts;
  const int rows = cache.queries * shifts_n;
  if (rows == 0) return;
  const int width = cfg_.mlp_width, band = cfg_.posenc.band_length();

  nn::Matrix<T> dpred(rows, 3);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < 3; ++c) dpred(r, c) = cache.weight[r] * dout[(r / shifts_n) * 3 + c];

  nn::Matrix<T> dact(rows, width);
  out_.backward(p, cache.acts.back().data.data(), dpred.data.data(), rows, grads, dact.data.data());
  nn::Matrix<T> dstage2;
  for (int i = static_cast<int>(hidden_.size()) - 1; i >= 0; --i) {
    nn::relu_backward_inplace(std::span<const T>(cache.acts[i + 1].data), std::span<T>(dact.data));
    const nn::Matrix<T>& in = i == 0 ? cache.stage2_in : cache.acts[i];
    if (i == 0) {
      dstage2.resize(rows, in.cols);
      hidden_[i].backward(p, in.data.data(), dact.data.data(), rows, grads, dstage2.data.data());
    } else {
      nn::Matrix<T> dprev(rows, width);
      hidden_[i].backward(p, in.data.data(), dact.data.data(), rows, grads, dprev.data.data());
      dact = std::move(dprev);
    }
  }

  nn::Matrix<T> dh1(rows, width);
  for (int r = 0; r < rows; ++r) {
    const T* act = cache.acts[0].row(r);
    const T* src = dstage2.row(r);
    T* dst = dh1.row(r);
    for (int j = 0; j < width; ++j) dst[j] = act[j] > T(0) ? src[j] : T(0);
  }
  stage1_rest_.backward(p, cache.rest.data.data(), dh1.data.data(), rows, grads,
                        static_cast<T*>(nullptr));
  if (dprojection) {
    for (int r = 0; r < rows; ++r) {
      T* dst = dprojection->row(cache.code[r]);
      const T* src = dh1.row(r);
      for (int j = 0; j < width; ++j) dst[j] += src[j];
    }
  }
  if (dhf && cfg_.hf_dim > 0) {
    for (int r = 0; r < rows; ++r) {
      const T* src = dstage2.row(r) + width + band;
      T* dst = dhf + static_cast<std::ptrdiff_t>(r / shifts_n) * cache.hf_stride;
      for (int j = 0; j < cfg_.hf_dim; ++j) dst[j] += src[j];
    }
  }
}

template <typename T>
void LiifDecoder::project_latent(std::span<const T> p, const T* z, T* hf) const {
  if (cfg_.hf_dim > 0) latent_proj_.forward(p, z, 1, hf);
}

template <typename T>
void LiifDecoder::project_latent_backward(std::span<const T> p, const T* z, const T* dhf, T* grads,
                                          T* dz) const {
  if (cfg_.hf_dim > 0) {
    latent_proj_.backward(p, z, dhf, 1, grads, dz);
  } else if (dz) {
    std::fill(dz, dz + cfg_.latent_dim, T(0));
  }
}

template <typename T>
nn::Matrix<T> query_rgb(const LiifDecoder& decoder, std::span<const T> params,
                        const FeatureMap<T>& feat, const CoordGrid& grid, const nn::Matrix<T>* hf) {
  const int hf_dim = decoder.config().hf_dim;
  if (hf)
    SVAESR_REQUIRE(static_cast<std::size_t>(hf->rows) == grid.size() && hf->cols == hf_dim,
                   "query_rgb: hf signal must have one row per query");
  nn::Matrix<T> out(static_cast<int>(grid.size()), 3);
  if (grid.empty()) return out;
  typename LiifDecoder::Prepared<T> prep;
  decoder.prepare(params, feat, prep, false);
  decoder.query(params, prep, grid, 0, grid.size(), hf ? hf->data.data() : nullptr, hf_dim,
                out.data.data(), static_cast<typename LiifDecoder::QueryCache<T>*>(nullptr));
  return out;
}

ImageTensor super_resolve(const FeatureExtractor& extractor, const LiifDecoder& decoder,
                          std::span<const float> params, const ImageTensor& lr, double scale,
                          const std::optional<std::vector<float>>& z, int chunk) {
  SVAESR_REQUIRE(scale > 0.0 && std::isfinite(scale), "super_resolve: scale must be positive");
  const long out_h = std::lround(lr.height() * scale);
  const long out_w = std::lround(lr.width() * scale);
  SVAESR_REQUIRE(out_h >= 1 && out_w >= 1, "super_resolve: degenerate output size");
  return super_resolve_to(extractor, decoder, params, lr, static_cast<int>(out_h),
                          static_cast<int>(out_w), z, chunk);
}

ImageTensor super_resolve_to(const FeatureExtractor& extractor, const LiifDecoder& decoder,
                             std::span<const float> params, const ImageTensor& lr, int out_h,
                             int out_w, const std::optional<std::vector<float>>& z, int chunk) {
  SVAESR_REQUIRE(chunk > 0, "super_resolve: chunk must be positive");
  SVAESR_REQUIRE(out_h >= 1 && out_w >= 1, "super_resolve: degenerate output size");
  const auto feat = extractor.forward<float>(params, to_rgb(lr), nullptr);
  LiifDecoder::Prepared<float> prep;
  decoder.prepare(params, feat, prep, false);

  std::vector<float> hf;
  if (z) {
    SVAESR_REQUIRE(static_cast<int>(z->size()) == decoder.config().latent_dim,
                   "super_resolve: latent dimension mismatch");
    hf.resize(decoder.config().hf_dim);
    decoder.project_latent(params, z->data(), hf.data());
  }
  const CoordGrid grid = make_coord_grid(out_h, out_w);
  std::vector<float> rgb(grid.size() * 3);
  const long chunks = static_cast<long>((grid.size() + chunk - 1) / chunk);
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < chunks; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk;
    const std::size_t count = std::min<std::size_t>(chunk, grid.size() - begin);
    LiifDecoder::QueryCache<float> cache;
    decoder.query(params, prep, grid, begin, count, z ? hf.data() : nullptr, 0,
                  rgb.data() + begin * 3, &cache);
  }
  ImageTensor out(3, out_h, out_w, ValueRange::kUnit);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int c = 0; c < 3; ++c) out.plane(c)[i] = (rgb[i * 3 + c] + 1.0f) * 0.5f;
  out.clamp_to_range();
  return out;
}

#define SVAESR_INSTANTIATE_DECODER(T)                                                            \
  template void LiifDecoder::prepare<T>(std::span<const T>, const FeatureMap<T>&, Prepared<T>&,   \
                                        bool) const;                                             \
  template void LiifDecoder::prepare_backward<T>(std::span<const T>, const Prepared<T>&,          \
                                                 const nn::Matrix<T>&, T*, std::vector<T>*) const; \
  template void LiifDecoder::query<T>(std::span<const T>, const Prepared<T>&, const CoordGrid&,   \
                                      std::size_t, std::size_t, const T*, int, T*,               \
                                      QueryCache<T>*) const;                                     \
  template void LiifDecoder::query_backward<T>(std::span<const T>, const Prepared<T>&,            \
                                               const QueryCache<T>&, const T*, T*,               \
                                               nn::Matrix<T>*, T*) const;                        \
  template void LiifDecoder::project_latent<T>(std::span<const T>, const T*, T*) const;          \
  template void LiifDecoder::project_latent_backward<T>(std::span<const T>, const T*, const T*,  \
                                                        T*, T*) const;                           \
  template nn::Matrix<T> query_rgb<T>(const LiifDecoder&, std::span<const T>, const FeatureMap<T>&, \
                                      const CoordGrid&, const nn::Matrix<T>*);

SVAESR_INSTANTIATE_DECODER(float)
SVAESR_INSTANTIATE_DECODER(double)

}  // namespace svaesr::model
