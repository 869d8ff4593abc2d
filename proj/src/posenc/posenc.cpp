#include "svaesr/posenc/posenc.hpp"

#include <cmath>
#include <numbers>

#include "svaesr/core/error.hpp"

namespace svaesr::posenc {

void PosEncConfig::validate() const {
  SVAESR_REQUIRE(input_dim >= 1, "posenc: input_dim must be positive");
  if (degree == 0) {
    SVAESR_REQUIRE(ablation, "posenc: degree 0 is only allowed in ablation mode");
    return;
  }
  SVAESR_REQUIRE(degree >= 2 && degree % 2 == 0, "posenc: degree must be even and at least 2");
}

template <typename T>
void encode_into(const T* o, int input_dim, int degree, T* out) {
  for (int d = 0; d < input_dim; ++d) {
    T freq = std::numbers::pi_v<T>;
    for (int k = 0; k < degree; ++k, freq *= T(2)) {
      const T arg = freq * o[d];
      *out++ = std::sin(arg);
      *out++ = std::cos(arg);
    }
  }
}

template <typename T>
void encode_split_into(const T* o, int input_dim, int degree, T* lfc, T* hfc) {
  const int half = degree / 2;
  for (int d = 0; d < input_dim; ++d) {
    T freq = std::numbers::pi_v<T>;
    for (int k = 0; k < degree; ++k, freq *= T(2)) {
      const T arg = freq * o[d];
      T*& dst = k < half ? lfc : hfc;
      *dst++ = std::sin(arg);
      *dst++ = std::cos(arg);
    }
  }
}

std::vector<double> encode(std::span<const double> o, const PosEncConfig& cfg) {
  cfg.validate();
  SVAESR_REQUIRE(static_cast<int>(o.size()) == cfg.input_dim, "posenc: input length mismatch");
  for (double v : o)
    SVAESR_REQUIRE(v >= -1.0 && v <= 1.0, "posenc: components must lie in [-1, 1]");
  std::vector<double> out(cfg.code_length());
  encode_into(o.data(), cfg.input_dim, cfg.degree, out.data());
  return out;
}

std::vector<double> encode_jacobian(std::span<const double> o, const PosEncConfig& cfg) {
  cfg.validate();
  SVAESR_REQUIRE(static_cast<int>(o.size()) == cfg.input_dim, "posenc: input length mismatch");
  std::vector<double> jac(static_cast<std::size_t>(cfg.code_length()) * cfg.input_dim, 0.0);
  int row = 0;
  for (int d = 0; d < cfg.input_dim; ++d) {
    double freq = std::numbers::pi;
    for (int k = 0; k < cfg.degree; ++k, freq *= 2.0) {
      jac[static_cast<std::size_t>(row++) * cfg.input_dim + d] = freq * std::cos(freq * o[d]);
      jac[static_cast<std::size_t>(row++) * cfg.input_dim + d] = -freq * std::sin(freq * o[d]);
    }
  }
  return jac;
}

int lfc_source_index(int i, const PosEncConfig& cfg) {
  const int per_comp = cfg.degree;  // half the octaves, two entries each
  return (i / per_comp) * 2 * cfg.degree + i % per_comp;
}

int hfc_source_index(int i, const PosEncConfig& cfg) {
  const int per_comp = cfg.degree;
  return (i / per_comp) * 2 * cfg.degree + cfg.degree + i % per_comp;
}

Bands split_bands(std::span<const double> code, const PosEncConfig& cfg) {
  cfg.validate();
  SVAESR_REQUIRE(static_cast<int>(code.size()) == cfg.code_length(),
                 "posenc: code length does not match configuration");
  Bands bands;
  bands.lfc.resize(cfg.band_length());
  bands.hfc.resize(cfg.band_length());
  for (int i = 0; i < cfg.band_length(); ++i) {
    bands.lfc[i] = code[lfc_source_index(i, cfg)];
    bands.hfc[i] = code[hfc_source_index(i, cfg)];
  }
  return bands;
}

template void encode_into<float>(const float*, int, int, float*);
template void encode_into<double>(const double*, int, int, double*);
template void encode_split_into<float>(const float*, int, int, float*, float*);
template void encode_split_into<double>(const double*, int, int, double*, double*);

}  // namespace svaesr::posenc
