#pragma once

#include <span>
#include <vector>

namespace svaesr::posenc {

/// Sinusoidal encoding settings. degree is the number of frequency octaves;
/// it must be even and >= 2 so the low/high split is balanced. degree 0 is
/// accepted only for ablation runs and yields empty codes.
struct PosEncConfig {
  int degree = 10;
  int input_dim = 2;
  bool ablation = false;

  void validate() const;
  int code_length() const { return 2 * degree * input_dim; }
  int band_length() const { return degree * input_dim; }
};

/// For every component of o and octave k in [0, degree): sin(2^k pi o), cos(2^k pi o).
/// Component-major, octave-minor, sin before cos. Components must lie in [-1, 1].
std::vector<double> encode(std::span<const double> o, const PosEncConfig& cfg);

/// Unchecked encode into a caller buffer of code_length(); o is assumed in range.
template <typename T>
void encode_into(const T* o, int input_dim, int degree, T* out);

/// Jacobian of encode, row-major code_length() x input_dim.
std::vector<double> encode_jacobian(std::span<const double> o, const PosEncConfig& cfg);

struct Bands {
  std::vector<double> lfc;
  std::vector<double> hfc;
};

/// Low-frequency code: octaves [0, degree/2) of each component; high: the rest.
Bands split_bands(std::span<const double> code, const PosEncConfig& cfg);

/// Position in the full code of entry i of the low (high) band.
int lfc_source_index(int i, const PosEncConfig& cfg);
int hfc_source_index(int i, const PosEncConfig& cfg);

/// Encodes o and writes the two bands straight into lfc and hfc (each band_length()).
template <typename T>
void encode_split_into(const T* o, int input_dim, int degree, T* lfc, T* hfc);

}  // namespace svaesr::posenc
