#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mouthtrace/image.hpp"

namespace mouthtrace::corruptions {

enum class Kind { saturation, contrast, block, noise, blur, pixelation, compression };

inline constexpr int kSeverities = 5;
inline constexpr std::array<Kind, 7> kAllKinds{Kind::saturation, Kind::contrast,   Kind::block,      Kind::noise,
                                               Kind::blur,       Kind::pixelation, Kind::compression};

Kind parse_kind(const std::string& name);
const char* kind_name(Kind kind);

struct CorruptionSpec {
  Kind kind = Kind::saturation;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;
  /// Compression through an external H.264 encoder instead of the built-in
  /// block-DCT codec. Not available in this build; requesting it throws.
  bool external_encoder = false;

  void validate() const;
};

/// Severity schedule value: saturation factor, contrast factor, block count,
/// noise sigma (fraction of full scale), blur sigma, pixelation factor or
/// codec quality.
double severity_parameter(Kind kind, int severity);

/// Corrupts a video of 8-bit RGB frames. Deterministic in (frames, spec).
/// Block positions and noise draws come from the seed alone, shared by all
/// severities, so a higher severity adds to the same occluders and scales
/// the same noise field.
std::vector<Image> apply_corruption(const std::vector<Image>& frames, const CorruptionSpec& spec);

/// Process-wide switch; while disabled apply_corruption throws
/// std::logic_error. Tests turn it off around training.
void set_corruptions_enabled(bool enabled);
bool corruptions_enabled();

/// Normalized 1-D Gaussian of size 2 ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// Built-in intra-frame codec: JFIF YCbCr, 8x8 DCT, IJG-scaled standard
/// quantization tables, no chroma subsampling.
Image dct_codec(const Image& frame, int quality);

/// 10 log10(255^2 / MSE) over all samples; +inf for identical inputs.
double psnr(const Image& a, const Image& b);
double psnr(const std::vector<Image>& a, const std::vector<Image>& b);
/// Mean of per-frame PSNR values.
double mean_frame_psnr(const std::vector<Image>& a, const std::vector<Image>& b);

}  // namespace mouthtrace::corruptions
