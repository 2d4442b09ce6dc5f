#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kcs/image.hpp"
#include "kcs/manifest.hpp"
#include "kcs/nn/tensor.hpp"
#include "kcs/rng.hpp"

namespace kcs {

enum class MapKind { axial, tangential };

/// Per-channel Z-normalization statistics, in [0,1] pixel scale.
struct ChannelStats {
  std::array<double, 3> mu = {0, 0, 0};
  std::array<double, 3> sigma = {1, 1, 1};
  std::int64_t n_samples = 0;

  static constexpr double kSigmaFloor = 1e-6;
  static ChannelStats identity() { return {{0, 0, 0}, {1, 1, 1}, 0}; }
};

/// Which maps feed the stats computation and how the crop is chosen.
struct PreprocessConfig {
  int target_resolution = 512;
  bool disc_crop = true;     // false: plain centre square
  double crop_pad = 0.05;    // padding around the disc bounding square
  std::uint8_t background_threshold = 8;  // max-channel value still background
};

struct PreprocessedImage {
  nn::TensorF tensor;        // [3, res, res], Z-normalized
  bool disc_detect_failed = false;
};

/// Crop (largest connected non-background region, centred square, padded),
/// resize to the target resolution, and re-quantize to 8 bits. This is the
/// deterministic image-space part of preprocess; stats are computed on its
/// output so integer accumulation stays exact.
ImageRgb8 crop_resize(const ImageRgb8& image, const PreprocessConfig& cfg,
                      bool* disc_detect_failed = nullptr);

/// Full preprocessing: crop_resize, scale to [0,1], then (x - mu) / sigma per
/// channel. Falls back to the full-frame centre square when no disc is found
/// and flags the sample.
PreprocessedImage preprocess(const ImageRgb8& image, const ChannelStats& stats,
                             const PreprocessConfig& cfg);

/// Z-normalization alone, for tensors that are already cropped and scaled.
void normalize_inplace(nn::TensorF& tensor, const ChannelStats& stats);

/// Per-channel mean and standard deviation over all pixels of the listed
/// samples' chosen map, after crop_resize. Population sigma, floored at
/// kSigmaFloor. Accumulation is in exact integer arithmetic, so the result
/// is independent of sample order and worker count.
ChannelStats compute_channel_stats(const Manifest& manifest,
                                   const std::vector<std::string>& ids, MapKind which,
                                   const PreprocessConfig& cfg);

/// Stage-wise split assignment. Stage-1 lists come from the bench manifest,
/// stage-2 lists from the handheld manifest.
struct SplitPlan {
  std::vector<std::string> stage1_train;
  std::vector<std::string> stage1_val;
  std::vector<std::string> stage2_train;
  std::vector<std::string> stage2_test;
  std::uint64_t seed = 0;
  double stage2_fraction = 0.5;
};

/// Stratified splits: stage-1 train/val at (1 - stage1_val_fraction) :
/// stage1_val_fraction, stage-2 train = stage2_fraction of the handheld
/// samples, remainder test. Deterministic in the seed.
SplitPlan make_splits(const Manifest& bench, const Manifest& handheld, double stage2_fraction,
                      std::uint64_t seed, double stage1_val_fraction = 0.1);

/// Inverse-frequency sampling weights: weight_i = 1 / count(label_i).
std::vector<double> sampler_weights(const std::vector<Label>& labels);

/// Draws `count` indices with replacement, proportionally to `weights`.
std::vector<std::size_t> weighted_draw(const std::vector<double>& weights, std::size_t count,
                                       Rng& rng);

/// In-memory cache of crop_resized images keyed by sample id, so training
/// epochs do not re-decode PNGs. Lookups are per-sample pure; population is
/// single-writer.
class PreprocCache {
public:
  explicit PreprocCache(PreprocessConfig cfg) : cfg_(cfg) {}

  const ImageRgb8& get(const Manifest& manifest, const SampleRecord& record, MapKind which);
  /// Cached image as a [3,res,res] tensor in [0,1], then Z-normalized.
  nn::TensorF tensor(const Manifest& manifest, const SampleRecord& record, MapKind which,
                     const ChannelStats& stats);
  const PreprocessConfig& config() const { return cfg_; }
  void clear() { cache_.clear(); }

private:
  PreprocessConfig cfg_;
  std::map<std::string, ImageRgb8> cache_;
};

}  // namespace kcs
