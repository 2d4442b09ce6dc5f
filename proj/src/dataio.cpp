#include "kcs/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace kcs {

namespace {

struct Box {
  int x0, y0, x1, y1;  // inclusive
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
};

bool is_background(const std::uint8_t* px, std::uint8_t threshold) {
  return std::max({px[0], px[1], px[2]}) < threshold;
}

/// Bounding box of the largest 4-connected non-background component.
bool largest_component_box(const ImageRgb8& img, std::uint8_t threshold, Box* out) {
  const int w = img.width, h = img.height;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
  Box best{0, 0, -1, -1};
  std::int64_t best_area = 0;

  std::deque<std::pair<int, int>> queue;
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      const std::size_t si = static_cast<std::size_t>(sy) * w + sx;
      if (visited[si] || is_background(img.px(sx, sy), threshold)) continue;
      Box box{sx, sy, sx, sy};
      std::int64_t area = 0;
      visited[si] = 1;
      queue.emplace_back(sx, sy);
      while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        ++area;
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x);
        box.y1 = std::max(box.y1, y);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
          const std::size_t ni = static_cast<std::size_t>(ny[k]) * w + nx[k];
          if (visited[ni] || is_background(img.px(nx[k], ny[k]), threshold)) continue;
          visited[ni] = 1;
          queue.emplace_back(nx[k], ny[k]);
        }
      }
      if (area > best_area) {
        best_area = area;
        best = box;
      }
    }
  }
  if (best_area == 0) return false;
  *out = best;
  return true;
}

ImageRgb8 center_square(const ImageRgb8& img) {
  const int side = std::min(img.width, img.height);
  const int x0 = (img.width - side) / 2;
  const int y0 = (img.height - side) / 2;
  return crop(img, x0, y0, side, side);
}

}  // namespace

ImageRgb8 crop_resize(const ImageRgb8& image, const PreprocessConfig& cfg,
                      bool* disc_detect_failed) {
  if (disc_detect_failed) *disc_detect_failed = false;
  ImageRgb8 cropped;
  Box box;
  if (cfg.disc_crop && largest_component_box(image, cfg.background_threshold, &box)) {
    const double cx = 0.5 * (box.x0 + box.x1);
    const double cy = 0.5 * (box.y0 + box.y1);
    int side = static_cast<int>(
        std::lround(std::max(box.width(), box.height()) * (1.0 + 2.0 * cfg.crop_pad)));
    side = std::min(side, std::min(image.width, image.height));
    side = std::max(side, 1);
    int x0 = static_cast<int>(std::lround(cx - side / 2.0));
    int y0 = static_cast<int>(std::lround(cy - side / 2.0));
    x0 = std::min(std::max(x0, 0), image.width - side);
    y0 = std::min(std::max(y0, 0), image.height - side);
    cropped = crop(image, x0, y0, side, side);
  } else {
    if (disc_detect_failed && cfg.disc_crop) *disc_detect_failed = true;
    cropped = center_square(image);
  }
  if (cropped.width == cfg.target_resolution && cropped.height == cfg.target_resolution)
    return cropped;
  return resize_bilinear(cropped, cfg.target_resolution, cfg.target_resolution);
}

PreprocessedImage preprocess(const ImageRgb8& image, const ChannelStats& stats,
                             const PreprocessConfig& cfg) {
  PreprocessedImage out;
  const ImageRgb8 resized = crop_resize(image, cfg, &out.disc_detect_failed);
  const int res = cfg.target_resolution;
  out.tensor = nn::TensorF({3, res, res});
  const std::size_t plane = static_cast<std::size_t>(res) * res;
  for (int c = 0; c < 3; ++c) {
    const float mu = static_cast<float>(stats.mu[c]);
    const float inv_sigma = static_cast<float>(1.0 / std::max(stats.sigma[c], ChannelStats::kSigmaFloor));
    float* dst = out.tensor.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i)
      dst[i] = (resized.pixels[3 * i + c] * (1.0f / 255.0f) - mu) * inv_sigma;
  }
  return out;
}

void normalize_inplace(nn::TensorF& tensor, const ChannelStats& stats) {
  const std::size_t plane = tensor.numel() / 3;
  for (int c = 0; c < 3; ++c) {
    const float mu = static_cast<float>(stats.mu[c]);
    const float inv_sigma =
        static_cast<float>(1.0 / std::max(stats.sigma[c], ChannelStats::kSigmaFloor));
    float* p = tensor.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mu) * inv_sigma;
  }
}

ChannelStats compute_channel_stats(const Manifest& manifest, const std::vector<std::string>& ids,
                                   MapKind which, const PreprocessConfig& cfg) {
  if (ids.empty()) throw std::runtime_error("compute_channel_stats: empty sample list");

  // Exact integer sums of 8-bit values: bitwise order-independent.
  std::uint64_t sum[3] = {0, 0, 0};
  std::uint64_t sum_sq[3] = {0, 0, 0};
  std::uint64_t n_px = 0;
  for (const auto& id : ids) {
    const SampleRecord& r = manifest.by_id(id);
    const auto path = which == MapKind::axial ? manifest.axial_abs(r) : manifest.tangential_abs(r);
    const ImageRgb8 img = crop_resize(read_png(path), cfg);
    const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < plane; ++i) {
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t v = img.pixels[3 * i + c];
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    n_px += plane;
  }

  ChannelStats stats;
  stats.n_samples = static_cast<std::int64_t>(ids.size());
  for (int c = 0; c < 3; ++c) {
    const double mean255 = static_cast<double>(sum[c]) / static_cast<double>(n_px);
    const double mean_sq255 = static_cast<double>(sum_sq[c]) / static_cast<double>(n_px);
    const double var255 = std::max(mean_sq255 - mean255 * mean255, 0.0);
    stats.mu[c] = mean255 / 255.0;
    stats.sigma[c] = std::max(std::sqrt(var255) / 255.0, ChannelStats::kSigmaFloor);
  }
  return stats;
}

namespace {

/// Largest-remainder allocation of `take` picks across classes, proportional
/// to class sizes.
std::vector<int> allocate_stratified(const std::vector<int>& class_sizes, int take) {
  const int total = std::accumulate(class_sizes.begin(), class_sizes.end(), 0);
  std::vector<int> alloc(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = static_cast<double>(take) * class_sizes[c] / total;
    alloc[c] = static_cast<int>(exact);
    assigned += alloc[c];
    remainders.emplace_back(exact - alloc[c], c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < take - assigned; ++k) alloc[remainders[k % remainders.size()].second]++;
  for (std::size_t c = 0; c < class_sizes.size(); ++c)
    alloc[c] = std::min(alloc[c], class_sizes[c]);
  return alloc;
}

struct ClassIds {
  std::vector<std::string> normal;
  std::vector<std::string> keratoconus;
};

ClassIds split_by_class(const Manifest& m, const char* name) {
  ClassIds ids;
  for (const auto& r : m.records)
    (r.label == Label::normal ? ids.normal : ids.keratoconus).push_back(r.id);
  if (ids.normal.empty() || ids.keratoconus.empty())
    throw std::runtime_error(std::string("make_splits: ") + name +
                             " manifest is missing one of the classes");
  return ids;
}

/// Shuffle each class, put the first `alloc[c]` ids into `first`, rest into
/// `second`. Output order follows manifest order within each destination.
void stratified_partition(ClassIds ids, const std::vector<int>& alloc, Rng& rng,
                          std::vector<std::string>* first, std::vector<std::string>* second) {
  std::vector<std::vector<std::string>*> classes = {&ids.normal, &ids.keratoconus};
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto& pool = *classes[c];
    rng.shuffle(pool);
    for (std::size_t i = 0; i < pool.size(); ++i)
      (static_cast<int>(i) < alloc[c] ? first : second)->push_back(pool[i]);
  }
  std::sort(first->begin(), first->end());
  std::sort(second->begin(), second->end());
}

}  // namespace

SplitPlan make_splits(const Manifest& bench, const Manifest& handheld, double stage2_fraction,
                      std::uint64_t seed, double stage1_val_fraction) {
  if (stage2_fraction <= 0.0 || stage2_fraction >= 1.0)
    throw std::runtime_error("make_splits: stage2_fraction must be in (0,1)");
  if (stage1_val_fraction <= 0.0 || stage1_val_fraction >= 1.0)
    throw std::runtime_error("make_splits: stage1_val_fraction must be in (0,1)");
  if (bench.records.empty() || handheld.records.empty())
    throw std::runtime_error("make_splits: empty manifest");

  SplitPlan plan;
  plan.seed = seed;
  plan.stage2_fraction = stage2_fraction;

  {
    ClassIds ids = split_by_class(bench, "bench");
    const int n = static_cast<int>(bench.records.size());
    const int n_val = static_cast<int>(std::lround(stage1_val_fraction * n));
    const auto alloc = allocate_stratified(
        {static_cast<int>(ids.normal.size()), static_cast<int>(ids.keratoconus.size())}, n_val);
    Rng rng(derive_seed(seed, "split-stage1"));
    stratified_partition(std::move(ids), alloc, rng, &plan.stage1_val, &plan.stage1_train);
  }
  {
    ClassIds ids = split_by_class(handheld, "handheld");
    const int n = static_cast<int>(handheld.records.size());
    const int n_train = static_cast<int>(std::lround(stage2_fraction * n));
    const auto alloc = allocate_stratified(
        {static_cast<int>(ids.normal.size()), static_cast<int>(ids.keratoconus.size())}, n_train);
    Rng rng(derive_seed(seed, "split-stage2"));
    stratified_partition(std::move(ids), alloc, rng, &plan.stage2_train, &plan.stage2_test);
  }
  return plan;
}

std::vector<double> sampler_weights(const std::vector<Label>& labels) {
  if (labels.empty()) throw std::runtime_error("sampler_weights: empty label list");
  std::size_t n_normal = 0, n_kc = 0;
  for (const Label l : labels) (l == Label::normal ? n_normal : n_kc)++;
  if (n_normal == 0 || n_kc == 0)
    throw std::runtime_error("sampler_weights: both classes must be present");
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    w[i] = 1.0 / static_cast<double>(labels[i] == Label::normal ? n_normal : n_kc);
  return w;
}

std::vector<std::size_t> weighted_draw(const std::vector<double>& weights, std::size_t count,
                                       Rng& rng) {
  std::vector<double> cum(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    cum[i] = total;
  }
  std::vector<std::size_t> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = rng.uniform() * total;
    out[k] = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (out[k] >= weights.size()) out[k] = weights.size() - 1;
  }
  return out;
}

const ImageRgb8& PreprocCache::get(const Manifest& manifest, const SampleRecord& record,
                                   MapKind which) {
  // keyed by the resolved file path: ids are only unique within one manifest
  const auto path =
      which == MapKind::axial ? manifest.axial_abs(record) : manifest.tangential_abs(record);
  const std::string key = path.string();
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  ImageRgb8 img = crop_resize(read_png(path), cfg_);
  return cache_.emplace(key, std::move(img)).first->second;
}

nn::TensorF PreprocCache::tensor(const Manifest& manifest, const SampleRecord& record,
                                 MapKind which, const ChannelStats& stats) {
  const ImageRgb8& img = get(manifest, record, which);
  nn::TensorF t({3, img.height, img.width});
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < 3; ++c) {
    float* dst = t.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = img.pixels[3 * i + c] * (1.0f / 255.0f);
  }
  normalize_inplace(t, stats);
  return t;
}

}  // namespace kcs
