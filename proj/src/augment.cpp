#include "pseudosup/augment.hpp"

#include <algorithm>
#include <cmath>

namespace pseudosup {

namespace {

Eigen::Index crop_extent(Eigen::Index full, double scale) {
  const auto n = static_cast<Eigen::Index>(std::llround(scale * static_cast<double>(full)));
  return std::clamp<Eigen::Index>(n, 1, full);
}

}  // namespace

AugmentParams draw_augment_params(GridDims grid, std::mt19937_64& rng, CropScaleRange scale) {
  if (grid.height < 1 || grid.width < 1) throw InvalidInput("grid dims must be positive");
  if (!(scale.min > 0 && scale.min <= scale.max && scale.max <= 1.0)) throw InvalidInput("invalid crop scale range");
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> frac(scale.min, scale.max);
  AugmentParams p;
  p.flip = coin(rng);
  p.crop_height = crop_extent(grid.height, frac(rng));
  p.crop_width = crop_extent(grid.width, frac(rng));
  p.crop_top = std::uniform_int_distribution<Eigen::Index>(0, grid.height - p.crop_height)(rng);
  p.crop_left = std::uniform_int_distribution<Eigen::Index>(0, grid.width - p.crop_width)(rng);
  return p;
}

Sample apply_augment(const Sample& sample, const AugmentParams& p) {
  if (!sample.grid) throw InvalidInput("augmentation needs grid dims on sample " + sample.id);
  const GridDims g = *sample.grid;
  if (g.size() > sample.features.size()) throw InvalidInput("grid larger than feature vector");
  if (p.crop_height < 1 || p.crop_width < 1 || p.crop_top < 0 || p.crop_left < 0 ||
      p.crop_top + p.crop_height > g.height || p.crop_left + p.crop_width > g.width)
    throw InvalidInput("crop window outside the grid");

  using GridMap = Eigen::Map<const MatrixXd>;
  const GridMap src(sample.features.data(), g.height, g.width);
  MatrixXd flipped = src;
  if (p.flip) flipped = src.rowwise().reverse();

  Sample out = sample;
  Eigen::Map<MatrixXd> dst(out.features.data(), g.height, g.width);
  for (Eigen::Index i = 0; i < g.height; ++i) {
    const Eigen::Index si = p.crop_top + (i * p.crop_height) / g.height;
    for (Eigen::Index j = 0; j < g.width; ++j) {
      const Eigen::Index sj = p.crop_left + (j * p.crop_width) / g.width;
      dst(i, j) = flipped(si, sj);
    }
  }
  return out;
}

Sample augment_weak(const Sample& sample, std::mt19937_64& rng, CropScaleRange scale) {
  if (!sample.grid) throw InvalidInput("augmentation needs grid dims on sample " + sample.id);
  return apply_augment(sample, draw_augment_params(*sample.grid, rng, scale));
}

Sample augment_weak(const Sample& sample, std::uint64_t seed, CropScaleRange scale) {
  std::mt19937_64 rng(seed);
  return augment_weak(sample, rng, scale);
}

}  // namespace pseudosup
