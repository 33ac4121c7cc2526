#pragma once

#include <random>

#include "pseudosup/data.hpp"

namespace pseudosup {

struct AugmentParams {
  bool flip = false;
  Eigen::Index crop_top = 0;
  Eigen::Index crop_left = 0;
  Eigen::Index crop_height = 0;
  Eigen::Index crop_width = 0;
};

struct CropScaleRange {
  double min = 0.8;
  double max = 1.0;
  bool operator==(const CropScaleRange&) const = default;
};

/// Draws a flip with probability 0.5 and a crop whose height and width are
/// independent uniform fractions of the grid within `scale`.
AugmentParams draw_augment_params(GridDims grid, std::mt19937_64& rng, CropScaleRange scale = {});

/// Flip horizontally (optional), crop, then nearest-neighbour resize back to the
/// original grid. Features past the grid prefix (a second modality) are untouched.
Sample apply_augment(const Sample& sample, const AugmentParams& params);

Sample augment_weak(const Sample& sample, std::mt19937_64& rng, CropScaleRange scale = {});
Sample augment_weak(const Sample& sample, std::uint64_t seed, CropScaleRange scale = {});

}  // namespace pseudosup
