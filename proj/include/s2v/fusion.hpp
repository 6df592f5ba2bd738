#pragma once

#include <cstddef>
#include <vector>

#include "s2v/imaging.hpp"

namespace s2v {

/// Dense feature grid with 1-3 spatial extents and `channels` values per cell.
/// Values are row-major over (extents..., channel); the channel index is fastest.
struct FeatureGrid {
  std::vector<int> shape;
  int channels = 1;
  std::vector<double> values;

  FeatureGrid() = default;
  FeatureGrid(std::vector<int> shape, int channels);

  std::size_t cell_count() const;
  bool empty() const { return values.empty(); }
  bool finite() const;
};

/// Outer-product fusion of a 2D-indexed grid with a 1D-indexed grid:
/// merged(i, j, k) = f3d(i, j) * f2d(k). Channels are flattened into the
/// enumerated index (j' = j * C3 + c, k' = k * C2 + c), so the result is a
/// single-channel grid of shape (I, J * C3, K * C2).
/// Inputs with more extents are flattened row-major first: f3d keeps its first
/// extent as i and folds the rest into j; f2d folds everything into k.
FeatureGrid outer_fuse(const FeatureGrid& f3d, const FeatureGrid& f2d);

/// Two channels per pool-sized block: mean intensity and mean gradient
/// magnitude (per mm), both over masked samples only. Empty blocks are 0.
FeatureGrid handcrafted_features(const Image2D& img, int pool);
FeatureGrid handcrafted_features(const Volume3D& v, int pool);

}  // namespace s2v
