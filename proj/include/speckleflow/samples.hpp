#pragma once

#include <vector>

#include "speckleflow/grid.hpp"

namespace speckleflow {

/// A sparse displacement measurement: the field should map position to
/// position + displacement. Pixel units; z is 0 for planar data.
struct DisplacementSample {
  Vec3 position{};
  Vec3 displacement{};

  friend bool operator==(const DisplacementSample&, const DisplacementSample&) = default;
};

using SampleList = std::vector<DisplacementSample>;

}  // namespace speckleflow
