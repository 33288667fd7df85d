#pragma once

#include <array>
#include <vector>

#include "mastoid/volume.hpp"

// Linear operators behind the multi-scale similarity, each paired with its
// exact adjoint for back-propagation.
namespace mastoid::kernels {

using Taps = std::array<std::vector<double>, 3>;

// Separable correlation over the fully in-bounds ("valid") region:
// output extent along each axis is n - len + 1.
Field3 correlate_valid(const Field3& in, const Taps& taps);
Field3 correlate_valid_adjoint(const Field3& grad_out, const Taps& taps, Dims in_dims);

// Mean pooling by 2 along every axis of extent >= 2 (extent-1 axes pass
// through). Trailing odd slices are dropped.
Dims pooled_dims(Dims d);
Field3 pool2(const Field3& in);
Field3 pool2_adjoint(const Field3& grad_out, Dims in_dims);

}  // namespace mastoid::kernels
