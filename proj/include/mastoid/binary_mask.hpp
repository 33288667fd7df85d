#pragma once

#include <cstdint>
#include <vector>

#include "mastoid/volume.hpp"

namespace mastoid {

// Voxel labels in {0, 1}, x-fastest like Volume3.
struct BinaryMask {
    Dims dims{};
    std::vector<std::uint8_t> labels;

    BinaryMask() = default;
    explicit BinaryMask(Dims d) : dims(d), labels(d.size(), 0) {}
    BinaryMask(Dims d, std::vector<std::uint8_t> l);

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t count() const noexcept;
    bool operator[](std::size_t i) const noexcept { return labels[i] != 0; }

    // Stored on disk as 0.0 / 1.0 floats.
    Volume3 to_volume(Spacing spacing) const;
    // Accepts only exact 0.0 / 1.0 values.
    static BinaryMask from_volume(const Volume3& v);

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

}  // namespace mastoid
