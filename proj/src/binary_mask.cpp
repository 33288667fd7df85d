#include "mastoid/binary_mask.hpp"

#include <algorithm>
#include <string>

#include "mastoid/error.hpp"

namespace mastoid {

BinaryMask::BinaryMask(Dims d, std::vector<std::uint8_t> l) : dims(d), labels(std::move(l)) {
    if (labels.size() != dims.size()) throw ConfigError("mask length does not match dims");
    for (auto& x : labels) x = x ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

Volume3 BinaryMask::to_volume(Spacing spacing) const {
    std::vector<float> out(labels.size());
    std::transform(labels.begin(), labels.end(), out.begin(),
                   [](std::uint8_t x) { return x ? 1.0f : 0.0f; });
    return Volume3(dims, spacing, std::move(out));
}

BinaryMask BinaryMask::from_volume(const Volume3& v) {
    BinaryMask m(v.dims());
    const auto vals = v.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i] == 1.0f) {
            m.labels[i] = 1;
        } else if (vals[i] != 0.0f) {
            throw ConfigError("mask volume has non-binary value at index " + std::to_string(i));
        }
    }
    return m;
}

}  // namespace mastoid
