#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcmmf {

// A camera frame of 12-bit counts stored row-major.
struct SpeckleFrame {
    static constexpr int kMaxCount = 4095;

    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> counts;

    SpeckleFrame() = default;
    SpeckleFrame(int w, int h)
        : width(w), height(h),
          counts(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    std::uint16_t at(int x, int y) const {
        return counts[static_cast<std::size_t>(y) * width + x];
    }
    std::uint16_t& at(int x, int y) {
        return counts[static_cast<std::size_t>(y) * width + x];
    }
};

// Binary PGM (P5) with maxval 4095, sample bytes big-endian as the format
// requires. Round-trips bit-exactly.
void write_pgm(const SpeckleFrame& frame, const std::string& path);
SpeckleFrame read_pgm(const std::string& path);

} // namespace mcmmf
