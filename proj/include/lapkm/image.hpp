#pragma once

#include "lapkm/core.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace lapkm {

/// Grayscale raster, row-major, values in [0, maxval].
struct GrayImage {
    Index rows = 0;
    Index cols = 0;
    int maxval = 255;
    std::vector<std::uint16_t> pixels;

    std::uint16_t at(Index r, Index c) const { return pixels[static_cast<std::size_t>(r * cols + c)]; }
    std::uint16_t& at(Index r, Index c) { return pixels[static_cast<std::size_t>(r * cols + c)]; }
};

/// Reads binary (P5, 8 or 16 bit big-endian) or ASCII (P2) PGM.
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage parse_pgm(std::istream& in);

/// Writes binary P5.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// One row per pixel (row-major): (row / rows, col / cols, value / maxval).
Dataset pixel_features(const GrayImage& image);

/// read_pgm followed by pixel_features.
Dataset load_pgm(const std::filesystem::path& path);

/// Label map as an 8-bit image, cluster ids spread evenly over 0..255.
GrayImage label_image(const Labels& labels, Index rows, Index cols, int clusters);

/// Figure-ground test image: a uniform dark square (intensity 0.2, the middle
/// `square` pixels) over a bright background with a left-to-right ramp 0.55..0.9 and
/// i.i.d. Gaussian texture of sd `texture`. mask marks the square.
struct OccluderImage {
    GrayImage image;
    std::vector<bool> mask;
};
OccluderImage synthetic_occluder(Index size = 64, Index square = 24, double texture = 0.1, std::uint64_t seed = 0);

}  // namespace lapkm
