#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace magnav {

struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, row 0 at top

  Image8() = default;
  Image8(int w, int h, uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  uint8_t& at(int row, int col) {
    return pixels[static_cast<size_t>(row) * width + col];
  }
  uint8_t at(int row, int col) const {
    return pixels[static_cast<size_t>(row) * width + col];
  }
};

// PGM (P5 binary or P2 ascii), maxval up to 255
Image8 read_pgm(const std::string& path);
void write_pgm(const Image8& img, const std::string& path);

// 8-bit grayscale PNG; other color types are converted on load
Image8 read_png(const std::string& path);

// Dispatch on file extension (.png/.pgm)
Image8 read_image(const std::string& path);

// Integer mean over the centered patch_size x patch_size window.
// Exact: returns (sum, count) so callers can compare sum against
// thresholds without rounding.
struct PatchSum {
  int64_t sum = 0;
  int64_t count = 0;
  double mean() const { return static_cast<double>(sum) / count; }
};
PatchSum center_patch_sum(const Image8& img, int patch_size);

}  // namespace magnav
