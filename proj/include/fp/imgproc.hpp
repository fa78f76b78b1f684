#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fp {

inline constexpr double kDefaultDpi = 1200.0;

// Scales a length tuned at 1200 dpi to the given resolution.
inline double at_dpi(double px_at_1200, double dpi) {
  return px_at_1200 * dpi / kDefaultDpi;
}

// Grayscale raster, intensities in [0,1], row-major. Dark = ridge.
class GrayImage {
public:
  static constexpr int kMinSide = 32;

  GrayImage() = default;
  // Throws std::invalid_argument for sides below kMinSide or dpi <= 0.
  GrayImage(int width, int height, double dpi = kDefaultDpi, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double dpi() const { return dpi_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  double &at(int x, int y) { return pixels_[idx(x, y)]; }
  double at(int x, int y) const { return pixels_[idx(x, y)]; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  // Bilinear sample; coordinates outside the raster clamp to the border.
  double sample(double x, double y) const;

  std::vector<double> &pixels() { return pixels_; }
  const std::vector<double> &pixels() const { return pixels_; }

  // True when every intensity lies in [0,1].
  bool in_range() const;

  friend bool operator==(const GrayImage &, const GrayImage &) = default;

private:
  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  double dpi_ = kDefaultDpi;
  std::vector<double> pixels_;
};

// Per-block ridge flow description.
//
// orientation is the ridge direction in image coordinates (x right, y down),
// measured from +x toward +y, in [0, pi). frequency is in ridges per pixel and
// is 0 where the block is background or the estimate failed;
// filled_frequency() interpolates the failures for consumers.
struct BlockMap {
  int block_size = 0;
  int cols = 0;
  int rows = 0;
  int width = 0;
  int height = 0;
  std::vector<double> orientation;
  std::vector<double> coherence;
  std::vector<double> frequency;
  std::vector<std::uint8_t> foreground;

  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(col);
  }
  int col_of(int x) const { return x / block_size; }
  int row_of(int y) const { return y / block_size; }

  bool foreground_at(int x, int y) const {
    return foreground[index(col_of(x), row_of(y))] != 0;
  }
  // Ridge direction at a pixel, bilinearly interpolated between block centres
  // in the doubled-angle representation.
  double orientation_at(double x, double y) const;
  // orientation_at for every pixel, row-major.
  std::vector<double> orientation_field() const;
  // Ridge frequency with failed foreground blocks filled from neighbours.
  // Blocks with no usable neighbour take the median foreground frequency.
  std::vector<double> filled_frequency() const;
  std::size_t foreground_count() const;
};

// 16 px at 600 dpi, scaled with resolution (32 px at 1200 dpi).
int default_block_size(double dpi);

// Global mean/variance normalization; a constant image maps to target_mean.
GrayImage normalize(const GrayImage &img, double target_mean = 0.5,
                    double target_var = 0.0225);

// Throws std::invalid_argument if block_size < 8 or exceeds either side.
BlockMap estimate_block_map(const GrayImage &img, int block_size);
inline BlockMap estimate_block_map(const GrayImage &img) {
  return estimate_block_map(img, default_block_size(img.dpi()));
}

// Oriented Gabor band-pass filtering driven by the block map. Output has mean
// 0.5 and the input's foreground spread; background is 0.5.
GrayImage enhance(const GrayImage &img, const BlockMap &map);

// 1 = ridge (dark after enhancement), 0 = valley or background.
GrayImage binarize(const GrayImage &img, const BlockMap &map);

// Intermediate rasters of the shared preprocessing chain.
struct Preprocessed {
  GrayImage normalized;
  BlockMap map;
  GrayImage enhanced;
  GrayImage binary;
};

// Block segmentation is coarse and enhancement paints ridges into the flat
// margin of a fragment; this clears binary pixels whose local variance (a
// window of about 1.5 ridge periods) is under a quarter of the textured area's.
void clear_flat(GrayImage &binary, const GrayImage &normalized, const BlockMap &map);

Preprocessed preprocess(const GrayImage &img);

// 8-bit binary PGM ("P5"). Throws ParseError / IoError.
GrayImage read_pgm(const std::filesystem::path &path, double dpi = kDefaultDpi);
void write_pgm(const std::filesystem::path &path, const GrayImage &img);

} // namespace fp
