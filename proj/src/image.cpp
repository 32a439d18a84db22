#include "mrcd/image.hpp"

#include <cmath>
#include <stdexcept>

namespace mrcd {

ImageCube::ImageCube(std::size_t bands, std::size_t rows, std::size_t cols,
                     std::vector<double> data)
    : bands_(bands), rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != bands * rows * cols) {
    throw std::invalid_argument("ImageCube: data size does not match bands*rows*cols");
  }
}

bool ImageCube::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ChangeMask::ChangeMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("ChangeMask: data size does not match rows*cols");
  }
  for (std::uint8_t v : data_) {
    if (v > 1) throw std::invalid_argument("ChangeMask: entries must be 0 or 1");
  }
}

std::size_t ChangeMask::count_ones() const {
  std::size_t c = 0;
  for (std::uint8_t v : data_) c += v;
  return c;
}

bool ChangeEnergyMap::all_finite_nonnegative() const {
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return true;
}

}  // namespace mrcd
