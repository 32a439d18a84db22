#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace mrcd {

/// Row-major spatial flattening, fixed library-wide: pixel p = i * cols + j.
inline std::size_t flatten_index(std::size_t i, std::size_t j, std::size_t cols) {
  return i * cols + j;
}

inline std::pair<std::size_t, std::size_t> unflatten_index(std::size_t p, std::size_t cols) {
  return {p / cols, p % cols};
}

/// Multi-band image stored band-major: band b occupies one contiguous row of
/// length rows*cols. Every operator in the library multiplies this matrix on
/// the left (spectral) or on the right (spatial), so both axes stay
/// cache-friendly.
class ImageCube {
public:
  ImageCube() = default;

  ImageCube(std::size_t bands, std::size_t rows, std::size_t cols)
      : bands_(bands), rows_(rows), cols_(cols), data_(bands * rows * cols, 0.0) {}

  ImageCube(std::size_t bands, std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t bands() const { return bands_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t pixels() const { return rows_ * cols_; }

  double* band(std::size_t b) { return data_.data() + b * pixels(); }
  const double* band(std::size_t b) const { return data_.data() + b * pixels(); }

  double& at(std::size_t b, std::size_t p) { return data_[b * pixels() + p]; }
  double at(std::size_t b, std::size_t p) const { return data_[b * pixels() + p]; }

  double& at(std::size_t b, std::size_t i, std::size_t j) {
    return data_[b * pixels() + flatten_index(i, j, cols_)];
  }
  double at(std::size_t b, std::size_t i, std::size_t j) const {
    return data_[b * pixels() + flatten_index(i, j, cols_)];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  /// Wavelength (nm) of each band center, when known.
  std::optional<std::vector<double>> band_centers;

private:
  std::size_t bands_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Binary per-pixel decision map; 1 means the change hypothesis was accepted.
class ChangeMask {
public:
  ChangeMask() = default;
  ChangeMask(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  ChangeMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t pixels() const { return rows_ * cols_; }

  std::uint8_t& at(std::size_t p) { return data_[p]; }
  std::uint8_t at(std::size_t p) const { return data_[p]; }
  std::uint8_t& at(std::size_t i, std::size_t j) { return data_[flatten_index(i, j, cols_)]; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return data_[flatten_index(i, j, cols_)]; }

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  std::size_t count_ones() const;

  bool operator==(const ChangeMask& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel nonnegative test statistic prior to thresholding. `dof` is the
/// spectral dimension the statistic was built from (chi-square degrees of
/// freedom under the no-change hypothesis).
class ChangeEnergyMap {
public:
  ChangeEnergyMap() = default;
  ChangeEnergyMap(std::size_t rows, std::size_t cols, std::size_t dof)
      : rows_(rows), cols_(cols), dof_(dof), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t pixels() const { return rows_ * cols_; }
  std::size_t dof() const { return dof_; }

  double& at(std::size_t p) { return data_[p]; }
  double at(std::size_t p) const { return data_[p]; }
  double& at(std::size_t i, std::size_t j) { return data_[flatten_index(i, j, cols_)]; }
  double at(std::size_t i, std::size_t j) const { return data_[flatten_index(i, j, cols_)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite_nonnegative() const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t dof_ = 0;
  std::vector<double> data_;
};

}  // namespace mrcd
