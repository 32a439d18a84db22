#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mrcd/image.hpp"

namespace mrcd::io {

enum class CubeFormat {
  flat_binary,  // single file: text header (key=value) + raw f32le payload, band-sequential
  envi_raw,     // ENVI .hdr sidecar + raw file; subset: bsq / data type 4 / byte order 0
};

/// Picks envi_raw when a sidecar .hdr exists or the path itself ends in .hdr,
/// flat_binary otherwise.
CubeFormat detect_cube_format(const std::string& path);

ImageCube read_cube(const std::string& path, CubeFormat format);
void write_cube(const ImageCube& cube, const std::string& path, CubeFormat format);

inline ImageCube read_cube(const std::string& path) {
  return read_cube(path, detect_cube_format(path));
}

/// Binary PGM (P5, maxval 255); mask value 1 maps to 255.
ChangeMask read_mask(const std::string& path);
void write_mask(const ChangeMask& mask, const std::string& path);

/// Plain-text matrix, one row per line, whitespace-separated values.
struct TextMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

TextMatrix read_text_matrix(const std::string& path);
void write_text_matrix(const TextMatrix& m, const std::string& path);

}  // namespace mrcd::io
