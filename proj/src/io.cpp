#include "mrcd/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mrcd::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error(path + ": " + why);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Payloads are little-endian f32 on disk regardless of host order.
float f32_from_le(const unsigned char* p) {
  std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                    (static_cast<std::uint32_t>(p[2]) << 16) |
                    (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

void f32_to_le(float f, unsigned char* p) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  p[0] = static_cast<unsigned char>(u & 0xff);
  p[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

ImageCube payload_to_cube(const std::string& path, const std::vector<unsigned char>& raw,
                          std::size_t bands, std::size_t rows, std::size_t cols) {
  const std::size_t count = bands * rows * cols;
  if (raw.size() != count * 4) {
    fail(path, "payload size mismatch: header declares " + std::to_string(count) +
                   " f32 samples (" + std::to_string(count * 4) + " bytes), file holds " +
                   std::to_string(raw.size()) + " bytes");
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    double v = static_cast<double>(f32_from_le(raw.data() + i * 4));
    if (!std::isfinite(v)) fail(path, "non-finite sample at index " + std::to_string(i));
    data[i] = v;
  }
  return ImageCube(bands, rows, cols, std::move(data));
}

std::vector<unsigned char> cube_to_payload(const ImageCube& cube, const std::string& path) {
  if (!cube.all_finite()) fail(path, "refusing to write cube with non-finite samples");
  const std::size_t count = cube.data().size();
  std::vector<unsigned char> raw(count * 4);
  for (std::size_t i = 0; i < count; ++i) {
    f32_to_le(static_cast<float>(cube.data()[i]), raw.data() + i * 4);
  }
  return raw;
}

std::string envi_header_path(const std::string& path) {
  if (lower(std::filesystem::path(path).extension().string()) == ".hdr") return path;
  std::string sidecar = path + ".hdr";
  if (std::filesystem::exists(sidecar)) return sidecar;
  std::filesystem::path p(path);
  p.replace_extension(".hdr");
  return p.string();
}

std::string envi_data_path(const std::string& path) {
  if (lower(std::filesystem::path(path).extension().string()) != ".hdr") return path;
  // header given: try dropping .hdr, then common raw extensions
  std::filesystem::path p(path);
  std::filesystem::path stem = p.parent_path() / p.stem();
  if (std::filesystem::exists(stem)) return stem.string();
  for (const char* ext : {".raw", ".img", ".bsq", ".dat"}) {
    std::filesystem::path candidate = stem;
    candidate += ext;
    if (std::filesystem::exists(candidate)) return candidate.string();
  }
  fail(path, "could not locate the raw data file next to this ENVI header");
}

struct EnviHeader {
  std::size_t samples = 0, lines = 0, bands = 0;
  int data_type = -1, byte_order = -1;
  std::size_t header_offset = 0;
  std::string interleave;
  std::vector<double> wavelength;
};

EnviHeader parse_envi_header(const std::string& hdr_path) {
  std::ifstream in(hdr_path);
  if (!in) fail(hdr_path, "cannot open ENVI header");
  std::string first;
  std::getline(in, first);
  if (trim(first) != "ENVI") fail(hdr_path, "missing ENVI magic line");

  EnviHeader h;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      // brace-enclosed value, possibly spanning lines
      while (value.find('}') == std::string::npos && std::getline(in, line)) {
        value += " " + trim(line);
      }
      value = trim(value.substr(1, value.find('}') - 1));
    }
    try {
      if (key == "samples") h.samples = std::stoul(value);
      else if (key == "lines") h.lines = std::stoul(value);
      else if (key == "bands") h.bands = std::stoul(value);
      else if (key == "data type") h.data_type = std::stoi(value);
      else if (key == "byte order") h.byte_order = std::stoi(value);
      else if (key == "header offset") h.header_offset = std::stoul(value);
      else if (key == "interleave") h.interleave = lower(value);
      else if (key == "wavelength") {
        std::string item;
        std::stringstream ss(value);
        while (std::getline(ss, item, ',')) {
          item = trim(item);
          if (!item.empty()) h.wavelength.push_back(std::stod(item));
        }
      }
    } catch (const std::exception&) {
      fail(hdr_path, "malformed value for key '" + key + "': " + value);
    }
  }
  if (h.samples == 0 || h.lines == 0 || h.bands == 0) {
    fail(hdr_path, "header must declare samples, lines and bands");
  }
  if (h.data_type != 4) fail(hdr_path, "unsupported data type (only 4 = float32)");
  if (h.byte_order != 0) fail(hdr_path, "unsupported byte order (only 0 = little-endian)");
  if (h.interleave != "bsq") fail(hdr_path, "unsupported interleave (only bsq)");
  return h;
}

std::vector<unsigned char> read_all_bytes(const std::string& path, std::size_t offset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  in.seekg(0, std::ios::end);
  std::streamoff size = in.tellg();
  if (size < static_cast<std::streamoff>(offset)) fail(path, "file shorter than header offset");
  in.seekg(static_cast<std::streamoff>(offset), std::ios::beg);
  std::vector<unsigned char> raw(static_cast<std::size_t>(size) - offset);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) fail(path, "short read");
  return raw;
}

ImageCube read_cube_flat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  std::string line;
  std::getline(in, line);
  if (trim(line) != "MRCD1") fail(path, "missing MRCD1 magic line");
  std::size_t bands = 0, rows = 0, cols = 0;
  std::string dtype;
  bool saw_data = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line == "data") {
      saw_data = true;
      break;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(path, "malformed header line: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key != "bands" && key != "rows" && key != "cols" && key != "dtype") {
      fail(path, "unknown header key: " + key);
    }
    try {
      if (key == "bands") bands = std::stoul(value);
      else if (key == "rows") rows = std::stoul(value);
      else if (key == "cols") cols = std::stoul(value);
      else dtype = value;
    } catch (const std::exception&) {
      fail(path, "malformed value for header key '" + key + "': " + value);
    }
  }
  if (!saw_data) fail(path, "header not terminated by 'data' line");
  if (bands == 0 || rows == 0 || cols == 0) {
    fail(path, "header must declare positive bands, rows and cols");
  }
  if (dtype != "f32le") fail(path, "unsupported dtype (only f32le)");

  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return payload_to_cube(path, raw, bands, rows, cols);
}

void write_cube_flat(const ImageCube& cube, const std::string& path) {
  std::vector<unsigned char> raw = cube_to_payload(cube, path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open file for writing");
  out << "MRCD1\n"
      << "bands=" << cube.bands() << "\n"
      << "rows=" << cube.rows() << "\n"
      << "cols=" << cube.cols() << "\n"
      << "dtype=f32le\n"
      << "data\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(path, "write failed");
}

ImageCube read_cube_envi(const std::string& path) {
  const std::string hdr = envi_header_path(path);
  if (!std::filesystem::exists(hdr)) fail(path, "no ENVI header found (" + hdr + ")");
  EnviHeader h = parse_envi_header(hdr);
  const std::string data_file = envi_data_path(path);
  std::vector<unsigned char> raw = read_all_bytes(data_file, h.header_offset);
  ImageCube cube = payload_to_cube(data_file, raw, h.bands, h.lines, h.samples);
  if (h.wavelength.size() == h.bands) cube.band_centers = h.wavelength;
  return cube;
}

void write_cube_envi(const ImageCube& cube, const std::string& path) {
  std::vector<unsigned char> raw = cube_to_payload(cube, path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open file for writing");
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) fail(path, "write failed");
  }
  std::ofstream hdr(path + ".hdr", std::ios::trunc);
  if (!hdr) fail(path + ".hdr", "cannot open header for writing");
  hdr << "ENVI\n"
      << "samples = " << cube.cols() << "\n"
      << "lines = " << cube.rows() << "\n"
      << "bands = " << cube.bands() << "\n"
      << "header offset = 0\n"
      << "data type = 4\n"
      << "interleave = bsq\n"
      << "byte order = 0\n";
  if (cube.band_centers && cube.band_centers->size() == cube.bands()) {
    hdr << "wavelength = {";
    for (std::size_t b = 0; b < cube.bands(); ++b) {
      hdr << (b ? ", " : " ") << (*cube.band_centers)[b];
    }
    hdr << " }\n";
  }
}

}  // namespace

CubeFormat detect_cube_format(const std::string& path) {
  if (lower(std::filesystem::path(path).extension().string()) == ".hdr") {
    return CubeFormat::envi_raw;
  }
  if (std::filesystem::exists(path + ".hdr")) return CubeFormat::envi_raw;
  std::filesystem::path sibling(path);
  sibling.replace_extension(".hdr");
  if (sibling != std::filesystem::path(path) && std::filesystem::exists(sibling)) {
    return CubeFormat::envi_raw;
  }
  return CubeFormat::flat_binary;
}

ImageCube read_cube(const std::string& path, CubeFormat format) {
  switch (format) {
    case CubeFormat::flat_binary: return read_cube_flat(path);
    case CubeFormat::envi_raw: return read_cube_envi(path);
  }
  fail(path, "unknown cube format");
}

void write_cube(const ImageCube& cube, const std::string& path, CubeFormat format) {
  if (cube.bands() == 0 || cube.pixels() == 0) fail(path, "refusing to write empty cube");
  switch (format) {
    case CubeFormat::flat_binary: return write_cube_flat(cube, path);
    case CubeFormat::envi_raw: return write_cube_envi(cube, path);
  }
  fail(path, "unknown cube format");
}

ChangeMask read_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");

  // P5 header: magic, width, height, maxval, separated by whitespace/comments.
  auto next_token = [&]() -> std::string {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    return tok;
  };

  if (next_token() != "P5") fail(path, "not a binary PGM (P5) file");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(next_token());
    height = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    fail(path, "malformed PGM header");
  }
  if (maxval != 255) fail(path, "mask PGM must have maxval 255");

  std::vector<unsigned char> raw(width * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) fail(path, "payload shorter than declared dimensions");

  std::vector<std::uint8_t> bits(width * height);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == 0) bits[i] = 0;
    else if (raw[i] == 255) bits[i] = 1;
    else fail(path, "non-binary pixel value " + std::to_string(raw[i]) + " in mask");
  }
  return ChangeMask(height, width, std::move(bits));
}

void write_mask(const ChangeMask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open file for writing");
  out << "P5\n" << mask.cols() << " " << mask.rows() << "\n255\n";
  std::vector<unsigned char> raw(mask.pixels());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.at(i) ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(path, "write failed");
}

TextMatrix read_text_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  TextMatrix m;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::stringstream ss(t);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) fail(path, "non-numeric token on line: " + t);
    if (m.cols == 0) m.cols = row.size();
    if (row.size() != m.cols) fail(path, "ragged rows in text matrix");
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.rows;
  }
  if (m.rows == 0) fail(path, "empty matrix file");
  return m;
}

void write_text_matrix(const TextMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(path, "cannot open file for writing");
  out.precision(17);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      out << (c ? " " : "") << m.values[r * m.cols + c];
    }
    out << "\n";
  }
  if (!out) fail(path, "write failed");
}

}  // namespace mrcd::io
