#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mrcd/image.hpp"
#include "mrcd/io.hpp"

using namespace mrcd;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mrcd_io_" + name)).string();
}

/// Random cube whose samples are exactly representable as f32.
ImageCube random_f32_cube(std::size_t bands, std::size_t rows, std::size_t cols,
                          std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  ImageCube cube(bands, rows, cols);
  for (double& v : cube.data()) v = static_cast<double>(static_cast<float>(dist(rng)));
  return cube;
}

}  // namespace

TEST_CASE("spatial index flattening is a bijection") {
  const std::size_t rows = 5, cols = 7;
  for (std::size_t p = 0; p < rows * cols; ++p) {
    auto [i, j] = unflatten_index(p, cols);
    CHECK(flatten_index(i, j, cols) == p);
    CHECK(i < rows);
    CHECK(j < cols);
  }
}

TEST_CASE("cube write/read round-trip is bit-exact") {
  const std::string path = tmp_path("roundtrip.cube");
  SUBCASE("2-band 2x2") {
    ImageCube cube = random_f32_cube(2, 2, 2, 1);
    io::write_cube(cube, path, io::CubeFormat::flat_binary);
    ImageCube back = io::read_cube(path, io::CubeFormat::flat_binary);
    REQUIRE(back.bands() == 2);
    REQUIRE(back.rows() == 2);
    REQUIRE(back.cols() == 2);
    for (std::size_t i = 0; i < cube.data().size(); ++i) {
      CHECK(back.data()[i] == cube.data()[i]);
    }
  }
  SUBCASE("1x1x1 zero") {
    ImageCube cube(1, 1, 1);
    io::write_cube(cube, path, io::CubeFormat::flat_binary);
    CHECK(io::read_cube(path).at(0, 0) == 0.0);
  }
  SUBCASE("random 3-band 4x5") {
    ImageCube cube = random_f32_cube(3, 4, 5, 2);
    io::write_cube(cube, path, io::CubeFormat::flat_binary);
    ImageCube back = io::read_cube(path, io::CubeFormat::flat_binary);
    CHECK(back.data() == cube.data());
  }
  std::remove(path.c_str());
}

TEST_CASE("header/payload size mismatch is rejected") {
  const std::string path = tmp_path("mismatch.cube");
  ImageCube cube = random_f32_cube(2, 2, 2, 3);
  io::write_cube(cube, path, io::CubeFormat::flat_binary);
  // corrupt: claim 3 bands over a 2-band payload
  std::ifstream in(path, std::ios::binary);
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = contents.find("bands=2");
  REQUIRE(pos != std::string::npos);
  contents.replace(pos, 7, "bands=3");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  out.close();
  CHECK_THROWS_WITH_AS(static_cast<void>(io::read_cube(path, io::CubeFormat::flat_binary)),
                       doctest::Contains("size mismatch"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("non-finite cubes are rejected on write") {
  ImageCube cube(1, 2, 2);
  cube.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(io::write_cube(cube, tmp_path("nan.cube"), io::CubeFormat::flat_binary));
}

TEST_CASE("malformed headers are rejected") {
  const std::string path = tmp_path("bad.cube");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "MRCD1\nbands=1\nrows=x\ncols=1\ndtype=f32le\ndata\n";
  out.close();
  CHECK_THROWS(static_cast<void>(io::read_cube(path, io::CubeFormat::flat_binary)));
  std::remove(path.c_str());
}

TEST_CASE("envi bsq pair round-trips and matches the declared geometry") {
  const std::string path = tmp_path("scene.raw");
  ImageCube cube = random_f32_cube(93, 61, 33, 4);  // scaled-down survey geometry
  io::write_cube(cube, path, io::CubeFormat::envi_raw);
  CHECK(io::detect_cube_format(path) == io::CubeFormat::envi_raw);
  ImageCube back = io::read_cube(path);
  CHECK(back.bands() == 93);
  CHECK(back.rows() == 61);
  CHECK(back.cols() == 33);
  CHECK(back.data() == cube.data());
  std::remove(path.c_str());
  std::remove((path + ".hdr").c_str());
}

TEST_CASE("envi header for the full survey geometry reads to 93 x 201300") {
  const std::string path = tmp_path("survey.raw");
  {
    std::ofstream hdr(path + ".hdr", std::ios::trunc);
    hdr << "ENVI\nsamples = 330\nlines = 610\nbands = 93\nheader offset = 0\n"
        << "data type = 4\ninterleave = bsq\nbyte order = 0\n";
    std::ofstream raw(path, std::ios::binary | std::ios::trunc);
    std::vector<char> zeros(93ul * 610ul * 330ul * 4ul, 0);
    raw.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
  }
  ImageCube cube = io::read_cube(path);
  CHECK(cube.bands() == 93);
  CHECK(cube.pixels() == 201300);
  CHECK(cube.rows() == 610);
  CHECK(cube.cols() == 330);
  std::remove(path.c_str());
  std::remove((path + ".hdr").c_str());

  // truncated payload is rejected with a size diagnostic
  {
    std::ofstream hdr(path + ".hdr", std::ios::trunc);
    hdr << "ENVI\nsamples = 330\nlines = 610\nbands = 93\ndata type = 4\n"
        << "interleave = bsq\nbyte order = 0\n";
    std::ofstream raw(path, std::ios::binary | std::ios::trunc);
    raw << "stub";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(io::read_cube(path)),
                       doctest::Contains("size mismatch"), std::runtime_error);
  std::remove(path.c_str());
  std::remove((path + ".hdr").c_str());
}

TEST_CASE("envi rejects unsupported subsets") {
  const std::string path = tmp_path("bil.raw");
  {
    std::ofstream hdr(path + ".hdr", std::ios::trunc);
    hdr << "ENVI\nsamples = 2\nlines = 2\nbands = 1\ndata type = 4\n"
        << "interleave = bil\nbyte order = 0\n";
    std::ofstream raw(path, std::ios::binary | std::ios::trunc);
    raw << std::string(16, '\0');
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(io::read_cube(path)), doctest::Contains("interleave"),
                       std::runtime_error);
  std::remove(path.c_str());
  std::remove((path + ".hdr").c_str());
}

TEST_CASE("mask round-trip preserves binary content") {
  const std::string path = tmp_path("mask.pgm");
  SUBCASE("all-zero 3x3") {
    ChangeMask mask(3, 3);
    io::write_mask(mask, path);
    CHECK(io::read_mask(path) == mask);
  }
  SUBCASE("checkerboard 2x2") {
    ChangeMask mask(2, 2, {1, 0, 0, 1});
    io::write_mask(mask, path);
    CHECK(io::read_mask(path) == mask);
  }
  std::remove(path.c_str());
}

TEST_CASE("non-binary graymap values are rejected") {
  const std::string path = tmp_path("gray7.pgm");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "P5\n2 1\n255\n";
    const unsigned char payload[2] = {0, 7};
    out.write(reinterpret_cast<const char*>(payload), 2);
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(io::read_mask(path)), doctest::Contains("non-binary"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("text matrices round-trip") {
  const std::string path = tmp_path("matrix.txt");
  io::TextMatrix m;
  m.rows = 2;
  m.cols = 3;
  m.values = {1.0, 0.5, -2.25, 0.0, 1e-8, 42.0};
  io::write_text_matrix(m, path);
  io::TextMatrix back = io::read_text_matrix(path);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    CHECK(back.values[i] == doctest::Approx(m.values[i]).epsilon(1e-15));
  }
  std::remove(path.c_str());
}

TEST_CASE("cube type validates its invariants") {
  CHECK_THROWS(ImageCube(2, 2, 2, std::vector<double>(7, 0.0)));
  CHECK_THROWS(ChangeMask(1, 2, {0, 7}));
  ImageCube ok(1, 1, 2, {1.0, 2.0});
  CHECK(ok.all_finite());
  ok.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(!ok.all_finite());
}
