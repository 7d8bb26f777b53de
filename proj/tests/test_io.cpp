#include <doctest.h>

#include <fstream>

#include "rot/io.hpp"

using namespace rot;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("rot_io_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& content) const {
    const fs::path path = dir / name;
    std::ofstream(path, std::ios::binary) << content;
    return path;
  }
};

}  // namespace

TEST_CASE("CSV cells accept commas, spaces and tabs") {
  const Scratch s;
  const Matrix m = io::read_csv_matrix(s.write("m.csv", "1,2, 3\n4\t5 6\r\n\n"));
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 2) == 3.0);
  CHECK(m(1, 0) == 4.0);
  CHECK(io::read_csv_vector(s.write("v.csv", "0.5\n0.25,0.25\n")) == Vector{{0.5, 0.25, 0.25}});
  CHECK_THROWS_AS(io::read_csv_matrix(s.write("ragged.csv", "1,2\n3\n")), IoError);
  CHECK_THROWS_AS(io::read_csv_matrix(s.write("text.csv", "1,x\n")), IoError);
  CHECK_THROWS_AS(io::read_csv_matrix(s.write("empty.csv", "\n")), IoError);
  CHECK_THROWS_AS(io::read_csv_matrix(s.dir / "missing.csv"), IoError);
}

TEST_CASE("CSV output round-trips doubles") {
  const Scratch s;
  Matrix m(2, 2);
  m << 0.1, 1.0 / 3.0, -2.5e-300, 12345678.9;
  const Matrix back = io::read_csv_matrix(s.write("round.csv", io::format_csv(m)));
  CHECK(back == m);
  CHECK(io::format_csv_rows({{1.0, 2.0}, {3.0}}) == "1,2\n3\n");
}

TEST_CASE("sample indices are 1-based on disk") {
  const Scratch s;
  CHECK(io::read_sample_indices(s.write("idx.txt", "1 2\n4,4\n"), 4) == std::vector<Index>{0, 1, 3, 3});
  CHECK_THROWS_AS(io::read_sample_indices(s.write("zero.txt", "0 1\n"), 4), ConfigError);
  CHECK_THROWS_AS(io::read_sample_indices(s.write("high.txt", "5\n"), 4), ConfigError);
  CHECK_THROWS_AS(io::read_sample_indices(s.write("frac.txt", "1.5\n"), 4), ConfigError);
}

TEST_CASE("PGM images in plain and raw form") {
  const Scratch s;
  const IntensityImage plain =
      io::read_image(s.write("p2.pgm", "P2\n# comment\n3 2\n255\n0 1 2\n3 4 5\n"), 2.0);
  CHECK(plain.width == 3);
  CHECK(plain.height == 2);
  CHECK(plain.pixel_size == 2.0);
  CHECK(plain.intensities == Vector{{0, 1, 2, 3, 4, 5}});

  const std::string raw8 = std::string("P5 2 2 255\n") + char(0) + char(10) + char(200) + char(255);
  CHECK(io::read_image(s.write("p5.pgm", raw8), 1.0).intensities == Vector{{0, 10, 200, 255}});

  const std::string raw16 = std::string("P5\n1 1\n65535\n") + char(1) + char(2);
  CHECK(io::read_image(s.write("p16.pgm", raw16), 1.0).intensities[0] == 258.0);

  CHECK_THROWS_AS(io::read_image(s.write("short.pgm", "P5 2 2 255\n\x01"), 1.0), IoError);
  CHECK_THROWS_AS(io::read_image(s.write("bad.pgm", "P3 1 1 255\n0 0 0"), 1.0), IoError);

  const IntensityImage csv = io::read_image(s.write("img.csv", "1,2\n3,4\n5,6\n"), 1.0);
  CHECK(csv.width == 2);
  CHECK(csv.height == 3);
  CHECK(csv.intensities[3] == 4.0);
}

TEST_CASE("output sets publish all files") {
  const Scratch s;
  io::OutputSet set;
  set.add(s.dir / "out" / "a.txt", "alpha");
  set.add(s.dir / "out" / "b.txt", "beta");
  set.commit();
  std::ifstream a(s.dir / "out" / "a.txt");
  std::string text;
  a >> text;
  CHECK(text == "alpha");
  CHECK(fs::exists(s.dir / "out" / "b.txt"));
  CHECK_FALSE(fs::exists(s.dir / "out" / "a.txt.tmp"));

  // sha256 of "abc"
  CHECK(io::sha256_file(s.write("abc.txt", "abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
