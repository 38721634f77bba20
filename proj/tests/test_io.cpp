#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bfm/benchmark.hpp"
#include "bfm/grid.hpp"
#include "bfm/io.hpp"

using bfm::DensityField;
using bfm::Grid;
using bfm::PgmImage;

namespace {

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

DensityField random_density(const Grid& g, unsigned seed) {
  std::vector<double> raw(g.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : raw) v = uni(rng);
  return bfm::normalize(g, raw);
}

}  // namespace

TEST_CASE("P2 parsing handles comments and maps row zero to the top", "[io]") {
  const std::string text =
      "P2\n"
      "# a comment\n"
      "3 2  # trailing comment\n"
      "255\n"
      "0 128 255\n"
      "64 32 16\n";
  std::istringstream in(text);
  PgmImage img = bfm::read_pgm(in);
  REQUIRE(img.width == 3);
  REQUIRE(img.height == 2);
  REQUIRE(img.maxval == 255);
  REQUIRE(img.pixels ==
          std::vector<std::uint8_t>{0, 128, 255, 64, 32, 16});

  DensityField f = bfm::density_from_pgm(img);
  REQUIRE(f.grid == Grid({3, 2}));
  // Pixel row 0 is the top of the image, node i1 = H-1.
  CHECK(f.values[f.grid.linear(0, 1)] == 0.0);
  CHECK(f.values[f.grid.linear(1, 1)] == 128.0 / 255.0);
  CHECK(f.values[f.grid.linear(2, 1)] == 1.0);
  CHECK(f.values[f.grid.linear(0, 0)] == 64.0 / 255.0);
  CHECK(f.values[f.grid.linear(2, 0)] == 16.0 / 255.0);

  DensityField inv = bfm::density_from_pgm(img, /*invert=*/true);
  CHECK(inv.values[inv.grid.linear(0, 1)] == 1.0);
  CHECK(inv.values[inv.grid.linear(2, 1)] == 0.0);
}

TEST_CASE("P5 parsing scales by maxval", "[io]") {
  std::string bytes = "P5\n3 2\n100\n";
  const std::uint8_t raster[6] = {0, 50, 100, 25, 75, 10};
  bytes.append(reinterpret_cast<const char*>(raster), 6);
  std::istringstream in(bytes, std::ios::binary);
  PgmImage img = bfm::read_pgm(in);
  REQUIRE(img.maxval == 100);
  DensityField f = bfm::density_from_pgm(img);
  CHECK(f.values[f.grid.linear(0, 1)] == 0.0);
  CHECK(f.values[f.grid.linear(1, 1)] == 0.5);
  CHECK(f.values[f.grid.linear(2, 1)] == 1.0);
  CHECK(f.values[f.grid.linear(1, 0)] == 0.75);
}

TEST_CASE("PGM parsing rejects malformed input", "[io]") {
  auto reject = [](const std::string& s) {
    std::istringstream in(s, std::ios::binary);
    CHECK_THROWS_AS(bfm::read_pgm(in), bfm::IoError);
  };
  reject("P3\n2 2\n255\n0 0 0 0\n");        // wrong magic
  reject("P2\n0 2\n255\n");                 // zero width
  reject("P2\n2 -1\n255\n");                // negative height
  reject("P2\n2 2\n65535\n0 0 0 0\n");      // 16-bit maxval unsupported
  reject("P2\n2 2\n0\n0 0 0 0\n");          // maxval must be positive
  reject("P2\n2 2\n255\n0 0 0\n");          // truncated raster
  reject("P2\n2 2\n255\n0 0 0 300\n");      // sample above maxval
  reject(std::string("P5\n2 2\n255\n") + "abc");  // truncated binary raster
  reject("");
}

TEST_CASE("PGM roundtrip stays within one quantization step", "[io]") {
  Grid g({32, 24});
  DensityField f = random_density(g, 17);
  double maxv = 0.0;
  for (double v : f.values) maxv = std::max(maxv, v);

  PgmImage img = bfm::pgm_from_density(f);
  REQUIRE(img.width == 32);
  REQUIRE(img.height == 24);
  REQUIRE(img.maxval == 255);

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  bfm::write_pgm(buf, img);
  PgmImage back = bfm::read_pgm(buf);
  DensityField f2 = bfm::density_from_pgm(back);
  REQUIRE(f2.grid == g);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    CHECK(std::fabs(f.values[i] / maxv - f2.values[i]) <= 1.0 / 255.0);
  }
}

TEST_CASE("PGM file writer and orientation are exact", "[io]") {
  // One bright node at (i0=2, i1=0): bottom row, so pixel row H-1.
  Grid g({4, 3});
  DensityField f(g);
  f.values[g.linear(2, 0)] = 1.0;
  PgmImage img = bfm::pgm_from_density(f);
  REQUIRE(img.pixels.size() == 12);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    CHECK(img.pixels[i] == (i == 2 * 4 + 2 ? 255 : 0));
  }

  const std::string path = "/tmp/bfm_io_test.pgm";
  bfm::write_pgm(path, img);
  PgmImage back = bfm::read_pgm(path);
  CHECK(back.pixels == img.pixels);
  std::remove(path.c_str());

  CHECK_THROWS_AS(bfm::read_pgm(std::string("/tmp/definitely_missing.pgm")),
                  bfm::IoError);
  CHECK_THROWS_AS(bfm::pgm_from_density(DensityField(Grid({8}))),
                  bfm::InvalidArgument);
  CHECK_THROWS_AS(bfm::pgm_from_density(DensityField(Grid({4, 4, 4}))),
                  bfm::InvalidArgument);
}

TEST_CASE("CSV roundtrip is bitwise and row zero is the top", "[io]") {
  Grid g({5, 4});
  DensityField f = random_density(g, 23);
  std::ostringstream out;
  bfm::write_csv(out, f);

  // First emitted line is the top row i1 = H-1.
  const std::string text = out.str();
  std::istringstream first_line(text.substr(0, text.find('\n')));
  std::string tok;
  std::getline(first_line, tok, ',');
  CHECK(std::stod(tok) == f.values[g.linear(0, 3)]);

  std::istringstream in(text);
  DensityField back = bfm::read_csv(in);
  REQUIRE(back.grid == g);
  CHECK(bitwise_equal(back.values, f.values));
}

TEST_CASE("CSV handles one-dimensional grids", "[io]") {
  Grid g({7});
  DensityField f = random_density(g, 29);
  std::ostringstream out;
  bfm::write_csv(out, f);
  std::istringstream in(out.str());
  DensityField back = bfm::read_csv(in);
  REQUIRE(back.grid == g);
  CHECK(bitwise_equal(back.values, f.values));
}

TEST_CASE("CSV rejects malformed input", "[io]") {
  auto reject = [](const std::string& s) {
    std::istringstream in(s);
    CHECK_THROWS_AS(bfm::read_csv(in), bfm::IoError);
  };
  reject("");
  reject("1,2\n3\n");      // ragged
  reject("1,x\n2,3\n");    // junk token
  CHECK_THROWS_AS(
      [] {
        std::ostringstream out;
        bfm::write_csv(out, bfm::ScalarField(Grid({4, 4, 4})));
      }(),
      bfm::InvalidArgument);
}

TEST_CASE("BFMG dumps roundtrip bitwise", "[io]") {
  Grid g({6, 5, 4});
  DensityField f = random_density(g, 31);
  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  bfm::write_bfmg(buf, f);

  const std::string bytes = buf.str();
  REQUIRE(bytes.size() >= 4);
  CHECK(bytes.compare(0, 4, "BFMG") == 0);

  bfm::BfmgData back = bfm::read_bfmg(buf);
  REQUIRE(back.grid == g);
  CHECK(bitwise_equal(back.values, f.values));

  // Corrupt magic.
  std::stringstream bad(std::ios::in | std::ios::out | std::ios::binary);
  std::string corrupted = bytes;
  corrupted[0] = 'X';
  bad.str(corrupted);
  CHECK_THROWS_AS(bfm::read_bfmg(bad), bfm::IoError);

  // Truncated payload.
  std::stringstream cut(std::ios::in | std::ios::out | std::ios::binary);
  cut.str(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(bfm::read_bfmg(cut), bfm::IoError);

  const std::string path = "/tmp/bfm_io_test.bfmg";
  bfm::write_bfmg(path, f);
  bfm::BfmgData disk = bfm::read_bfmg(path);
  CHECK(bitwise_equal(disk.values, f.values));
  std::remove(path.c_str());
}

TEST_CASE("builtin disc marks exactly the covered cell centers", "[io]") {
  Grid g({64, 64});
  DensityField f = bfm::builtin_density(g, "disc:0.25,0.25,0.125");
  bfm::detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int) {
    const double dx = g.coord(0, i0) - 0.25;
    const double dy = g.coord(1, i1) - 0.25;
    const double want = (dx * dx + dy * dy <= 0.125 * 0.125) ? 1.0 : 0.0;
    REQUIRE(f.values[lin] == want);
  });

  // Closed boundary: center on a node, radius two cells, the node exactly at
  // distance r is included (all quantities dyadic, so the compare is exact).
  Grid g32({32, 32});
  const double h = g32.spacing(0);
  const double cx = g32.coord(0, 8), cy = g32.coord(1, 8);
  std::ostringstream spec;
  spec.precision(17);
  spec << "disc:" << cx << "," << cy << "," << 2.0 * h;
  DensityField d = bfm::builtin_density(g32, spec.str());
  CHECK(d.values[g32.linear(10, 8)] == 1.0);
  CHECK(d.values[g32.linear(11, 8)] == 0.0);
}

TEST_CASE("builtin square, union, and 3-D shapes", "[io]") {
  Grid g({64, 64});
  DensityField sq = bfm::builtin_density(g, "square:0.5,0.5,0.25");
  bfm::detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int) {
    const double dx = std::fabs(g.coord(0, i0) - 0.5);
    const double dy = std::fabs(g.coord(1, i1) - 0.5);
    const double want = (dx <= 0.125 && dy <= 0.125) ? 1.0 : 0.0;
    REQUIRE(sq.values[lin] == want);
  });

  DensityField a = bfm::builtin_density(g, "disc:0.3,0.3,0.2");
  DensityField u = bfm::builtin_density(g, "disc:0.3,0.3,0.2+square:0.5,0.5,0.25");
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const double want = (a.values[i] == 1.0 || sq.values[i] == 1.0) ? 1.0 : 0.0;
    REQUIRE(u.values[i] == want);
  }

  Grid g3({16, 16, 16});
  DensityField ball = bfm::builtin_density(g3, "ball:0.25,0.25,0.25,0.125");
  DensityField cube = bfm::builtin_density(g3, "cube:0.5,0.5,0.5,0.25");
  bfm::detail::for_each_node(g3, [&](std::size_t lin, int i0, int i1, int i2) {
    const double x = g3.coord(0, i0), y = g3.coord(1, i1), z = g3.coord(2, i2);
    const double dx = x - 0.25, dy = y - 0.25, dz = z - 0.25;
    const double wb =
        (dx * dx + dy * dy + dz * dz <= 0.125 * 0.125) ? 1.0 : 0.0;
    REQUIRE(ball.values[lin] == wb);
    const double wc = (std::fabs(x - 0.5) <= 0.125 && std::fabs(y - 0.5) <= 0.125 &&
                       std::fabs(z - 0.5) <= 0.125)
                          ? 1.0
                          : 0.0;
    REQUIRE(cube.values[lin] == wc);
  });

  // Parsed indicators normalize cleanly.
  CHECK_NOTHROW(bfm::normalize(g, u.values));
}

TEST_CASE("builtin parsing rejects malformed specs", "[io]") {
  Grid g2({16, 16});
  Grid g3({8, 8, 8});
  auto reject = [](const Grid& g, const std::string& s) {
    CHECK_THROWS_AS(bfm::builtin_density(g, s), bfm::InvalidArgument);
  };
  reject(g2, "");
  reject(g2, "blob:0.5,0.5,0.1");           // unknown shape
  reject(g2, "disc:0.5,0.5");               // missing parameter
  reject(g2, "disc:0.5,0.5,0.1,0.2");       // extra parameter
  reject(g2, "disc:a,b,c");                 // junk number
  reject(g2, "disc:0.5,0.5,0");             // radius must be positive
  reject(g2, "square:0.5,0.5,-0.1");        // side must be positive
  reject(g3, "disc:0.5,0.5,0.1");           // 2-D shape on a 3-D grid
  reject(g2, "ball:0.5,0.5,0.5,0.1");       // 3-D shape on a 2-D grid
  reject(g2, "disc:0.5,0.5,0.1+");          // empty union member
}

TEST_CASE("standard benchmark cases carry the exact costs", "[benchmark]") {
  const auto cases = bfm::standard_benchmark_cases();
  REQUIRE(cases.size() == 4);
  CHECK(cases[0].name == "two_discs");
  CHECK(cases[0].dim == 2);
  CHECK(cases[0].exact_cost == 0.25);
  CHECK(cases[1].name == "two_balls");
  CHECK(cases[1].dim == 3);
  CHECK(cases[1].exact_cost == 0.375);
  CHECK(cases[2].name == "four_squares");
  CHECK(cases[2].dim == 2);
  CHECK(cases[2].exact_cost == 0.0625);
  CHECK(cases[3].name == "eight_cubes");
  CHECK(cases[3].dim == 3);
  CHECK(cases[3].exact_cost == 0.09375);

  for (const auto& c : cases) {
    Grid g = c.dim == 2 ? Grid({32, 32}) : Grid({16, 16, 16});
    DensityField mu = bfm::normalize(g, bfm::builtin_density(g, c.mu_spec).values);
    DensityField nu = bfm::normalize(g, bfm::builtin_density(g, c.nu_spec).values);
    CHECK(std::fabs(bfm::integrate(mu) - 1.0) <= 1e-12);
    CHECK(std::fabs(bfm::integrate(nu) - 1.0) <= 1e-12);
  }
}

TEST_CASE("benchmark expectations embed the reference counts", "[benchmark]") {
  auto r1 = bfm::expected_iterations("two_discs", 512, 1e-4);
  REQUIRE(r1.has_value());
  CHECK(r1->lo == 1);
  CHECK(r1->hi == 5);
  auto r2 = bfm::expected_iterations("two_discs", 512, 1e-8);
  REQUIRE(r2.has_value());
  CHECK(r2->lo == 3);
  CHECK(r2->hi == 7);
  auto r3 = bfm::expected_iterations("four_squares", 512, 1e-6);
  REQUIRE(r3.has_value());
  CHECK(r3->lo == 11);
  CHECK(r3->hi == 15);
  auto r4 = bfm::expected_iterations("eight_cubes", 128, 1e-3);
  REQUIRE(r4.has_value());
  CHECK(r4->lo == 1);
  CHECK(r4->hi == 5);
  CHECK_FALSE(bfm::expected_iterations("two_discs", 64, 1e-4).has_value());
  CHECK_FALSE(bfm::expected_iterations("two_discs", 512, 1e-5).has_value());
}

TEST_CASE("benchmark runner reaches the exact cost", "[benchmark]") {
  const auto cases = bfm::standard_benchmark_cases();
  bfm::BenchmarkRow row =
      bfm::run_benchmark_case(cases[0], 64, 1e-4, bfm::SolverMode::back_and_forth, 1);
  CHECK(row.case_name == "two_discs");
  CHECK(row.n == 64);
  CHECK(row.converged);
  CHECK(std::fabs(row.dual_value - 0.25) <= 1e-4);
  CHECK(row.iterations >= 1);
  CHECK(row.iterations <= 40);
  CHECK(row.seconds >= 0.0);
  CHECK(row.status == "n/a");  // no embedded reference at 64^2

  bfm::BenchmarkRow ga =
      bfm::run_benchmark_case(cases[0], 64, 1e-4, bfm::SolverMode::gradient_ascent, 1);
  CHECK(ga.converged);
  CHECK(ga.iterations > row.iterations);

  bfm::BenchmarkRow sq =
      bfm::run_benchmark_case(cases[2], 64, 1e-4, bfm::SolverMode::back_and_forth, 1);
  CHECK(sq.converged);
  CHECK(std::fabs(sq.dual_value - 0.0625) <= 1e-4);
}
