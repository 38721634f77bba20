#pragma once
// File formats and density ingestion.
//
// PGM P2/P5 (8-bit only) with pixel row 0 at the top of the image; node
// (i0, i1) maps to pixel (row H-1-i1, column i0). CSV grids follow the same
// orientation, one image row per line. BFMG is the raw dump format: magic
// "BFMG", then little-endian uint32 dim and extents, float64 spacings, and
// float64 node values in row-major order (last axis fastest). Builtin shape
// specs rasterize by closed cell-center membership, no anti-aliasing.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bfm/errors.hpp"
#include "bfm/grid.hpp"

namespace bfm {

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint8_t> pixels;  // row-major, row 0 on top
};

namespace detail {

// Next whitespace-delimited token, skipping '#' comments to end of line.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) continue;
    break;
  }
  if (c == EOF) throw IoError("pgm: unexpected end of input");
  tok.push_back(static_cast<char>(c));
  while ((c = in.get()) != EOF && !std::isspace(c) && c != '#')
    tok.push_back(static_cast<char>(c));
  if (c == '#') {
    while ((c = in.get()) != EOF && c != '\n') {
    }
  }
  return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw IoError("");
    return v;
  } catch (const IoError&) {
    throw IoError(std::string("pgm: malformed ") + what + " '" + tok + "'");
  } catch (const std::exception&) {
    throw IoError(std::string("pgm: malformed ") + what + " '" + tok + "'");
  }
}

}  // namespace detail

inline PgmImage read_pgm(std::istream& in) {
  const int m0 = in.get();
  const int m1 = in.get();
  if (m0 != 'P' || (m1 != '2' && m1 != '5'))
    throw IoError("pgm: not a P2 or P5 file");
  const bool binary = m1 == '5';

  PgmImage img;
  img.width = detail::pgm_int(in, "width");
  img.height = detail::pgm_int(in, "height");
  img.maxval = detail::pgm_int(in, "maxval");
  if (img.width <= 0 || img.height <= 0)
    throw IoError("pgm: dimensions must be positive");
  if (img.maxval <= 0 || img.maxval > 255)
    throw IoError("pgm: only 8-bit maxval supported");

  const std::size_t count =
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(count);
  if (binary) {
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
      throw IoError("pgm: truncated raster");
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = detail::pgm_int(in, "sample");
      if (v < 0 || v > img.maxval) throw IoError("pgm: sample out of range");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("pgm: cannot open '" + path + "'");
  return read_pgm(f);
}

inline void write_pgm(std::ostream& out, const PgmImage& img) {
  out << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("pgm: write failed");
}

inline void write_pgm(const std::string& path, const PgmImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("pgm: cannot open '" + path + "' for writing");
  write_pgm(f, img);
}

// Raw [0,1] samples; callers normalize before solving.
inline DensityField density_from_pgm(const PgmImage& img, bool invert = false) {
  if (img.width <= 0 || img.height <= 0)
    throw InvalidArgument("density_from_pgm: empty image");
  Grid g({img.width, img.height});
  DensityField f(g);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      double v = static_cast<double>(
                     img.pixels[static_cast<std::size_t>(r) * img.width + c]) /
                 img.maxval;
      if (invert) v = 1.0 - v;
      f.values[g.linear(c, img.height - 1 - r)] = v;
    }
  }
  return f;
}

// Rescales so the field maximum maps to 255.
inline PgmImage pgm_from_density(const DensityField& f) {
  if (f.grid.dim() != 2)
    throw InvalidArgument("pgm_from_density: PGM output is 2-D only");
  PgmImage img;
  img.width = f.grid.extent(0);
  img.height = f.grid.extent(1);
  img.maxval = 255;
  img.pixels.assign(f.values.size(), 0);
  double maxv = 0.0;
  for (double v : f.values) maxv = std::max(maxv, v);
  if (maxv <= 0.0) return img;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double v = f.values[f.grid.linear(c, img.height - 1 - r)];
      const long q = std::lround(v / maxv * 255.0);
      img.pixels[static_cast<std::size_t>(r) * img.width + c] =
          static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
    }
  }
  return img;
}

inline void write_csv(std::ostream& out, const ScalarField& f) {
  const Grid& g = f.grid;
  if (g.dim() > 2) throw InvalidArgument("csv: only 1-D and 2-D fields");
  out.precision(17);
  const int w = g.extent(0);
  const int h = g.dim() == 2 ? g.extent(1) : 1;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c) out << ',';
      out << f.values[g.linear(c, h - 1 - r)];
    }
    out << '\n';
  }
  if (!out) throw IoError("csv: write failed");
}

inline void write_csv(const std::string& path, const ScalarField& f) {
  std::ofstream file(path);
  if (!file) throw IoError("csv: cannot open '" + path + "' for writing");
  write_csv(file, f);
}

inline DensityField read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      const std::size_t b = tok.find_first_not_of(" \t\r");
      const std::size_t e = tok.find_last_not_of(" \t\r");
      if (b == std::string::npos) throw IoError("csv: empty cell");
      tok = tok.substr(b, e - b + 1);
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw IoError("");
      } catch (const std::exception&) {
        throw IoError("csv: malformed number '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("csv: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("csv: no data");

  const int w = static_cast<int>(rows.front().size());
  const int h = static_cast<int>(rows.size());
  if (h == 1) {
    DensityField f(Grid({w}));
    f.values = rows.front();
    return f;
  }
  DensityField f(Grid({w, h}));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      f.values[f.grid.linear(c, h - 1 - r)] = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return f;
}

inline DensityField read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("csv: cannot open '" + path + "'");
  return read_csv(f);
}

struct BfmgData {
  Grid grid;
  std::vector<double> values;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw IoError("bfmg: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw IoError("bfmg: truncated payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

inline void write_bfmg(std::ostream& out, const Grid& g,
                       const std::vector<double>& values) {
  if (values.size() != g.size())
    throw InvalidArgument("bfmg: value count does not match grid");
  out.write("BFMG", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a)
    detail::put_u32(out, static_cast<std::uint32_t>(g.extent(a)));
  for (int a = 0; a < g.dim(); ++a) detail::put_f64(out, g.spacing(a));
  for (double v : values) detail::put_f64(out, v);
  if (!out) throw IoError("bfmg: write failed");
}

inline void write_bfmg(std::ostream& out, const ScalarField& f) {
  write_bfmg(out, f.grid, f.values);
}

inline void write_bfmg(const std::string& path, const Grid& g,
                       const std::vector<double>& values) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("bfmg: cannot open '" + path + "' for writing");
  write_bfmg(f, g, values);
}

inline void write_bfmg(const std::string& path, const ScalarField& f) {
  write_bfmg(path, f.grid, f.values);
}

inline BfmgData read_bfmg(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "BFMG", 4) != 0)
    throw IoError("bfmg: bad magic");
  const std::uint32_t dim = detail::get_u32(in);
  if (dim < 1 || dim > 3) throw IoError("bfmg: unsupported dimension");
  std::vector<int> extents(dim);
  std::uint64_t total = 1;
  for (auto& n : extents) {
    const std::uint32_t e = detail::get_u32(in);
    if (e == 0 || e > (1u << 20)) throw IoError("bfmg: implausible extent");
    total *= e;
    if (total > (std::uint64_t{1} << 31)) throw IoError("bfmg: implausible size");
    n = static_cast<int>(e);
  }
  BfmgData data;
  data.grid = Grid(extents);
  for (std::uint32_t a = 0; a < dim; ++a) {
    const double sp = detail::get_f64(in);
    if (std::fabs(sp - data.grid.spacing(static_cast<int>(a))) >
        1e-9 * data.grid.spacing(static_cast<int>(a)))
      throw IoError("bfmg: spacing does not match a unit-domain grid");
  }
  data.values.resize(data.grid.size());
  for (auto& v : data.values) v = detail::get_f64(in);
  return data;
}

inline BfmgData read_bfmg(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("bfmg: cannot open '" + path + "'");
  return read_bfmg(f);
}

namespace detail {

struct BuiltinShape {
  bool euclidean = true;  // disc/ball vs square/cube
  int dim = 2;
  double center[3] = {0.0, 0.0, 0.0};
  double radius = 0.0;  // half the side for square/cube
};

inline double builtin_number(const std::string& tok, const std::string& spec) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw InvalidArgument("");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("builtin: malformed number '" + tok + "' in '" + spec + "'");
  }
}

inline BuiltinShape parse_builtin_shape(const std::string& tok) {
  const std::size_t colon = tok.find(':');
  const std::string name = tok.substr(0, colon);
  BuiltinShape s;
  if (name == "disc") {
    s.euclidean = true;
    s.dim = 2;
  } else if (name == "ball") {
    s.euclidean = true;
    s.dim = 3;
  } else if (name == "square") {
    s.euclidean = false;
    s.dim = 2;
  } else if (name == "cube") {
    s.euclidean = false;
    s.dim = 3;
  } else {
    throw InvalidArgument("builtin: unknown shape '" + name + "'");
  }

  std::vector<double> params;
  if (colon != std::string::npos) {
    std::stringstream ps(tok.substr(colon + 1));
    std::string p;
    while (std::getline(ps, p, ',')) params.push_back(builtin_number(p, tok));
  }
  if (static_cast<int>(params.size()) != s.dim + 1)
    throw InvalidArgument("builtin: '" + name + "' takes " +
                          std::to_string(s.dim + 1) + " parameters");
  for (int a = 0; a < s.dim; ++a) s.center[a] = params[static_cast<std::size_t>(a)];
  const double extent = params.back();
  if (!(extent > 0.0))
    throw InvalidArgument("builtin: '" + name + "' needs a positive size");
  s.radius = s.euclidean ? extent : 0.5 * extent;
  return s;
}

inline bool builtin_contains(const BuiltinShape& s, const double* x) {
  if (s.euclidean) {
    double d2 = 0.0;
    for (int a = 0; a < s.dim; ++a) {
      const double d = x[a] - s.center[a];
      d2 += d * d;
    }
    return d2 <= s.radius * s.radius;
  }
  for (int a = 0; a < s.dim; ++a) {
    if (std::fabs(x[a] - s.center[a]) > s.radius) return false;
  }
  return true;
}

}  // namespace detail

namespace detail {

// '+' separates shapes only when a shape name follows; this keeps exponents
// like 1e+2 intact.
inline std::vector<std::string> split_builtin_spec(const std::string& spec) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i] == '+' && i + 1 < spec.size() &&
        std::isalpha(static_cast<unsigned char>(spec[i + 1]))) {
      tokens.push_back(spec.substr(start, i - start));
      start = i + 1;
    }
  }
  tokens.push_back(spec.substr(start));
  return tokens;
}

}  // namespace detail

// Grid dimension a builtin spec lives in (from its first shape).
inline int builtin_dim(const std::string& spec) {
  if (spec.empty()) throw InvalidArgument("builtin: empty spec");
  return detail::parse_builtin_shape(detail::split_builtin_spec(spec).front()).dim;
}

// Indicator of a '+'-separated union of builtin shapes, e.g.
// "disc:0.25,0.25,0.125" or "square:...+square:...". Not normalized.
inline DensityField builtin_density(const Grid& g, const std::string& spec) {
  if (spec.empty()) throw InvalidArgument("builtin: empty spec");
  const std::vector<std::string> tokens = detail::split_builtin_spec(spec);

  std::vector<detail::BuiltinShape> shapes;
  for (const auto& tok : tokens) {
    if (tok.empty()) throw InvalidArgument("builtin: empty union member");
    shapes.push_back(detail::parse_builtin_shape(tok));
    if (shapes.back().dim != g.dim())
      throw InvalidArgument("builtin: shape dimension does not match the grid");
  }

  DensityField f(g);
  detail::for_each_node(g, [&](std::size_t lin, int i0, int i1, int i2) {
    const double x[3] = {g.coord(0, i0), g.dim() > 1 ? g.coord(1, i1) : 0.0,
                         g.dim() > 2 ? g.coord(2, i2) : 0.0};
    for (const auto& s : shapes) {
      if (detail::builtin_contains(s, x)) {
        f.values[lin] = 1.0;
        break;
      }
    }
  });
  return f;
}

}  // namespace bfm
