#include "speckleflow/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "speckleflow/error.hpp"

namespace speckleflow::io {
namespace {

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((bits >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
  return bits;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, std::size_t offset) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw FormatError("malformed number '" + t + "'", offset);
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_f64grid(std::ostream& out, const F64Grid& grid) {
  const std::size_t expected = static_cast<std::size_t>(grid.ncomp) * grid.nx * grid.ny * grid.nz;
  if (grid.data.size() != expected) {
    throw Error(ErrorKind::ShapeMismatch, "F64GRID payload length does not match header");
  }
  out << "F64GRID " << grid.ncomp << ' ' << grid.nx << ' ' << grid.ny << ' ' << grid.nz << '\n';
  for (double v : grid.data) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing F64GRID payload");
}

F64Grid read_f64grid(std::istream& in) {
  std::string header;
  std::size_t offset = 0;
  for (char c; in.get(c);) {
    ++offset;
    if (c == '\n') break;
    header.push_back(c);
    if (header.size() > 256) throw FormatError("F64GRID header line too long", offset);
  }
  std::istringstream hs(header);
  std::string magic;
  F64Grid grid;
  if (!(hs >> magic) || magic != "F64GRID") throw FormatError("missing F64GRID magic", 0);
  if (!(hs >> grid.ncomp >> grid.nx >> grid.ny >> grid.nz) || grid.ncomp <= 0 || grid.nx <= 0 ||
      grid.ny <= 0 || grid.nz <= 0) {
    throw FormatError("malformed F64GRID header '" + header + "'", 0);
  }
  std::string rest;
  if (hs >> rest) throw FormatError("trailing tokens in F64GRID header", 0);
  const std::size_t count = static_cast<std::size_t>(grid.ncomp) * grid.nx * grid.ny * grid.nz;
  grid.data.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    if (in.gcount() != static_cast<std::streamsize>(sizeof bits)) {
      throw FormatError("truncated F64GRID payload", offset + static_cast<std::size_t>(in.gcount()));
    }
    grid.data[k] = std::bit_cast<double>(to_little_endian(bits));
    offset += sizeof bits;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("unexpected bytes after F64GRID payload", offset);
  }
  return grid;
}

void write_f64grid(const std::filesystem::path& path, const F64Grid& grid) {
  auto out = open_out(path);
  write_f64grid(out, grid);
}

F64Grid read_f64grid(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_f64grid(in);
}

F64Grid to_f64grid(const ScalarGrid& g) {
  return {1, g.nx(), g.ny(), 1, {g.values().begin(), g.values().end()}};
}

F64Grid to_f64grid(const VectorGrid& u) {
  return {2, u.nx(), u.ny(), 1, {u.values().begin(), u.values().end()}};
}

F64Grid to_f64grid(const Volume& v) {
  return {1, v.nx(), v.ny(), v.nz(), {v.values().begin(), v.values().end()}};
}

ScalarGrid to_scalar_grid(const F64Grid& g) {
  if (g.ncomp != 1 || g.nz != 1) {
    throw Error(ErrorKind::ShapeMismatch, "expected a single-component planar F64GRID");
  }
  return ScalarGrid(g.nx, g.ny, g.data);
}

VectorGrid to_vector_grid(const F64Grid& g) {
  if (g.ncomp != 2 || g.nz != 1) {
    throw Error(ErrorKind::ShapeMismatch, "expected a two-component planar F64GRID");
  }
  return VectorGrid(g.nx, g.ny, g.data);
}

Volume to_volume(const F64Grid& g) {
  if (g.ncomp != 1) throw Error(ErrorKind::ShapeMismatch, "expected a single-component F64GRID");
  return Volume(g.nx, g.ny, g.nz, g.data);
}

void write_samples_csv(std::ostream& out, const SampleList& samples) {
  out << "x,y,z,ux,uy,uz\n";
  for (const auto& s : samples) {
    out << format_double(s.position[0]) << ',' << format_double(s.position[1]) << ','
        << format_double(s.position[2]) << ',' << format_double(s.displacement[0]) << ','
        << format_double(s.displacement[1]) << ',' << format_double(s.displacement[2]) << '\n';
  }
}

SampleList read_samples_csv(std::istream& in) {
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || trim(line) != "x,y,z,ux,uy,uz") {
    throw FormatError("samples CSV must start with header 'x,y,z,ux,uy,uz'", 0);
  }
  offset += line.size() + 1;
  SampleList samples;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (trim(line).empty()) continue;
    double fields[6];
    std::size_t pos = 0;
    for (int f = 0; f < 6; ++f) {
      const std::size_t comma = line.find(',', pos);
      const bool last = f == 5;
      if (last != (comma == std::string::npos)) {
        throw FormatError("samples CSV row must have 6 fields", line_start + pos);
      }
      const std::string field = line.substr(pos, last ? std::string::npos : comma - pos);
      fields[f] = parse_double(field, line_start + pos);
      pos = comma + 1;
    }
    samples.push_back({{fields[0], fields[1], fields[2]}, {fields[3], fields[4], fields[5]}});
  }
  return samples;
}

void write_samples_csv(const std::filesystem::path& path, const SampleList& samples) {
  auto out = open_out(path);
  write_samples_csv(out, samples);
}

SampleList read_samples_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_samples_csv(in);
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    const std::string content = trim(line.substr(0, line.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw FormatError("expected 'key = value'", line_start);
    std::string key = trim(content.substr(0, eq));
    std::string value = trim(content.substr(eq + 1));
    if (key.empty()) throw FormatError("empty key", line_start);
    if (!kv.emplace(key, value).second) throw FormatError("duplicate key '" + key + "'", line_start);
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_key_values(in);
}

const std::string* ConfigReader::find(const std::string& key) {
  used_.push_back(key);
  const auto it = kv_.find(key);
  return it == kv_.end() ? nullptr : &it->second;
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (v->empty() || end != v->c_str() + v->size()) {
    throw Error(ErrorKind::FormatError, "key '" + key + "' expects a number, got '" + *v + "'");
  }
  return d;
}

int ConfigReader::get_int(const std::string& key, int fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  char* end = nullptr;
  const long n = std::strtol(v->c_str(), &end, 10);
  if (v->empty() || end != v->c_str() + v->size()) {
    throw Error(ErrorKind::FormatError, "key '" + key + "' expects an integer, got '" + *v + "'");
  }
  return static_cast<int>(n);
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw Error(ErrorKind::FormatError, "key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

void ConfigReader::reject_unknown() const {
  for (const auto& [key, value] : kv_) {
    if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
      throw Error(ErrorKind::FormatError, "unknown configuration key '" + key + "'");
    }
  }
}

void write_pgm(const std::filesystem::path& path, const Pgm& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorKind::ShapeMismatch, "PGM pixel count does not match extents");
  }
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

Pgm read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string magic;
  Pgm image;
  int maxval = 0;
  if (!(in >> magic) || magic != "P5") throw FormatError("not a binary PGM", 0);
  if (!(in >> image.width >> image.height >> maxval) || image.width <= 0 || image.height <= 0 ||
      maxval != 255) {
    throw FormatError("unsupported PGM header", 2);
  }
  in.get();
  const std::size_t header = static_cast<std::size_t>(in.tellg());
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != image.pixels.size()) {
    throw FormatError("truncated PGM payload", header + static_cast<std::size_t>(in.gcount()));
  }
  return image;
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace speckleflow::io
