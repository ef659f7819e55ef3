#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "speckleflow/grid.hpp"
#include "speckleflow/samples.hpp"

namespace speckleflow::io {

/// Raw content of an F64GRID file: an ASCII header line
/// "F64GRID <ncomp> <nx> <ny> <nz>\n" followed by ncomp*nx*ny*nz little-endian
/// doubles, component innermost, then x, then y, z outermost.
struct F64Grid {
  int ncomp = 1;
  int nx = 0;
  int ny = 0;
  int nz = 1;
  std::vector<double> data;
};

void write_f64grid(std::ostream& out, const F64Grid& grid);
F64Grid read_f64grid(std::istream& in);
void write_f64grid(const std::filesystem::path& path, const F64Grid& grid);
F64Grid read_f64grid(const std::filesystem::path& path);

F64Grid to_f64grid(const ScalarGrid& g);
F64Grid to_f64grid(const VectorGrid& u);
F64Grid to_f64grid(const Volume& v);
ScalarGrid to_scalar_grid(const F64Grid& g);
VectorGrid to_vector_grid(const F64Grid& g);
Volume to_volume(const F64Grid& g);

/// Samples CSV: header "x,y,z,ux,uy,uz", 17 significant digits, '\n' endings.
void write_samples_csv(std::ostream& out, const SampleList& samples);
SampleList read_samples_csv(std::istream& in);
void write_samples_csv(const std::filesystem::path& path, const SampleList& samples);
SampleList read_samples_csv(const std::filesystem::path& path);

/// "key = value" lines; '#' starts a comment, blank lines are skipped.
/// Duplicate keys and lines without '=' are FormatErrors.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);

/// Typed access to a KeyValues map that remembers which keys were consumed,
/// so leftovers can be rejected.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValues& kv) : kv_(kv) {}

  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  /// Throws FormatError naming the first key that was never read.
  void reject_unknown() const;

 private:
  const std::string* find(const std::string& key);

  const KeyValues& kv_;
  std::vector<std::string> used_;
};

/// Binary 8-bit greyscale PGM (P5).
struct Pgm {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;
};
void write_pgm(const std::filesystem::path& path, const Pgm& image);
Pgm read_pgm(const std::filesystem::path& path);

/// Shared number formatting for all text outputs.
std::string format_double(double v);

std::string read_text(const std::filesystem::path& path);

}  // namespace speckleflow::io
