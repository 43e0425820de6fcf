#pragma once

#include <png.h>

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/raster.hpp"

namespace hsharp {

// Raster files are ENVI-style pairs: a text header `<stem>.hdr` and a raw
// band-sequential payload `<stem>.img` of little-endian 32-bit floats.
// Either member of the pair (or the bare stem) can be passed as the path.

struct RasterPaths {
  std::filesystem::path header;
  std::filesystem::path payload;
};

inline RasterPaths raster_paths(const std::filesystem::path& path) {
  std::filesystem::path stem = path;
  const auto ext = path.extension().string();
  if (ext == ".hdr" || ext == ".img") stem.replace_extension();
  RasterPaths p;
  p.header = stem;
  p.header += ".hdr";
  p.payload = stem;
  p.payload += ".img";
  return p;
}

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

/// Parses `key = value` lines; brace-delimited values may span lines.
inline std::map<std::string, std::string> parse_header(std::istream& in) {
  std::map<std::string, std::string> fields;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (trim(line) == "ENVI") continue;
    }
    if (trim(line).empty() || trim(line)[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_validation("malformed header line: '" + line + "'");
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more)) fail_validation("unterminated brace value for '" + key + "'");
        value += " " + trim(more);
      }
      const auto close = value.find('}');
      value = trim(value.substr(1, close - 1));
    }
    fields[key] = value;
  }
  return fields;
}

inline std::size_t parse_count(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) fail_validation("header is missing '" + key + "'");
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size() || v < 0) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail_validation("header field '" + key + "' is not a count: '" + it->second + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    fail_validation("cannot parse " + what + " value '" + s + "'");
  }
}

}  // namespace detail

inline void write_raster(const HyperCube& cube, const std::filesystem::path& path) {
  const RasterPaths p = raster_paths(path);
  std::ostringstream hdr;
  hdr << "ENVI\n"
      << "description = {hsharp raster}\n"
      << "samples = " << cube.cols() << "\n"
      << "lines = " << cube.rows() << "\n"
      << "bands = " << cube.bands() << "\n"
      << "header offset = 0\n"
      << "file type = ENVI Standard\n"
      << "data type = 4\n"
      << "interleave = bsq\n"
      << "byte order = 0\n"
      << "gsd_m = " << detail::format_real(cube.gsd_m()) << "\n";
  if (cube.has_wavelengths()) {
    hdr << "wavelength units = Nanometers\n" << "wavelength = {";
    for (std::size_t b = 0; b < cube.bands(); ++b)
      hdr << (b ? ", " : "") << detail::format_real(cube.wavelengths_nm()[b]);
    hdr << "}\n";
  }
  if (!cube.band_names().empty()) {
    hdr << "band names = {";
    for (std::size_t b = 0; b < cube.bands(); ++b) hdr << (b ? ", " : "") << cube.band_names()[b];
    hdr << "}\n";
  }

  std::ofstream h(p.header, std::ios::binary | std::ios::trunc);
  if (!h) fail_io("cannot open '" + p.header.string() + "' for writing");
  h << hdr.str();
  if (!h) fail_io("failed writing '" + p.header.string() + "'");

  std::ofstream d(p.payload, std::ios::binary | std::ios::trunc);
  if (!d) fail_io("cannot open '" + p.payload.string() + "' for writing");
  if constexpr (std::endian::native == std::endian::little) {
    d.write(reinterpret_cast<const char*>(cube.data().data()),
            static_cast<std::streamsize>(cube.data().size() * sizeof(float)));
  } else {
    for (float v : cube.data()) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = __builtin_bswap32(bits);
      d.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!d) fail_io("failed writing '" + p.payload.string() + "'");
}

inline void write_raster(const PanImage& pan, const std::filesystem::path& path) {
  write_raster(as_cube(pan), path);
}

/// Reads a raster pair and normalizes it to band-major order.
inline HyperCube read_cube(const std::filesystem::path& path) {
  const RasterPaths p = raster_paths(path);
  std::ifstream h(p.header);
  if (!h) fail_io("cannot open header '" + p.header.string() + "'");
  const auto f = detail::parse_header(h);

  const std::size_t cols = detail::parse_count(f, "samples");
  const std::size_t rows = detail::parse_count(f, "lines");
  const std::size_t bands = detail::parse_count(f, "bands");
  if (rows == 0 || cols == 0 || bands == 0) fail_validation("header declares an empty raster");
  if (detail::parse_count(f, "data type") != 4)
    fail_validation("unsupported data type code " + f.at("data type") + " (only 4 = float32)");
  std::string interleave = "bsq";
  if (auto it = f.find("interleave"); it != f.end()) interleave = detail::lower(it->second);
  if (interleave != "bsq" && interleave != "bil" && interleave != "bip")
    fail_validation("unsupported interleave '" + interleave + "'");
  std::size_t byte_order = 0;
  if (f.count("byte order")) byte_order = detail::parse_count(f, "byte order");
  if (byte_order > 1) fail_validation("byte order must be 0 or 1");
  std::size_t offset = 0;
  if (f.count("header offset")) offset = detail::parse_count(f, "header offset");

  std::vector<double> wavelengths;
  if (auto it = f.find("wavelength"); it != f.end()) {
    for (const auto& item : detail::split_list(it->second))
      wavelengths.push_back(detail::parse_real(item, "wavelength"));
    if (wavelengths.size() != bands)
      fail_validation("header lists " + std::to_string(wavelengths.size()) +
                      " wavelengths for " + std::to_string(bands) + " bands");
  }
  double gsd = 1.0;
  if (auto it = f.find("gsd_m"); it != f.end()) gsd = detail::parse_real(it->second, "gsd_m");
  std::vector<std::string> names;
  if (auto it = f.find("band names"); it != f.end()) {
    names = detail::split_list(it->second);
    if (names.size() != bands) names.clear();
  }

  std::ifstream d(p.payload, std::ios::binary);
  if (!d) fail_io("cannot open payload '" + p.payload.string() + "'");
  d.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(d.tellg());
  const std::size_t count = bands * rows * cols;
  if (file_size != offset + count * sizeof(float))
    fail_validation("payload holds " + std::to_string(file_size) + " bytes, header declares " +
                    std::to_string(offset + count * sizeof(float)));
  d.seekg(static_cast<std::streamoff>(offset));
  std::vector<std::uint32_t> raw(count);
  d.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!d) fail_io("failed reading '" + p.payload.string() + "'");

  const bool file_little = byte_order == 0;
  const bool native_little = std::endian::native == std::endian::little;
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = raw[i];
    if (file_little != native_little) bits = __builtin_bswap32(bits);
    float v = std::bit_cast<float>(bits);
    std::size_t b, r, c;
    if (interleave == "bsq") {
      b = i / (rows * cols);
      r = (i / cols) % rows;
      c = i % cols;
    } else if (interleave == "bil") {
      r = i / (bands * cols);
      b = (i / cols) % bands;
      c = i % cols;
    } else {
      r = i / (cols * bands);
      c = (i / bands) % cols;
      b = i % bands;
    }
    data[(b * rows + r) * cols + c] = v;
  }
  HyperCube cube(bands, rows, cols, std::move(data), std::move(wavelengths), gsd, std::move(names));
  cube.require_finite();
  return cube;
}

inline PanImage read_pan(const std::filesystem::path& path) {
  HyperCube cube = read_cube(path);
  if (cube.bands() != 1)
    fail_validation("'" + path.string() + "' has " + std::to_string(cube.bands()) +
                    " bands; a panchromatic raster must have exactly 1");
  return as_pan(cube);
}

/// Single-band files without wavelength metadata read as PanImage.
inline std::variant<HyperCube, PanImage> read_raster(const std::filesystem::path& path) {
  HyperCube cube = read_cube(path);
  if (cube.bands() == 1 && !cube.has_wavelengths()) return as_pan(cube);
  return cube;
}

inline void write_png(const RgbComposite& img, const std::filesystem::path& path) {
  if (img.rows == 0 || img.cols == 0) fail_validation("empty composite");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) fail_io("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail_io("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail_io("libpng initialization failed");
  }
  std::vector<std::uint8_t> row(3 * img.cols);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail_io("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < img.rows; ++r) {
    for (std::size_t c = 0; c < img.cols; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) row[3 * c + ch] = img.at(ch, r, c);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace hsharp
