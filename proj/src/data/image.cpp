#include "usmae/data/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "usmae/errors.hpp"

namespace usmae::data {

namespace {

struct Pnm {
  char kind = 0;  // '5' or '6'
  std::size_t width = 0, height = 0, maxval = 0;
  std::vector<std::uint8_t> raster;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

Pnm parse_pnm(const std::string& bytes, const std::string& what) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* field) {
    skip_space();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw ParseError(what + ": " + field + " too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw ParseError(what + ": missing " + field);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError(what + ": not a binary PGM/PPM file");
  }
  Pnm p;
  p.kind = bytes[1];
  pos = 2;
  p.width = number("width");
  p.height = number("height");
  p.maxval = number("maxval");
  if (p.width == 0 || p.height == 0) throw ParseError(what + ": empty image");
  if (p.maxval == 0 || p.maxval > 255) throw ParseError(what + ": only 8-bit images are supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError(what + ": malformed header");
  }
  ++pos;
  const std::size_t n = p.width * p.height * (p.kind == '6' ? 3 : 1);
  if (bytes.size() - pos < n) throw ParseError(what + ": truncated raster");
  p.raster.assign(bytes.begin() + pos, bytes.begin() + pos + n);
  if (p.maxval != 255) {
    for (auto& v : p.raster) v = static_cast<std::uint8_t>((v * 255 + p.maxval / 2) / p.maxval);
  }
  return p;
}

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::uint8_t>& raster) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write image " + path.string());
  f << header;
  f.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!f) throw IoError("failed writing image " + path.string());
}

}  // namespace

RgbImage to_rgb(const GrayImage& gray) {
  RgbImage out(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = gray.pixels[i];
  }
  return out;
}

RgbImage read_rgb(const std::filesystem::path& path) {
  auto p = parse_pnm(read_all(path), path.string());
  if (p.kind == '6') {
    RgbImage img;
    img.width = p.width;
    img.height = p.height;
    img.pixels = std::move(p.raster);
    return img;
  }
  GrayImage g;
  g.width = p.width;
  g.height = p.height;
  g.pixels = std::move(p.raster);
  return to_rgb(g);
}

GrayImage read_gray(const std::filesystem::path& path) {
  auto p = parse_pnm(read_all(path), path.string());
  if (p.kind != '5') throw ParseError(path.string() + ": expected a grayscale (P5) image");
  GrayImage g;
  g.width = p.width;
  g.height = p.height;
  g.pixels = std::move(p.raster);
  return g;
}

bool is_color_pnm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image " + path.string());
  char magic[2] = {0, 0};
  f.read(magic, 2);
  return magic[0] == 'P' && magic[1] == '6';
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  write_file(path, "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n",
             img.pixels);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  write_file(path, "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n",
             img.pixels);
}

}  // namespace usmae::data
