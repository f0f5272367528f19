// SPDX-License-Identifier: Apache-2.0
#include "clstm/pgm.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "clstm/errors.hpp"

namespace clstm {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  unsigned next_number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError(name_ + ": malformed PGM header");
    }
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<unsigned>(bytes_[pos_++] - '0');
      if (value > 1'000'000) throw FormatError(name_ + ": PGM header value out of range");
    }
    return static_cast<unsigned>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError(name_ + ": missing separator before PGM raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const std::string& name_;
  std::size_t pos_ = 2;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

}  // namespace

GrayImage parse_pgm(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError(name + ": not a binary PGM (P5) file");
  }
  HeaderReader header(bytes, name);
  GrayImage img;
  img.width = header.next_number();
  img.height = header.next_number();
  img.maxval = header.next_number();
  if (img.width == 0 || img.height == 0) throw FormatError(name + ": empty PGM");
  if (img.maxval == 0 || img.maxval > 65535) throw FormatError(name + ": invalid PGM maxval");
  const std::size_t start = header.raster_start();
  const std::size_t bytes_per_px = img.maxval < 256 ? 1 : 2;
  const std::size_t count = img.width * img.height;
  if (bytes.size() - start < count * bytes_per_px) throw FormatError(name + ": truncated PGM raster");
  img.pixels.resize(count);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = bytes_per_px == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
    if (v > img.maxval) throw FormatError(name + ": pixel exceeds maxval");
    img.pixels[i] = static_cast<std::uint16_t>(v);
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) { return parse_pgm(read_all(path), path.string()); }

std::string encode_pgm(const GrayImage& image) {
  if (image.maxval != 255) throw FormatError("encode_pgm writes 8-bit images only");
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (auto p : image.pixels) out.push_back(static_cast<char>(p));
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file_atomic(path, encode_pgm(image));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace clstm
