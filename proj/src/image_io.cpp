#include "pnp/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pnp/error.hpp"

namespace pnp {
namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      tok.push_back(bytes_[pos_++]);
    if (tok.empty()) fail(ErrorKind::Format, "truncated header in '" + path_.string() + "'");
    return tok;
  }

  long number() {
    const std::string tok = token();
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::Format, "bad header field '" + tok + "' in '" + path_.string() + "'");
    }
  }

  double real() {
    const std::string tok = token();
    try {
      return std::stod(tok);
    } catch (const std::exception&) {
      fail(ErrorKind::Format, "bad header field '" + tok + "' in '" + path_.string() + "'");
    }
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size()) fail(ErrorKind::Format, "missing raster in '" + path_.string() + "'");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

Image read_pnm(const std::string& bytes, const std::filesystem::path& path, int channels) {
  HeaderReader header(bytes, path);
  header.token();
  const long w = header.number();
  const long h = header.number();
  const long maxval = header.number();
  if (w < 1 || h < 1) fail(ErrorKind::Format, "invalid dimensions in '" + path.string() + "'");
  if (maxval != 255 && maxval != 65535)
    fail(ErrorKind::Format, "unsupported maxval " + std::to_string(maxval) + " in '" + path.string() + "'");
  const std::size_t offset = header.raster_offset();
  const std::size_t bps = maxval == 255 ? 1 : 2;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() < offset + count * bps) fail(ErrorKind::Format, "truncated raster in '" + path.string() + "'");

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = (static_cast<std::size_t>(y) * w + x) * channels + c;
        const unsigned v = bps == 1 ? raw[i] : (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1];
        img.at(c, static_cast<int>(y), static_cast<int>(x)) = v * scale;
      }
    }
  }
  return img;
}

Image read_pfm(const std::string& bytes, const std::filesystem::path& path, int channels) {
  HeaderReader header(bytes, path);
  header.token();
  const long w = header.number();
  const long h = header.number();
  const double scale = header.real();
  if (w < 1 || h < 1) fail(ErrorKind::Format, "invalid dimensions in '" + path.string() + "'");
  const bool little = scale < 0.0;
  const std::size_t offset = header.raster_offset();
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() < offset + count * 4) fail(ErrorKind::Format, "truncated raster in '" + path.string() + "'");

  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  const bool swap = little != (std::endian::native == std::endian::little);
  for (long row = 0; row < h; ++row) {
    const long y = h - 1 - row;  // PFM rows run bottom to top
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = (static_cast<std::size_t>(row) * w + x) * channels + c;
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + offset + 4 * i, 4);
        if (swap) bits = __builtin_bswap32(bits);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) fail(ErrorKind::Format, "non-finite sample in '" + path.string() + "'");
        img.at(c, static_cast<int>(y), static_cast<int>(x)) = f;
      }
    }
  }
  return img;
}

void write_bytes(const std::filesystem::path& path, const std::string& header, const std::string& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << header;
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() < 2) fail(ErrorKind::Format, "'" + path.string() + "' is too short to be an image");
  const std::string magic = bytes.substr(0, 2);
  if (magic == "P5") return read_pnm(bytes, path, 1);
  if (magic == "P6") return read_pnm(bytes, path, 3);
  if (magic == "Pf") return read_pfm(bytes, path, 1);
  if (magic == "PF") return read_pfm(bytes, path, 3);
  fail(ErrorKind::Format, "unknown image magic '" + magic + "' in '" + path.string() + "'");
}

ImageFormat format_from_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return ImageFormat::Pgm;
  if (ext == ".ppm") return ImageFormat::Ppm;
  if (ext == ".pfm") return ImageFormat::Pfm;
  fail(ErrorKind::Format, "unsupported image extension '" + ext + "' for '" + path.string() + "'");
}

void write_image(const std::filesystem::path& path, const Image& img, int bit_depth) {
  write_image(path, img, format_from_extension(path), bit_depth);
}

void write_image(const std::filesystem::path& path, const Image& img, ImageFormat format, int bit_depth) {
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();

  if (format == ImageFormat::Pfm) {
    require(ch == 1 || ch == 3, ErrorKind::Format, "PFM supports 1 or 3 channels");
    const std::string header =
        std::string(ch == 1 ? "Pf" : "PF") + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
    std::string raster(static_cast<std::size_t>(w) * h * ch * 4, '\0');
    std::size_t i = 0;
    for (int row = 0; row < h; ++row) {
      const int y = h - 1 - row;
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < ch; ++c, ++i) {
          std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(c, y, x)));
          if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
          std::memcpy(raster.data() + 4 * i, &bits, 4);
        }
      }
    }
    write_bytes(path, header, raster);
    return;
  }

  const int want = format == ImageFormat::Pgm ? 1 : 3;
  require(ch == want, ErrorKind::Format,
          std::string(format == ImageFormat::Pgm ? "PGM" : "PPM") + " needs " + std::to_string(want) +
              " channel(s), image has " + std::to_string(ch));
  require(bit_depth == 8 || bit_depth == 16, ErrorKind::InvalidArgument, "bit depth must be 8 or 16");
  const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
  const std::string header = std::string(want == 1 ? "P5" : "P6") + "\n" + std::to_string(w) + " " +
                             std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  const std::size_t bps = bit_depth / 8;
  std::string raster(static_cast<std::size_t>(w) * h * ch * bps, '\0');
  std::size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c, ++i) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * maxval));
        if (bps == 1) {
          raster[i] = static_cast<char>(q);
        } else {
          raster[2 * i] = static_cast<char>(q >> 8);
          raster[2 * i + 1] = static_cast<char>(q & 0xff);
        }
      }
    }
  }
  write_bytes(path, header, raster);
}

}  // namespace pnp
