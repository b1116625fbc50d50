#include "pnp/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pnp/error.hpp"
#include "pnp/parallel.hpp"

namespace pnp {

void CnnModel::validate() const {
  require(input_channels == 1 || input_channels == 3, ErrorKind::Format,
          "model input channels must be 1 or 3, got " + std::to_string(input_channels));
  require(!layers.empty(), ErrorKind::Format, "model has no layers");
  int expected = input_channels;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string where = "layer " + std::to_string(l);
    require(layer.in_channels == expected, ErrorKind::Format,
            where + ": channel chain broken, expected " + std::to_string(expected) + " input channels, got " +
                std::to_string(layer.in_channels));
    require(layer.out_channels >= 1, ErrorKind::Format, where + ": no output channels");
    require(layer.weights.size() == static_cast<std::size_t>(layer.in_channels) * layer.out_channels * 9,
            ErrorKind::Format, where + ": weight count mismatch");
    require(layer.bias.size() == static_cast<std::size_t>(layer.out_channels), ErrorKind::Format,
            where + ": bias count mismatch");
    for (float w : layer.weights) require(std::isfinite(w), ErrorKind::Format, where + ": non-finite weight");
    for (float b : layer.bias) require(std::isfinite(b), ErrorKind::Format, where + ": non-finite bias");
    expected = layer.out_channels;
  }
  require(expected == input_channels, ErrorKind::Format,
          "channel chain broken: last layer outputs " + std::to_string(expected) + " channels, model input has " +
              std::to_string(input_channels));
  require(!layers.back().relu, ErrorKind::Format, "last layer must not apply ReLU");
}

namespace {

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    const auto* p = take(4);
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  }
  std::uint8_t u8() { return *take(1); }
  float f32() { return std::bit_cast<float>(u32()); }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const unsigned char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::Format, "weights file truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

}  // namespace

CnnModel parse_model(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kPnpwMagic, 4) != 0)
    fail(ErrorKind::Format, "bad magic: not a PNPW weights file");
  ByteReader in(bytes);
  in.u32();
  const std::uint32_t version = in.u32();
  require(version == kPnpwVersion, ErrorKind::Format, "unsupported PNPW version " + std::to_string(version));
  CnnModel m;
  m.input_channels = static_cast<int>(in.u32());
  m.residual = in.u8() != 0;
  const std::uint32_t count = in.u32();
  require(count >= 1 && count <= 4096, ErrorKind::Format, "implausible layer count " + std::to_string(count));
  for (std::uint32_t l = 0; l < count; ++l) {
    ConvLayer layer;
    const std::uint32_t in_ch = in.u32();
    const std::uint32_t out_ch = in.u32();
    layer.relu = in.u8() != 0;
    const std::uint64_t n = std::uint64_t(in_ch) * out_ch * 9;
    if (in_ch == 0 || out_ch == 0 || (n + out_ch) * 4 > in.remaining())
      fail(ErrorKind::Format, "weights file truncated in layer " + std::to_string(l));
    layer.in_channels = static_cast<int>(in_ch);
    layer.out_channels = static_cast<int>(out_ch);
    layer.weights.resize(n);
    for (float& w : layer.weights) w = in.f32();
    layer.bias.resize(out_ch);
    for (float& b : layer.bias) b = in.f32();
    m.layers.push_back(std::move(layer));
  }
  require(in.at_end(), ErrorKind::Format, "trailing bytes after last layer");
  m.validate();
  return m;
}

CnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open weights file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_model(ss.str());
  } catch (const Error& e) {
    fail(e.kind(), "'" + path.string() + "': " + e.what());
  }
}

std::string serialize_model(const CnnModel& model) {
  model.validate();
  std::string out(kPnpwMagic, 4);
  put_u32(out, kPnpwVersion);
  put_u32(out, static_cast<std::uint32_t>(model.input_channels));
  out.push_back(model.residual ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.in_channels));
    put_u32(out, static_cast<std::uint32_t>(layer.out_channels));
    out.push_back(layer.relu ? 1 : 0);
    for (float w : layer.weights) put_f32(out, w);
    for (float b : layer.bias) put_f32(out, b);
  }
  return out;
}

void save_model(const std::filesystem::path& path, const CnnModel& model) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

namespace {

Image conv_layer(const ConvLayer& layer, const Image& in) {
  const int w = in.width();
  const int h = in.height();
  Image out(w, h, layer.out_channels);
  parallel_for(static_cast<std::size_t>(layer.out_channels), [&](std::size_t oi) {
    const int o = static_cast<int>(oi);
    auto dst = out.plane(o);
    std::fill(dst.begin(), dst.end(), static_cast<double>(layer.bias[o]));
    for (int i = 0; i < layer.in_channels; ++i) {
      auto src = in.plane(i);
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wt = layer.weight(o, i, ky, kx);
          if (wt == 0.0) continue;
          const int dy = ky - 1;
          const int dx = kx - 1;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y) {
            double* d = dst.data() + static_cast<std::size_t>(y) * w;
            const double* s = src.data() + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) d[x] += wt * s[x];
          }
        }
      }
    }
    if (layer.relu)
      for (double& v : dst) v = std::max(0.0, v);
  });
  return out;
}

}  // namespace

Image infer(const CnnModel& model, const Image& x) {
  require(x.channels() == model.input_channels, ErrorKind::ShapeMismatch,
          "model expects " + std::to_string(model.input_channels) + " channel(s), image has " +
              std::to_string(x.channels()));
  Image act = x;
  for (const auto& layer : model.layers) act = conv_layer(layer, act);
  if (model.residual) return x - act;
  return act;
}

std::string describe_model(const CnnModel& model) {
  std::ostringstream out;
  std::size_t params = 0;
  out << "input_channels " << model.input_channels << "\n";
  out << "residual " << (model.residual ? "yes" : "no") << "\n";
  out << "layers " << model.layers.size() << "\n";
  out << "layer  in_ch  out_ch  relu  params\n";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const std::size_t p = layer.weights.size() + layer.bias.size();
    params += p;
    char line[96];
    std::snprintf(line, sizeof line, "%5zu  %5d  %6d  %4s  %zu\n", l, layer.in_channels, layer.out_channels,
                  layer.relu ? "yes" : "no", p);
    out << line;
  }
  out << "total_params " << params << "\n";
  return out.str();
}

CnnModel random_model(int input_channels, int hidden, int depth, bool residual, RngSeed seed, double scale) {
  require(depth >= 1, ErrorKind::InvalidArgument, "depth must be >= 1");
  CnnModel m;
  m.input_channels = input_channels;
  m.residual = residual;
  std::uint64_t counter = 0;
  for (int l = 0; l < depth; ++l) {
    ConvLayer layer;
    layer.in_channels = l == 0 ? input_channels : hidden;
    layer.out_channels = l == depth - 1 ? input_channels : hidden;
    layer.relu = l != depth - 1;
    layer.weights.resize(static_cast<std::size_t>(layer.in_channels) * layer.out_channels * 9);
    for (float& w : layer.weights) w = static_cast<float>(scale * (2.0 * uniform_sample(seed, counter++) - 1.0));
    layer.bias.resize(layer.out_channels);
    for (float& b : layer.bias) b = static_cast<float>(scale * (2.0 * uniform_sample(seed, counter++) - 1.0));
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace pnp
