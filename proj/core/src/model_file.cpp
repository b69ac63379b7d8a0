// Binary model file, all integers u32 and all floats f64, little-endian:
//
//   "ROIX" | version | layer_count | layer_count x (group, out, in, kernel, stride, padding)
//   then for each layer: weight tensor, bias tensor
//   tensor := rank | dims[rank] | values[prod(dims)]
//
// See docs/formats.md for a byte-level example.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "roitrack/error.hpp"
#include "roitrack/extractor.hpp"

namespace roitrack::extractor {
namespace {

constexpr char kMagic[4] = {'R', 'O', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) f64(v);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void need(std::size_t n, const std::string& field) const {
    if (pos_ + n > bytes_.size()) throw FormatError("model file truncated while reading " + field);
  }
  std::uint32_t u32(const std::string& field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const std::string& field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string raw(std::size_t n, const std::string& field) {
    need(n, field);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  Tensor tensor(const Shape& expected, const std::string& field) {
    const std::uint32_t rank = u32(field + " rank");
    if (rank != expected.size()) {
      throw FormatError("shape mismatch in " + field + ": rank " + std::to_string(rank) + ", expected " +
                        std::to_string(expected.size()));
    }
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = u32(field + " dims");
    if (shape != expected) {
      throw FormatError("shape mismatch in " + field + ": " + to_string(shape) + ", expected " + to_string(expected));
    }
    const std::size_t count = element_count(shape);
    need(count * 8, field + " values");
    std::vector<double> values(count);
    for (double& v : values) {
      v = f64(field + " values");
      if (!std::isfinite(v)) throw FormatError("non-finite value in " + field);
    }
    return Tensor(std::move(shape), std::move(values));
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string layer_field(std::size_t index, const char* what) {
  return "layer " + std::to_string(index) + " " + what;
}

}  // namespace

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  const std::vector<LayerSpec>& specs = architecture();
  w.u32(static_cast<std::uint32_t>(specs.size()));
  for (const LayerSpec& s : specs) {
    w.u32(static_cast<std::uint32_t>(s.group));
    w.u32(s.out_channels);
    w.u32(s.in_channels);
    w.u32(s.kernel);
    w.u32(s.stride);
    w.u32(s.padding);
  }
  const std::vector<const Tensor*> tensors = params.tensors();
  if (tensors.size() != 2 * specs.size()) throw ShapeError("save_model: parameter layout does not match architecture");
  for (const Tensor* t : tensors) w.tensor(*t);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  if (r.raw(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("bad magic bytes in " + path.string() + " (expected ROIX)");
  }
  const std::uint32_t version = r.u32("format version");
  if (version != kVersion) throw FormatError("unsupported format version " + std::to_string(version));

  const std::vector<LayerSpec>& specs = architecture();
  const std::uint32_t count = r.u32("layer count");
  if (count != specs.size()) {
    throw FormatError("layer count " + std::to_string(count) + " does not match architecture (" +
                      std::to_string(specs.size()) + ")");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    LayerSpec s{};
    s.group = static_cast<LayerGroup>(r.u32(layer_field(i, "group")));
    s.out_channels = r.u32(layer_field(i, "out_channels"));
    s.in_channels = r.u32(layer_field(i, "in_channels"));
    s.kernel = r.u32(layer_field(i, "kernel"));
    s.stride = r.u32(layer_field(i, "stride"));
    s.padding = r.u32(layer_field(i, "padding"));
    if (!(s == specs[i])) throw FormatError(layer_field(i, "descriptor") + " does not match architecture");
  }

  ModelParams params = build_model(0);
  std::vector<Tensor*> tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::size_t layer = i / 2;
    *tensors[i] = r.tensor(tensors[i]->shape(), layer_field(layer, i % 2 == 0 ? "weight" : "bias"));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last tensor in " + path.string());
  return params;
}

}  // namespace roitrack::extractor
