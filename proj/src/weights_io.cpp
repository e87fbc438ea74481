#include "ddg/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ddg/error.hpp"

namespace ddg {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) throw ParseError(std::string("weights: truncated ") + what, pos_);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void put_shape(std::vector<std::uint8_t>& out, const Tensor& t) {
  put<std::uint32_t>(out, std::uint32_t(t.empty() ? 0 : t.rank()));
  if (!t.empty())
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
}

Shape get_shape(Reader& r) {
  const std::size_t at = r.pos();
  const auto rank = r.get<std::uint32_t>("shape rank");
  if (rank > 8) throw ParseError("weights: implausible rank " + std::to_string(rank), at);
  Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::size_t dim_at = r.pos();
    const auto d = r.get<std::uint64_t>("shape dim");
    if (d == 0 || d > (std::uint64_t(1) << 40)) throw ParseError("weights: bad dimension", dim_at);
    shape.push_back(std::size_t(d));
  }
  return shape;
}

std::size_t count(const Shape& s) {
  if (s.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor get_tensor(Reader& r, const Shape& shape) {
  if (shape.empty()) return {};
  const std::size_t n = count(shape);
  if (r.remaining() / sizeof(double) < n) throw ParseError("weights: truncated payload", r.pos());
  std::vector<Scalar> values(n);
  for (auto& v : values) v = Scalar(r.get<double>("payload"));
  return Tensor(shape, std::move(values));
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const NetworkState& state) {
  std::vector<std::uint8_t> out = {'D', 'D', 'G', 'W'};
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint32_t>(out, std::uint32_t(state.layers.size()));
  for (const auto& l : state.layers) {
    put_shape(out, l.weights);
    put_shape(out, l.bias);
  }
  for (const auto& l : state.layers) {
    for (Scalar v : l.weights.data()) put<double>(out, double(v));
    for (Scalar v : l.bias.data()) put<double>(out, double(v));
  }
  return out;
}

NetworkState decode_weights(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DDGW", 4) != 0) throw ParseError("weights: bad magic", 0);
  Reader r(bytes);
  r.get<std::uint32_t>("magic");
  const std::size_t version_at = r.pos();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kWeightsVersion) {
    throw ParseError("weights: unsupported version " + std::to_string(version), version_at);
  }
  const auto layers = r.get<std::uint32_t>("layer count");
  std::vector<std::pair<Shape, Shape>> shapes;
  for (std::uint32_t i = 0; i < layers; ++i) {
    Shape w = get_shape(r);
    Shape b = get_shape(r);
    shapes.emplace_back(std::move(w), std::move(b));
  }
  NetworkState state;
  for (const auto& [w, b] : shapes) {
    LayerState l;
    l.weights = get_tensor(r, w);
    l.bias = get_tensor(r, b);
    state.layers.push_back(std::move(l));
  }
  if (r.remaining() != 0) throw ParseError("weights: trailing bytes", r.pos());
  return state;
}

void write_weights(const std::filesystem::path& path, const NetworkState& state) {
  const auto bytes = encode_weights(state);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("cannot write weights file " + path.string());
}

NetworkState read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace ddg
