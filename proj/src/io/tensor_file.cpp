#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctnet/errors.hpp"
#include "ctnet/io.hpp"

namespace ctnet {
namespace {

constexpr char kMagic[4] = {'C', 'T', 'T', 'N'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  const bool f32 = t.precision() == Precision::f32;
  out.push_back(kVersion);
  out.push_back(f32 ? 0 : 1);
  if (t.rank() > 255) throw ValidationError("tensor rank exceeds 255");
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > 0xFFFFFFFFu) throw ValidationError("tensor extent exceeds 32 bits");
    put(out, static_cast<std::uint32_t>(d));
  }
  out.reserve(out.size() + t.size() * (f32 ? 4 : 8));
  for (double v : t.data()) {
    if (f32) {
      put(out, static_cast<float>(v));
    } else {
      put(out, v);
    }
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError(origin + ": not a CTTN tensor file");
  if (bytes[4] != kVersion) throw IoError(origin + ": unsupported tensor file version " + std::to_string(bytes[4]));
  const std::uint8_t dtype = bytes[5];
  if (dtype > 1) throw IoError(origin + ": unknown dtype " + std::to_string(dtype));
  const std::size_t ndim = bytes[6];
  const std::size_t header = 7 + 4 * ndim;
  if (bytes.size() < header) throw IoError(origin + ": truncated header");
  Shape dims(ndim);
  for (std::size_t i = 0; i < ndim; ++i) dims[i] = get<std::uint32_t>(bytes, 7 + 4 * i);
  const std::size_t count = shape_size(dims);
  const std::size_t width = dtype == 0 ? 4 : 8;
  if (bytes.size() != header + count * width) {
    throw IoError(origin + ": payload holds " + std::to_string((bytes.size() - header) / width) +
                  " elements, header " + shape_string(dims) + " needs " + std::to_string(count));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = dtype == 0 ? static_cast<double>(get<float>(bytes, header + 4 * i)) : get<double>(bytes, header + 8 * i);
  }
  return Tensor(std::move(dims), std::move(data), dtype == 0 ? Precision::f32 : Precision::f64);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const fs::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_tensor(const Tensor& t, const fs::path& path) { write_bytes(path, encode_tensor(t)); }

Tensor load_tensor(const fs::path& path) { return decode_tensor(read_bytes(path), path.string()); }

}  // namespace ctnet
