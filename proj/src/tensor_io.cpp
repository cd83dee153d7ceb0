#include "rva/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <type_traits>

#include "rva/errors.hpp"

namespace rva {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'A', '1'};

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get(std::istream& in, const std::string& where) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw ValidationError("tensor file truncated in " + where);
    }
    value |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

template <typename T>
void write_tensor_file(const std::string& path, const NamedTensors<T>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, sizeof(T));
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t extent : tensor.shape()) put<std::uint64_t>(out, extent);
    for (T v : tensor.values()) {
      Bits<T> bits;
      std::memcpy(&bits, &v, sizeof(T));
      put<Bits<T>>(out, bits);
    }
  }
  if (!out) throw ValidationError("write failed: " + path);
}

std::uint32_t tensor_file_precision(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("not an RVA1 tensor file: " + path);
  }
  return get<std::uint32_t>(in, "header");
}

template <typename T>
NamedTensors<T> read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ValidationError("not an RVA1 tensor file: " + path);
  }
  const auto precision = get<std::uint32_t>(in, "header");
  if (precision != sizeof(T)) {
    throw ValidationError("tensor file precision " + std::to_string(precision * 8) +
                          "-bit does not match requested " + std::to_string(sizeof(T) * 8) +
                          "-bit: " + path);
  }
  const auto count = get<std::uint64_t>(in, "header");
  NamedTensors<T> out;
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::string where = "record " + std::to_string(r);
    const auto name_len = get<std::uint32_t>(in, where);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ValidationError("tensor file truncated in " + where);
    const auto rank = get<std::uint32_t>(in, where);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(get<std::uint64_t>(in, where));
    std::vector<T> values(shape_size(shape));
    for (auto& v : values) {
      const auto bits = get<Bits<T>>(in, where);
      std::memcpy(&v, &bits, sizeof(T));
    }
    out.emplace_back(std::move(name), Tensor<T>(std::move(shape), std::move(values)));
  }
  return out;
}

template void write_tensor_file<float>(const std::string&, const NamedTensors<float>&);
template void write_tensor_file<double>(const std::string&, const NamedTensors<double>&);
template NamedTensors<float> read_tensor_file<float>(const std::string&);
template NamedTensors<double> read_tensor_file<double>(const std::string&);

}  // namespace rva
