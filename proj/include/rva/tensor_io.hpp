#ifndef RVA_TENSOR_IO_HPP_
#define RVA_TENSOR_IO_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rva/tensor.hpp"

namespace rva {

// Binary tensor container, little-endian throughout:
//   header  : "RVA1" | u32 precision (4 = float32, 8 = float64) | u64 count
//   record  : u32 name_length | name (UTF-8) | u32 rank | u64 extent * rank |
//             raw values
// Round trips are bit-exact.
template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
void write_tensor_file(const std::string& path, const NamedTensors<T>& tensors);

// Throws ValidationError on a bad magic, a precision flag that does not match
// T, or a truncated record (the message carries the record index).
template <typename T>
NamedTensors<T> read_tensor_file(const std::string& path);

// Precision flag stored in a file, without reading the records.
std::uint32_t tensor_file_precision(const std::string& path);

}  // namespace rva

#endif  // RVA_TENSOR_IO_HPP_
