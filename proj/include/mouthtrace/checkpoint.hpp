#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mouthtrace/tensor.hpp"

namespace mouthtrace {

using TensorMap = std::map<std::string, Tensor>;

// Tensor archive layout, all integers little-endian:
//
//   "LFW1"                      4-byte magic
//   u32 count
//   count x {
//     u32 name_length, name bytes (UTF-8)
//     u32 rank, rank x u64 extent
//     numel x float32 (IEEE-754, little-endian)
//   }
//
// Entries are written in lexicographic name order, so identical maps always
// produce identical bytes.

std::vector<char> encode_tensors(const TensorMap& named);
TensorMap decode_tensors(const std::vector<char>& bytes);

void save_tensors(const std::filesystem::path& path, const TensorMap& named);
TensorMap load_tensors(const std::filesystem::path& path);

}  // namespace mouthtrace
