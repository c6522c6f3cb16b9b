#pragma once
// Dataset files. Layout (all little-endian):
//   "SQDS" | u32 version | u32 dtype (1 = f64) | u64 seed | str generator
//   u64 n | u64 V | u64 C | u64 H | u64 W | f64[n*V*C*H*W] frames
//   u8 has_labels, then if set:
//   u64 classes | i32[n] static labels | tensor dynamic track | u64 m | f64[m] targets
// A str is u32 length followed by bytes; a tensor is u64 rows, u64 cols, f64 values.

#include <string>

#include "seqdiff/data/synthetic.hpp"

namespace seqdiff::data {

inline constexpr std::uint32_t kContainerVersion = 1;

void save_dataset(const SequenceBatch& b, const std::string& path);
SequenceBatch load_dataset(const std::string& path);

}  // namespace seqdiff::data
