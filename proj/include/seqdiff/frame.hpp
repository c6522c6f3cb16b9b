#pragma once

#include <cstddef>
#include <string>

namespace seqdiff {

enum class Modality { vector, image };

inline std::string to_string(Modality m) { return m == Modality::vector ? "vector" : "image"; }

/// Shape of one frame. Vector frames use channels = dim, height = width = 1.
struct FrameShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t dim() const { return channels * height * width; }
  bool is_image() const { return height > 1 || width > 1; }
  bool operator==(const FrameShape&) const = default;
};

}  // namespace seqdiff
