#include "seqdiff/data/container.hpp"

#include <fstream>

#include "seqdiff/io/binary.hpp"

namespace seqdiff::data {

using namespace io;

void save_dataset(const SequenceBatch& b, const std::string& path) {
  b.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write("SQDS", 4);
  put<std::uint32_t>(os, kContainerVersion);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, b.seed);
  put_string(os, b.generator);
  for (const std::uint64_t v : {b.count, b.length, b.shape.channels, b.shape.height, b.shape.width}) put(os, v);
  put_array(os, b.frames.data(), b.frames.size());
  put<std::uint8_t>(os, b.labels ? 1 : 0);
  if (b.labels) {
    const auto& l = *b.labels;
    put<std::uint64_t>(os, l.static_classes);
    for (const int v : l.static_label) put<std::int32_t>(os, v);
    put_tensor(os, l.dynamic_track);
    put<std::uint64_t>(os, l.target.size());
    put_array(os, l.target.data(), l.target.size());
  }
  if (!os) throw FormatError("write failed for " + path);
}

SequenceBatch load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[4];
  get_array(is, magic, 4);
  if (std::string(magic, 4) != "SQDS") throw FormatError(path + ": not a dataset file");
  if (get<std::uint32_t>(is) != kContainerVersion) throw FormatError(path + ": unsupported dataset version");
  if (get<std::uint32_t>(is) != 1) throw FormatError(path + ": unsupported dtype");
  SequenceBatch b;
  b.seed = get<std::uint64_t>(is);
  b.generator = get_string(is);
  b.count = get<std::uint64_t>(is);
  b.length = get<std::uint64_t>(is);
  b.shape.channels = get<std::uint64_t>(is);
  b.shape.height = get<std::uint64_t>(is);
  b.shape.width = get<std::uint64_t>(is);
  if (b.count * b.length * b.shape.dim() > (std::uint64_t{1} << 34)) throw FormatError(path + ": size out of range");
  b.frames = Tensor<double>(b.count * b.length, b.shape.dim());
  get_array(is, b.frames.data(), b.frames.size());
  if (get<std::uint8_t>(is) != 0) {
    FactorLabels l;
    l.static_classes = get<std::uint64_t>(is);
    l.static_label.resize(b.count);
    for (auto& v : l.static_label) v = get<std::int32_t>(is);
    l.dynamic_track = get_tensor<double>(is);
    const auto m = get<std::uint64_t>(is);
    if (m > b.count) throw FormatError(path + ": target count out of range");
    l.target.resize(m);
    get_array(is, l.target.data(), m);
    b.labels = std::move(l);
  }
  b.validate();
  return b;
}

}  // namespace seqdiff::data
