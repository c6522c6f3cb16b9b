#include "seqdiff/harness/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "seqdiff/eval/report.hpp"
#include "seqdiff/io/binary.hpp"

namespace seqdiff::harness {

namespace {

void write_pgm(const std::string& path, std::size_t w, std::size_t h, const std::vector<std::uint8_t>& px) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io::FormatError("cannot open " + path + " for writing");
  os << "P5\n" << w << ' ' << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!os) throw io::FormatError("write failed for " + path);
}

}  // namespace

void write_frame_grid(const std::string& path, const Tensor<double>& frames, std::size_t frames_per_row,
                      const FrameShape& shape, double lo, double hi, std::size_t zoom) {
  require(shape.is_image() && frames.cols() == shape.dim(), "frame grid: image frames required");
  require(frames_per_row > 0 && frames.rows() % frames_per_row == 0, "frame grid: rows must be a multiple of V");
  require(hi > lo && zoom > 0, "frame grid: bad range");
  const std::size_t rows = frames.rows() / frames_per_row, fh = shape.height * zoom, fw = shape.width * zoom;
  const std::size_t w = frames_per_row * (fw + 1) + 1, h = rows * (fh + 1) + 1;
  std::vector<std::uint8_t> px(w * h, 64);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < frames_per_row; ++t) {
      const double* f = frames.row(r * frames_per_row + t);
      for (std::size_t y = 0; y < fh; ++y) {
        for (std::size_t x = 0; x < fw; ++x) {
          const double v = std::clamp((f[(y / zoom) * shape.width + x / zoom] - lo) / (hi - lo), 0.0, 1.0);
          px[(r * (fh + 1) + 1 + y) * w + t * (fw + 1) + 1 + x] = static_cast<std::uint8_t>(std::lround(v * 255));
        }
      }
    }
  }
  write_pgm(path, w, h, px);
}

void write_line_plot(const std::string& path, const std::vector<std::vector<double>>& curves, std::size_t width,
                     std::size_t height) {
  require(width >= 8 && height >= 8, "line plot: image too small");
  double lo = INFINITY, hi = -INFINITY;
  std::size_t len = 0;
  for (const auto& c : curves) {
    for (const double v : c) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    len = std::max(len, c.size());
  }
  std::vector<std::uint8_t> px(width * height, 255);
  if (len >= 2 && hi > lo) {
    const std::uint8_t shades[4] = {0, 96, 160, 48};
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
      const auto& c = curves[ci];
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (!std::isfinite(c[i])) continue;
        const std::size_t x = i * (width - 1) / (len - 1);
        const auto y = static_cast<std::size_t>(std::lround((hi - c[i]) / (hi - lo) * (height - 1)));
        px[y * width + x] = shades[ci % 4];
      }
    }
  }
  write_pgm(path, width, height, px);
}

void write_frames_csv(const std::string& path, const Tensor<double>& frames, std::size_t frames_per_seq) {
  require(frames_per_seq > 0 && frames.rows() % frames_per_seq == 0, "frames csv: rows must be a multiple of V");
  std::ofstream os(path);
  if (!os) throw io::FormatError("cannot open " + path + " for writing");
  os << "sequence,frame";
  for (std::size_t j = 0; j < frames.cols(); ++j) os << ",x" << j;
  os << '\n';
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    os << r / frames_per_seq << ',' << r % frames_per_seq;
    for (std::size_t j = 0; j < frames.cols(); ++j) os << ',' << eval::format_number(frames(r, j));
    os << '\n';
  }
  if (!os) throw io::FormatError("write failed for " + path);
}

std::string write_frames_figure(const std::string& stem, const Tensor<double>& frames, std::size_t frames_per_row,
                                const FrameShape& shape) {
  if (shape.is_image() && shape.channels == 1) {
    write_frame_grid(stem + ".pgm", frames, frames_per_row, shape);
    write_frames_csv(stem + ".csv", frames, frames_per_row);
    return stem + ".pgm";
  }
  write_frames_csv(stem + ".csv", frames, frames_per_row);
  return stem + ".csv";
}

void RunDir::create() const {
  std::filesystem::create_directories(root + "/checkpoints");
  std::filesystem::create_directories(root + "/figures");
}

bool RunDir::exists() const { return std::filesystem::exists(config_path()); }

}  // namespace seqdiff::harness
