#pragma once
// Figure files: binary PGM images and CSV tables.

#include <string>
#include <vector>

#include "seqdiff/frame.hpp"
#include "seqdiff/tensor.hpp"

namespace seqdiff::harness {

/// Tiles single-channel image frames [n*V x H*W] into an n-row, V-column
/// grid with a one-pixel gap, values in [lo, hi] mapped to 0..255 and
/// clamped, each pixel repeated `zoom` times per axis.
void write_frame_grid(const std::string& path, const Tensor<double>& frames, std::size_t frames_per_row,
                      const FrameShape& shape, double lo = 0.0, double hi = 1.0, std::size_t zoom = 4);

/// One or more curves drawn into a width x height PGM, each scaled to the
/// shared min/max of all curves.
void write_line_plot(const std::string& path, const std::vector<std::vector<double>>& curves, std::size_t width = 480,
                     std::size_t height = 240);

/// Frames as CSV with columns sequence, frame, x0..x{D-1}.
void write_frames_csv(const std::string& path, const Tensor<double>& frames, std::size_t frames_per_seq);

/// Grid image for image frames, CSV otherwise. Returns the written path
/// (`stem` plus ".pgm" or ".csv").
std::string write_frames_figure(const std::string& stem, const Tensor<double>& frames, std::size_t frames_per_row,
                                const FrameShape& shape);

/// run/config.snapshot, run/metrics.report, run/checkpoints/, run/figures/.
struct RunDir {
  std::string root;

  explicit RunDir(std::string path) : root(std::move(path)) {}
  /// Creates the directory tree.
  void create() const;
  bool exists() const;
  std::string config_path() const { return root + "/config.snapshot"; }
  std::string report_path() const { return root + "/metrics.report"; }
  std::string checkpoint_path(const std::string& name = "model") const { return root + "/checkpoints/" + name + ".ckpt"; }
  std::string figure_path(const std::string& name) const { return root + "/figures/" + name; }
};

}  // namespace seqdiff::harness
