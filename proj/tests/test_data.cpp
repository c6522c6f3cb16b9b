#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "seqdiff/data/container.hpp"
#include "seqdiff/data/synthetic.hpp"
#include "seqdiff/io/binary.hpp"

using namespace seqdiff;
using namespace seqdiff::data;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Correlation between the static label and the mean of the first dynamic
// component over each sequence.
double label_dynamic_correlation(const SequenceBatch& b) {
  const auto& l = b.require_labels();
  std::vector<double> s, d;
  for (std::size_t i = 0; i < b.count; ++i) {
    double m = 0;
    for (std::size_t t = 0; t < b.length; ++t) m += l.dynamic_track(i * b.length + t, 0);
    s.push_back(l.static_label[i]);
    d.push_back(m / b.length);
  }
  return pearson(s, d);
}

}  // namespace

TEST_CASE("generators are reproducible and labelled") {
  for (const char* name : {"bouncing", "speaker", "physio", "correlated"}) {
    const auto a = generate(name, 20, 6, 3);
    const auto b = generate(name, 20, 6, 3);
    CHECK(a.frames == b.frames);
    CHECK(a.labels->static_label == b.labels->static_label);
    CHECK_NOTHROW(a.validate());
    CHECK(!(generate(name, 20, 6, 4).frames == a.frames));
  }
  CHECK(gen_toy_speaker(2, 3, 0).shape.dim() == 80);
  CHECK(gen_toy_physio(2, 3, 0).shape.dim() == 10);
  CHECK(gen_bouncing_shape(2, 3, 0).modality() == Modality::image);
  CHECK_THROWS_AS(gen_bouncing_shape(2, 1, 0), ContractViolation);
  CHECK_THROWS_AS(generate("mnist", 2, 3, 0), ConfigError);
}

TEST_CASE("bouncing shape: rendering, pixel range and reflection") {
  const auto b = gen_bouncing_shape(40, 10, 5);
  for (std::size_t i = 0; i < b.frames.size(); ++i) {
    CHECK(b.frames[i] >= 0.0);
    CHECK(b.frames[i] <= 1.0);
  }
  CHECK(b.labels->static_classes == 8);
  // Same factors render the same frame.
  std::vector<double> f1(256), f2(256);
  render_shape(1, 0.55, 7.3, 9.1, f1.data());
  render_shape(1, 0.55, 7.3, 9.1, f2.data());
  CHECK(f1 == f2);
  // Re-rendering from the labels reproduces the stored frames.
  const auto& l = *b.labels;
  for (std::size_t i = 0; i < 5; ++i) {
    const int kind = l.static_label[i] / 4;
    const double inten = shape_intensity(static_cast<std::size_t>(l.static_label[i] % 4));
    render_shape(kind, inten, l.dynamic_track(i * 10 + 3, 0), l.dynamic_track(i * 10 + 3, 1), f1.data());
    for (std::size_t j = 0; j < 256; ++j) CHECK(f1[j] == b.frames(i * 10 + 3, j));
  }
  CHECK(reflect(14.0, 3.0, 13.0) == doctest::Approx(12.0));
  CHECK(reflect(-1.0, 3.0, 13.0) == doctest::Approx(7.0));
  CHECK(reflect(25.0, 3.0, 13.0) == doctest::Approx(5.0));
  // Centroid extractor recovers the true centre of an interior shape.
  Tensor<double> one(1, 256);
  render_shape(0, 0.95, 6.4, 10.2, one.row(0));
  const auto c = shape_centroids(one);
  CHECK(std::abs(c(0, 0) - 6.4) < 0.1);
  CHECK(std::abs(c(0, 1) - 10.2) < 0.1);
}

TEST_CASE("bounce positions are uniform over the reachable box") {
  const auto b = gen_bouncing_shape(4000, 24, 6);
  const std::size_t bins = 10;
  std::vector<double> hx(bins, 0), hy(bins, 0);
  const auto& tr = b.labels->dynamic_track;
  for (std::size_t r = 0; r < tr.rows(); ++r) {
    hx[std::min(bins - 1, static_cast<std::size_t>((tr(r, 0) - 3.0) / 10.0 * bins))] += 1;
    hy[std::min(bins - 1, static_cast<std::size_t>((tr(r, 1) - 3.0) / 10.0 * bins))] += 1;
  }
  const double expect = static_cast<double>(tr.rows()) / bins;
  for (std::size_t k = 0; k < bins; ++k) {
    CHECK(std::abs(hx[k] / expect - 1.0) < 0.05);
    CHECK(std::abs(hy[k] / expect - 1.0) < 0.05);
  }
}

TEST_CASE("speaker templates and envelopes") {
  const auto w = SpeakerWorld::make({});
  for (std::size_t a = 0; a < kSpeakers; ++a) {
    for (std::size_t b = a + 1; b < kSpeakers; ++b) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t f = 0; f < kSpeakerDim; ++f) {
        ab += w.templates(a, f) * w.templates(b, f);
        aa += w.templates(a, f) * w.templates(a, f);
        bb += w.templates(b, f) * w.templates(b, f);
      }
      CHECK(ab / std::sqrt(aa * bb) < 0.9);
    }
  }
  // Removing the content component leaves the speaker envelope plus 0.02 noise.
  const auto b = gen_toy_speaker(30, 5, 7);
  const auto& l = *b.labels;
  double worst = 0;
  for (std::size_t r = 0; r < b.frames.rows(); ++r) {
    const std::size_t spk = static_cast<std::size_t>(l.static_label[r / 5]);
    for (std::size_t f = 0; f < kSpeakerDim; ++f) {
      double v = b.frames(r, f) - w.templates(spk, f);
      for (std::size_t j = 0; j < kContentDim; ++j) v -= l.dynamic_track(r, j) * w.content_basis(j, f);
      worst = std::max(worst, std::abs(v));
    }
  }
  CHECK(worst < 0.02 * 6);
}

TEST_CASE("physio target is the mean last-frame trend") {
  const auto b = gen_toy_physio(25, 8, 8);
  const auto& l = *b.labels;
  for (std::size_t i = 0; i < b.count; ++i) {
    const double want = 0.5 * (l.dynamic_track(i * 8 + 7, 0) + l.dynamic_track(i * 8 + 7, 1));
    CHECK(l.target[i] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("factor independence except in the correlated dataset") {
  for (const char* name : {"bouncing", "speaker", "physio"}) {
    CHECK(std::abs(label_dynamic_correlation(generate(name, 4000, 8, 9))) < 0.05);
  }
  CHECK(std::abs(label_dynamic_correlation(gen_correlated_factors(4000, 8, 9))) > 0.5);
}

TEST_CASE("normalizer statistics and exact inverse") {
  for (const char* name : {"bouncing", "speaker"}) {
    const auto b = generate(name, 200, 6, 10);
    const auto st = fit_normalizer(b);
    const auto n = normalize(b, st);
    double m = 0, s = 0;
    for (std::size_t i = 0; i < n.frames.size(); ++i) m += n.frames[i];
    m /= n.frames.size();
    for (std::size_t i = 0; i < n.frames.size(); ++i) s += (n.frames[i] - m) * (n.frames[i] - m);
    s = std::sqrt(s / n.frames.size());
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(s - 0.5) < 1e-3);
    const auto back = denormalize(n, st);
    for (std::size_t i = 0; i < b.frames.size(); ++i) CHECK(std::abs(back.frames[i] - b.frames[i]) <= 1e-12);
  }
  auto b = gen_toy_physio(20, 4, 11);
  for (std::size_t r = 0; r < b.frames.rows(); ++r) b.frames(r, 3) = 2.5;
  const auto st = fit_normalizer(b);
  CHECK(st.degenerate == std::vector<std::size_t>{3});
  CHECK(st.scale[3] == 1.0);
  CHECK(normalize(b, st).frames(0, 3) == 0.0);
}

TEST_CASE("dataset container round trip") {
  const auto path = std::filesystem::temp_directory_path() / "seqdiff_container_test.bin";
  for (const char* name : {"bouncing", "physio"}) {
    const auto b = generate(name, 7, 4, 12);
    save_dataset(b, path.string());
    const auto c = load_dataset(path.string());
    CHECK(c.generator == b.generator);
    CHECK(c.seed == 12);
    CHECK(c.shape == b.shape);
    CHECK(c.frames == b.frames);
    CHECK(c.labels->static_label == b.labels->static_label);
    CHECK(c.labels->dynamic_track == b.labels->dynamic_track);
    CHECK(c.labels->target == b.labels->target);
  }
  {
    std::ofstream os(path, std::ios::binary);
    os << "JUNKJUNK";
  }
  CHECK_THROWS_AS(load_dataset(path.string()), io::FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("select, split and the identity codec") {
  const auto b = gen_toy_speaker(10, 3, 13);
  const auto s = b.select({4, 1});
  CHECK(s.count == 2);
  CHECK(s.labels->static_label[0] == b.labels->static_label[4]);
  for (std::size_t j = 0; j < 80; ++j) CHECK(s.frames(3, j) == b.frames(3, j));
  const auto [head, tail] = b.split(6);
  CHECK(head.count == 6);
  CHECK(tail.count == 4);
  CHECK(tail.frames(0, 0) == b.frames(18, 0));
  IdentityCodec codec;
  CHECK(codec.decode(codec.encode(b.frames)) == b.frames);
  CHECK(codec.latent_shape(b.shape) == b.shape);
}
