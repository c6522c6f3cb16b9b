#include "seqdiff/eval/swap.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "seqdiff/eval/metrics.hpp"

namespace seqdiff::eval {

void PairList::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("pairs: cannot write " + path);
  os << "# pairs seed=" << seed << '\n';
  for (const auto& p : pairs) os << p.static_src << ' ' << p.dyn_src << '\n';
}

PairList PairList::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("pairs: cannot open " + path);
  PairList out;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line.rfind("# pairs seed=", 0) == 0, "pairs: missing header");
  out.seed = std::stoull(line.substr(13));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SwapPair p{};
    require(static_cast<bool>(ls >> p.static_src >> p.dyn_src), "pairs: malformed line '" + line + "'");
    out.pairs.push_back(p);
  }
  return out;
}

PairList make_pair_list(const data::FactorLabels& labels, std::size_t count, std::uint64_t seed) {
  const std::size_t n = labels.static_label.size();
  require(n >= 2, "pairs: need at least two sequences");
  bool varied = false;
  for (std::size_t i = 1; i < n && !varied; ++i) varied = labels.static_label[i] != labels.static_label[0];
  require(varied, "pairs: all sequences share one static label");
  PairList out;
  out.seed = seed;
  Rng rng(seed);
  while (out.pairs.size() < count) {
    const std::size_t a = rng.index(n), b = rng.index(n);
    if (labels.static_label[a] != labels.static_label[b]) out.pairs.push_back({a, b});
  }
  return out;
}

Tensor<double> sorted_intensity_features(const Tensor<double>& frames, std::size_t v) {
  require(v > 0 && frames.rows() % v == 0, "features: rows must be a multiple of V");
  constexpr std::size_t keep = 64;
  require(frames.cols() >= keep, "features: frames too small");
  const std::size_t n = frames.rows() / v;
  Tensor<double> out(n, keep);
  std::vector<double> px(frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    std::copy(frames.row(r), frames.row(r) + frames.cols(), px.begin());
    std::partial_sort(px.begin(), px.begin() + keep, px.end(), std::greater<>());
    for (std::size_t j = 0; j < keep; ++j) out(r / v, j) += px[j] / static_cast<double>(v);
  }
  return out;
}

Tensor<double> mean_frame_features(const Tensor<double>& frames, std::size_t v) {
  require(v > 0 && frames.rows() % v == 0, "features: rows must be a multiple of V");
  const std::size_t n = frames.rows() / v;
  Tensor<double> out(n, frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (std::size_t j = 0; j < frames.cols(); ++j) out(r / v, j) += frames(r, j) / static_cast<double>(v);
  }
  return out;
}

namespace {

class ShapeProbe final : public FactorProbe {
 public:
  ShapeProbe(std::size_t frames, std::uint64_t seed) {
    const auto train = data::gen_bouncing_shape(2000, frames, seed);
    clf_.fit(sorted_intensity_features(train.frames, frames), train.labels->static_label, 8, {400, 0.1, 1e-5});
  }
  std::vector<int> static_labels(const Tensor<double>& frames, std::size_t v) const override {
    return clf_.predict(sorted_intensity_features(frames, v));
  }
  Tensor<double> dynamic_track(const Tensor<double>& frames) const override { return data::shape_centroids(frames); }

 private:
  SoftmaxProbe clf_;
};

class VectorProbe final : public FactorProbe {
 public:
  VectorProbe(const data::SequenceBatch& train) {
    const auto& l = train.require_labels();
    clf_.fit(mean_frame_features(train.frames, train.length), l.static_label, l.static_classes);
    reg_.fit(train.frames, l.dynamic_track);
  }
  std::vector<int> static_labels(const Tensor<double>& frames, std::size_t v) const override {
    return clf_.predict(mean_frame_features(frames, v));
  }
  Tensor<double> dynamic_track(const Tensor<double>& frames) const override { return reg_.predict(frames); }

 private:
  SoftmaxProbe clf_;
  RidgeProbe reg_;
};

}  // namespace

std::unique_ptr<FactorProbe> make_factor_probe(const std::string& generator, const data::WorldParams& world,
                                               std::size_t frames, std::uint64_t seed) {
  if (generator == "bouncing") return std::make_unique<ShapeProbe>(frames, seed);
  return std::make_unique<VectorProbe>(data::generate(generator, 2000, frames, seed, world));
}

MetricsReport SwapScores::report() const {
  MetricsReport r;
  r.set("static_accuracy", static_accuracy);
  r.set("static_leak", static_leak);
  r.set("dynamic_r", dynamic_r);
  r.set("dynamic_leak_r", dynamic_leak_r);
  return r;
}

SwapScores swap_preservation_scores(const data::SequenceBatch& raw_test, const PairList& pairs, const SwapFn& swap,
                                    const FactorProbe& probe) {
  const auto& l = raw_test.require_labels();
  require(!pairs.pairs.empty(), "swap scores: empty pair list");
  const std::size_t v = raw_test.length, d = raw_test.shape.dim(), q = l.dynamic_track.cols();
  const std::size_t p = pairs.pairs.size();
  Tensor<double> xa(p * v, d), xb(p * v, d), track_a(p * v, q), track_b(p * v, q);
  std::vector<int> label_a, label_b;
  for (std::size_t k = 0; k < p; ++k) {
    const auto [a, b] = pairs.pairs[k];
    require(a < raw_test.count && b < raw_test.count, "swap scores: pair index out of range");
    std::copy(raw_test.frames.row(a * v), raw_test.frames.row((a + 1) * v), xa.row(k * v));
    std::copy(raw_test.frames.row(b * v), raw_test.frames.row((b + 1) * v), xb.row(k * v));
    std::copy(l.dynamic_track.row(a * v), l.dynamic_track.row((a + 1) * v), track_a.row(k * v));
    std::copy(l.dynamic_track.row(b * v), l.dynamic_track.row((b + 1) * v), track_b.row(k * v));
    label_a.push_back(l.static_label[a]);
    label_b.push_back(l.static_label[b]);
  }
  const Tensor<double> out = swap(xa, xb);
  require(out.same_shape(xa), "swap scores: output shape mismatch");
  SwapScores s{};
  s.predicted = probe.static_labels(out, v);
  s.tracks = probe.dynamic_track(out);
  s.static_accuracy = accuracy(s.predicted, label_a);
  s.static_leak = accuracy(s.predicted, label_b);
  s.dynamic_r = mean_column_pearson(s.tracks, track_b);
  s.dynamic_leak_r = mean_column_pearson(s.tracks, track_a);
  return s;
}

}  // namespace seqdiff::eval
