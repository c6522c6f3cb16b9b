#include "seqdiff/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace seqdiff::data {

void SequenceBatch::validate() const {
  require(length >= 1, "dataset: V must be at least 1");
  require(frames.rows() == count * length, "dataset: frame rows must equal n * V");
  require(frames.cols() == shape.dim(), "dataset: frame width does not match the frame shape");
  for (std::size_t i = 0; i < frames.size(); ++i) require(std::isfinite(frames[i]), "dataset: non-finite value");
  if (labels) {
    require(labels->static_label.size() == count, "dataset: one static label per sequence");
    require(labels->dynamic_track.rows() == count * length, "dataset: one dynamic track row per frame");
    require(labels->target.empty() || labels->target.size() == count, "dataset: one target per sequence");
  }
}

const FactorLabels& SequenceBatch::require_labels() const {
  require(labels.has_value(), "dataset has no ground-truth factors");
  return *labels;
}

SequenceBatch SequenceBatch::select(const std::vector<std::size_t>& idx) const {
  SequenceBatch out;
  out.generator = generator;
  out.seed = seed;
  out.shape = shape;
  out.count = idx.size();
  out.length = length;
  const std::size_t d = shape.dim();
  out.frames = Tensor<double>(idx.size() * length, d);
  if (labels) {
    FactorLabels l;
    l.static_classes = labels->static_classes;
    l.dynamic_track = Tensor<double>(idx.size() * length, labels->dynamic_track.cols());
    out.labels = std::move(l);
  }
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const std::size_t i = idx[j];
    require(i < count, "dataset select: index out of range");
    std::copy(frames.row(i * length), frames.row((i + 1) * length), out.frames.row(j * length));
    if (labels) {
      const auto& src = labels->dynamic_track;
      std::copy(src.row(i * length), src.row((i + 1) * length), out.labels->dynamic_track.row(j * length));
      out.labels->static_label.push_back(labels->static_label[i]);
      if (!labels->target.empty()) out.labels->target.push_back(labels->target[i]);
    }
  }
  return out;
}

std::pair<SequenceBatch, SequenceBatch> SequenceBatch::split(std::size_t n) const {
  require(n <= count, "dataset split: n exceeds count");
  std::vector<std::size_t> a(n), b(count - n);
  for (std::size_t i = 0; i < n; ++i) a[i] = i;
  for (std::size_t i = n; i < count; ++i) b[i - n] = i;
  return {select(a), select(b)};
}

// ---------------------------------------------------------------- bouncing shape

double shape_intensity(std::size_t level) { return 0.35 + 0.2 * static_cast<double>(level); }

void render_shape(int kind, double intensity, double x, double y, double* out) {
  const std::size_t n = kShapeSize;
  auto overlap = [](double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); };
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double cover;
      if (kind == 0) {
        cover = overlap(x - kShapeHalf, x + kShapeHalf, static_cast<double>(c), c + 1.0) *
                overlap(y - kShapeHalf, y + kShapeHalf, static_cast<double>(r), r + 1.0);
      } else {
        const double dx = c + 0.5 - x, dy = r + 0.5 - y;
        cover = std::clamp(kShapeHalf + 0.5 - std::sqrt(dx * dx + dy * dy), 0.0, 1.0);
      }
      out[r * n + c] = intensity * cover;
    }
  }
}

double reflect(double p, double lo, double hi) {
  const double len = hi - lo;
  double u = std::fmod(p - lo, 2.0 * len);
  if (u < 0) u += 2.0 * len;
  return lo + (u <= len ? u : 2.0 * len - u);
}

SequenceBatch gen_bouncing_shape(std::size_t n, std::size_t frames, std::uint64_t seed) {
  require(frames >= 2, "gen_bouncing_shape: V must be at least 2");
  SequenceBatch b;
  b.generator = "bouncing";
  b.seed = seed;
  b.shape = FrameShape{1, kShapeSize, kShapeSize};
  b.count = n;
  b.length = frames;
  b.frames = Tensor<double>(n * frames, b.shape.dim());
  FactorLabels l;
  l.static_classes = 2 * kShapeLevels;
  l.dynamic_track = Tensor<double>(n * frames, 2);
  const double lo = kShapeHalf, hi = static_cast<double>(kShapeSize) - kShapeHalf;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const int kind = static_cast<int>(rng.index(2));
    const std::size_t level = rng.index(kShapeLevels);
    const double x0 = lo + (hi - lo) * rng.uniform(), y0 = lo + (hi - lo) * rng.uniform();
    const double speed = 0.6 + 0.8 * rng.uniform(), angle = 2.0 * std::numbers::pi * rng.uniform();
    const double vx = speed * std::cos(angle), vy = speed * std::sin(angle);
    l.static_label.push_back(kind * static_cast<int>(kShapeLevels) + static_cast<int>(level));
    for (std::size_t t = 0; t < frames; ++t) {
      const double x = reflect(x0 + vx * t, lo, hi), y = reflect(y0 + vy * t, lo, hi);
      render_shape(kind, shape_intensity(level), x, y, b.frames.row(i * frames + t));
      l.dynamic_track(i * frames + t, 0) = x;
      l.dynamic_track(i * frames + t, 1) = y;
    }
  }
  b.labels = std::move(l);
  return b;
}

Tensor<double> shape_centroids(const Tensor<double>& frames) {
  require(frames.cols() == kShapeSize * kShapeSize, "shape_centroids: expects 16x16 frames");
  Tensor<double> out(frames.rows(), 2);
  for (std::size_t f = 0; f < frames.rows(); ++f) {
    double m = 0, sx = 0, sy = 0;
    for (std::size_t r = 0; r < kShapeSize; ++r) {
      for (std::size_t c = 0; c < kShapeSize; ++c) {
        const double v = std::max(0.0, frames(f, r * kShapeSize + c));
        m += v;
        sx += v * (c + 0.5);
        sy += v * (r + 0.5);
      }
    }
    out(f, 0) = m > 0 ? sx / m : 0.5 * kShapeSize;
    out(f, 1) = m > 0 ? sy / m : 0.5 * kShapeSize;
  }
  return out;
}

// ---------------------------------------------------------------- toy speaker

namespace {

double cosine(const double* a, const double* b, std::size_t n) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Zero-mean sum of Gaussian bumps over the 80 bins.
void smooth_envelope(Rng& rng, std::size_t bumps, double width_lo, double width_hi, double* out) {
  const std::size_t d = kSpeakerDim;
  std::fill(out, out + d, 0.0);
  for (std::size_t k = 0; k < bumps; ++k) {
    const double centre = d * rng.uniform();
    const double width = width_lo + (width_hi - width_lo) * rng.uniform();
    const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
    for (std::size_t f = 0; f < d; ++f) {
      const double u = (f - centre) / width;
      out[f] += amp * std::exp(-0.5 * u * u);
    }
  }
  double m = 0;
  for (std::size_t f = 0; f < d; ++f) m += out[f];
  m /= d;
  double s = 0;
  for (std::size_t f = 0; f < d; ++f) s += (out[f] - m) * (out[f] - m);
  s = std::sqrt(s / d);
  for (std::size_t f = 0; f < d; ++f) out[f] = (out[f] - m) / s;
}

}  // namespace

SpeakerWorld SpeakerWorld::make(const WorldParams& w) {
  SpeakerWorld world{Tensor<double>(kSpeakers, kSpeakerDim), Tensor<double>(kContentDim, kSpeakerDim)};
  Rng rng = Rng::stream(w.world_seed, 0x5bea);
  std::size_t have = 0;
  std::vector<double> cand(kSpeakerDim);
  while (have < kSpeakers) {
    smooth_envelope(rng, 4, 4.0, 10.0, cand.data());
    bool ok = true;
    for (std::size_t j = 0; j < have && ok; ++j) ok = cosine(cand.data(), world.templates.row(j), kSpeakerDim) < 0.9;
    if (ok) std::copy(cand.begin(), cand.end(), world.templates.row(have++));
  }
  Rng crng = Rng::stream(w.world_seed, 0xc0);
  for (std::size_t j = 0; j < kContentDim; ++j) smooth_envelope(crng, 3, 3.0, 8.0, world.content_basis.row(j));
  return world;
}

SequenceBatch gen_toy_speaker(std::size_t n, std::size_t frames, std::uint64_t seed, const WorldParams& w) {
  require(frames >= 2, "gen_toy_speaker: V must be at least 2");
  const auto world = SpeakerWorld::make(w);
  SequenceBatch b;
  b.generator = "speaker";
  b.seed = seed;
  b.shape = FrameShape{kSpeakerDim, 1, 1};
  b.count = n;
  b.length = frames;
  b.frames = Tensor<double>(n * frames, kSpeakerDim);
  FactorLabels l;
  l.static_classes = kSpeakers;
  l.dynamic_track = Tensor<double>(n * frames, kContentDim);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t spk = rng.index(kSpeakers);
    l.static_label.push_back(static_cast<int>(spk));
    double omega[kContentDim], phase[kContentDim], amp[kContentDim];
    for (std::size_t j = 0; j < kContentDim; ++j) {
      omega[j] = 0.2 + 0.6 * rng.uniform();
      phase[j] = 2.0 * std::numbers::pi * rng.uniform();
      amp[j] = 0.5 + rng.uniform();
    }
    for (std::size_t t = 0; t < frames; ++t) {
      double* x = b.frames.row(i * frames + t);
      std::copy(world.templates.row(spk), world.templates.row(spk) + kSpeakerDim, x);
      for (std::size_t j = 0; j < kContentDim; ++j) {
        const double c = amp[j] * std::sin(omega[j] * t + phase[j]);
        l.dynamic_track(i * frames + t, j) = c;
        for (std::size_t f = 0; f < kSpeakerDim; ++f) x[f] += c * world.content_basis(j, f);
      }
      for (std::size_t f = 0; f < kSpeakerDim; ++f) x[f] += 0.02 * rng.normal();
    }
  }
  b.labels = std::move(l);
  return b;
}

// ---------------------------------------------------------------- toy physio

PhysioWorld PhysioWorld::make(const WorldParams& w) {
  PhysioWorld world{Tensor<double>(2, kPhysioDim), Tensor<double>(kPhysioDim, kPhysioTrend)};
  Rng rng = Rng::stream(w.world_seed, 0xb10);
  for (std::size_t ch = 0; ch < kPhysioDim; ++ch) {
    const double u = rng.normal();
    world.baselines(0, ch) = 0.6 * u;
    world.baselines(1, ch) = -0.6 * u;
    for (std::size_t j = 0; j < kPhysioTrend; ++j) world.mixing(ch, j) = rng.normal() / std::sqrt(2.0);
  }
  return world;
}

SequenceBatch gen_toy_physio(std::size_t n, std::size_t frames, std::uint64_t seed, const WorldParams& w,
                             bool correlated) {
  require(frames >= 2, "gen_toy_physio: V must be at least 2");
  const auto world = PhysioWorld::make(w);
  SequenceBatch b;
  b.generator = correlated ? "correlated" : "physio";
  b.seed = seed;
  b.shape = FrameShape{kPhysioDim, 1, 1};
  b.count = n;
  b.length = frames;
  b.frames = Tensor<double>(n * frames, kPhysioDim);
  FactorLabels l;
  l.static_classes = 2;
  l.dynamic_track = Tensor<double>(n * frames, kPhysioTrend);
  constexpr double phi = 0.9, innov = 0.3;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const int cls = static_cast<int>(rng.index(2));
    l.static_label.push_back(cls);
    const double drift = correlated ? (cls == 0 ? 0.8 : -0.8) : 0.0;
    double jitter[kPhysioDim];
    for (auto& j : jitter) j = 0.1 * rng.normal();
    double m[kPhysioTrend];
    for (auto& v : m) v = drift + innov / std::sqrt(1 - phi * phi) * rng.normal();
    for (std::size_t t = 0; t < frames; ++t) {
      if (t > 0) {
        for (auto& v : m) v = drift + phi * (v - drift) + innov * rng.normal();
      }
      double* x = b.frames.row(i * frames + t);
      for (std::size_t ch = 0; ch < kPhysioDim; ++ch) {
        double v = world.baselines(cls, ch) + jitter[ch] + 0.05 * rng.normal();
        for (std::size_t j = 0; j < kPhysioTrend; ++j) v += world.mixing(ch, j) * m[j];
        x[ch] = v;
      }
      for (std::size_t j = 0; j < kPhysioTrend; ++j) l.dynamic_track(i * frames + t, j) = m[j];
    }
    double target = 0;
    for (const double v : m) target += v;
    l.target.push_back(target / kPhysioTrend);
  }
  b.labels = std::move(l);
  return b;
}

SequenceBatch gen_correlated_factors(std::size_t n, std::size_t frames, std::uint64_t seed, const WorldParams& w) {
  return gen_toy_physio(n, frames, seed, w, true);
}

SequenceBatch generate(const std::string& name, std::size_t n, std::size_t frames, std::uint64_t seed,
                       const WorldParams& w) {
  if (name == "bouncing") return gen_bouncing_shape(n, frames, seed);
  if (name == "speaker") return gen_toy_speaker(n, frames, seed, w);
  if (name == "physio") return gen_toy_physio(n, frames, seed, w);
  if (name == "correlated") return gen_correlated_factors(n, frames, seed, w);
  throw ConfigError("unknown generator '" + name + "'");
}

// ---------------------------------------------------------------- normalizer

namespace {

// Channel of column j: image planes are contiguous blocks of H*W columns.
std::size_t channel_count(const FrameShape& s) { return s.channels; }
std::size_t channel_of(const FrameShape& s, std::size_t col) { return col / (s.height * s.width); }

}  // namespace

NormalizerStats fit_normalizer(const SequenceBatch& dataset, double target_std) {
  require(target_std > 0, "fit_normalizer: target std must be positive");
  const auto& x = dataset.frames;
  const std::size_t nc = channel_count(dataset.shape);
  std::vector<double> sum(nc, 0.0), cnt(nc, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      require(std::isfinite(x(r, c)), "fit_normalizer: non-finite value");
      sum[channel_of(dataset.shape, c)] += x(r, c);
      cnt[channel_of(dataset.shape, c)] += 1.0;
    }
  }
  NormalizerStats st;
  st.target_std = target_std;
  st.shift.resize(nc);
  st.scale.assign(nc, 1.0);
  for (std::size_t ch = 0; ch < nc; ++ch) st.shift[ch] = sum[ch] / cnt[ch];
  std::vector<double> sq(nc, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = x(r, c) - st.shift[channel_of(dataset.shape, c)];
      sq[channel_of(dataset.shape, c)] += d * d;
    }
  }
  for (std::size_t ch = 0; ch < nc; ++ch) {
    const double sd = std::sqrt(sq[ch] / cnt[ch]);
    if (sd > 1e-12) {
      st.scale[ch] = target_std / sd;
    } else {
      st.degenerate.push_back(ch);
    }
  }
  return st;
}

Tensor<double> normalize_frames(const Tensor<double>& frames, const FrameShape& shape, const NormalizerStats& stats) {
  require(stats.channels() == channel_count(shape) && frames.cols() == shape.dim(), "normalize: channel mismatch");
  Tensor<double> out(frames.rows(), frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      const std::size_t ch = channel_of(shape, c);
      out(r, c) = (frames(r, c) - stats.shift[ch]) * stats.scale[ch];
    }
  }
  return out;
}

Tensor<double> denormalize_frames(const Tensor<double>& frames, const FrameShape& shape, const NormalizerStats& stats) {
  require(stats.channels() == channel_count(shape) && frames.cols() == shape.dim(), "denormalize: channel mismatch");
  Tensor<double> out(frames.rows(), frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      const std::size_t ch = channel_of(shape, c);
      out(r, c) = frames(r, c) / stats.scale[ch] + stats.shift[ch];
    }
  }
  return out;
}

SequenceBatch normalize(const SequenceBatch& batch, const NormalizerStats& stats) {
  SequenceBatch out = batch;
  out.frames = normalize_frames(batch.frames, batch.shape, stats);
  return out;
}

SequenceBatch denormalize(const SequenceBatch& batch, const NormalizerStats& stats) {
  SequenceBatch out = batch;
  out.frames = denormalize_frames(batch.frames, batch.shape, stats);
  return out;
}

}  // namespace seqdiff::data
