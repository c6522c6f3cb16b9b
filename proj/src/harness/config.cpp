#include "seqdiff/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "seqdiff/io/binary.hpp"

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "config keys assume a 64-bit size_t");

namespace seqdiff::harness {

namespace {

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string bad(const std::string& key, const std::string& value) {
  return "config: bad value '" + value + "' for " + key;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(bad(key, v));
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(bad(key, v));
  }
  if (used != v.size()) throw ConfigError(bad(key, v));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(bad(key, v));
}

// Visits every key in canonical order. `f(key, field&)` is overloaded on
// the field type by the callers below.
template <class C, class F>
void visit(C& c, F&& f) {
  f("seed", c.seed);
  f("data.generator", c.data.generator);
  f("data.train_count", c.data.train_count);
  f("data.test_count", c.data.test_count);
  f("data.frames", c.data.frames);
  f("data.world_seed", c.data.world_seed);
  f("model.encoder_backbone", c.model.encoder_backbone);
  f("model.frame_feature_dim", c.model.frame_feature_dim);
  f("model.hidden_dim", c.model.hidden_dim);
  f("model.static_dim", c.model.static_dim);
  f("model.dynamic_dim", c.model.dynamic_dim);
  f("model.share_static", c.model.share_static);
  f("model.denoiser_backbone", c.model.denoiser_backbone);
  f("model.width", c.model.width);
  f("model.blocks", c.model.blocks);
  f("model.base_channels", c.model.base_channels);
  f("model.groups", c.model.groups);
  f("model.embed_dim", c.model.embed_dim);
  f("model.temb_dim", c.model.temb_dim);
  f("diffusion.sigma_data", c.diffusion.sigma_data);
  f("diffusion.p_mean", c.diffusion.p_mean);
  f("diffusion.p_std", c.diffusion.p_std);
  f("diffusion.sigma_min", c.diffusion.sigma_min);
  f("diffusion.sigma_max", c.diffusion.sigma_max);
  f("diffusion.rho", c.diffusion.rho);
  f("sampler.steps", c.sampler.steps);
  f("sampler.s_churn", c.sampler.churn.s_churn);
  f("sampler.s_noise", c.sampler.churn.s_noise);
  f("sampler.s_tmin", c.sampler.churn.s_tmin);
  f("sampler.s_tmax", c.sampler.churn.s_tmax);
  f("sampler.swap_encoding", c.sampler.swap_encoding);
  f("optim.lr", c.optim.lr);
  f("optim.weight_decay", c.optim.weight_decay);
  f("optim.batch", c.optim.batch);
  f("optim.steps", c.optim.steps);
  f("optim.warmup", c.optim.warmup);
  f("optim.final_lr_fraction", c.optim.final_lr_fraction);
  f("optim.grad_clip", c.optim.grad_clip);
  f("prior.T", c.prior.net.steps);
  f("prior.beta_start", c.prior.net.beta_start);
  f("prior.beta_end", c.prior.net.beta_end);
  f("prior.mlp_layers", c.prior.net.mlp_layers);
  f("prior.mlp_hidden", c.prior.net.mlp_hidden);
  f("prior.time_embed_dim", c.prior.net.time_embed_dim);
  f("prior.iterations", c.prior.train.iterations);
  f("prior.batch", c.prior.train.batch);
  f("prior.lr", c.prior.train.lr);
  f("prior.weight_decay", c.prior.train.weight_decay);
  f("prior.final_lr_fraction", c.prior.train.final_lr_fraction);
  f("prior.ddim_steps", c.prior.ddim_steps);
  f("eval.pairs", c.eval.pairs);
  f("eval.pair_seed", c.eval.pair_seed);
  f("eval.kappa", c.eval.kappa);
  f("eval.pool", c.eval.pool);
  f("eval.dynamic_pooling", c.eval.dynamic_pooling);
  f("eval.probe_epochs", c.eval.probe_epochs);
}

std::string show(const std::size_t& v) { return std::to_string(v); }
std::string show(const double& v) { return format_real(v); }
std::string show(const bool& v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(const encoder::FrameBackbone& v) { return v == encoder::FrameBackbone::mlp ? "mlp" : "conv"; }
std::string show(const denoiser::Backbone& v) { return denoiser::to_string(v); }
std::string show(const sampler::SwapEncoding& v) { return sampler::to_string(v); }

void assign(std::size_t& f, const std::string& k, const std::string& v) { f = parse_uint(k, v); }
void assign(double& f, const std::string& k, const std::string& v) { f = parse_real(k, v); }
void assign(bool& f, const std::string& k, const std::string& v) { f = parse_bool(k, v); }
void assign(std::string& f, const std::string& k, const std::string& v) {
  if (v.empty() || v.find_first_of(" \t=#") != std::string::npos) throw ConfigError(bad(k, v));
  f = v;
}
void assign(encoder::FrameBackbone& f, const std::string& k, const std::string& v) {
  if (v == "mlp") {
    f = encoder::FrameBackbone::mlp;
  } else if (v == "conv") {
    f = encoder::FrameBackbone::conv;
  } else {
    throw ConfigError(bad(k, v));
  }
}
void assign(denoiser::Backbone& f, const std::string& k, const std::string& v) {
  if (v == "mlp") {
    f = denoiser::Backbone::mlp;
  } else if (v == "unet") {
    f = denoiser::Backbone::unet;
  } else {
    throw ConfigError(bad(k, v));
  }
}
void assign(sampler::SwapEncoding& f, const std::string& k, const std::string& v) {
  try {
    f = sampler::parse_swap_encoding(v);
  } catch (const ConfigError&) {
    throw ConfigError(bad(k, v));
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.frames < 2) throw ConfigError("config: data.frames must be at least 2");
  if (data.train_count == 0) throw ConfigError("config: data.train_count must be positive");
  if (optim.batch == 0 || optim.steps == 0) throw ConfigError("config: optim.batch and optim.steps must be positive");
  if (!(optim.lr > 0)) throw ConfigError("config: optim.lr must be positive");
  if (!(prior.train.final_lr_fraction > 0 && prior.train.final_lr_fraction <= 1)) {
    throw ConfigError("config: prior.final_lr_fraction must lie in (0, 1]");
  }
  if (!(optim.final_lr_fraction > 0 && optim.final_lr_fraction <= 1)) {
    throw ConfigError("config: optim.final_lr_fraction must lie in (0, 1]");
  }
  if (sampler.steps == 0) throw ConfigError("config: sampler.steps must be positive");
  if (eval.dynamic_pooling != "mean" && eval.dynamic_pooling != "last") {
    throw ConfigError("config: eval.dynamic_pooling must be mean or last");
  }
  if (!(eval.kappa > 0)) throw ConfigError("config: eval.kappa must be positive");
  diffusion.validate();
  if (model.dynamic_dim > model.static_dim) throw ConfigError("config: model.dynamic_dim exceeds model.static_dim");
  if (model.denoiser_backbone == denoiser::Backbone::unet && data.generator != "bouncing") {
    throw ConfigError("config: unet denoiser requires an image dataset");
  }
  if (model.encoder_backbone == encoder::FrameBackbone::conv && data.generator != "bouncing") {
    throw ConfigError("config: conv encoder requires an image dataset");
  }
  if (model.width % model.groups != 0) throw ConfigError("config: model.width must be a multiple of model.groups");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  visit(*this, [&](const char* key, const auto& field) { os << key << " = " << show(field) << '\n'; });
  return os.str();
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit(*this, [&](const char* k, auto& field) {
    if (key == k) {
      assign(field, key, value);
      found = true;
    }
  });
  if (!found) throw ConfigError("config: unknown key '" + key + "'");
}

std::string ExperimentConfig::get(const std::string& key) const {
  std::string out;
  bool found = false;
  visit(*this, [&](const char* k, const auto& field) {
    if (key == k) {
      out = show(field);
      found = true;
    }
  });
  if (!found) throw ConfigError("config: unknown key '" + key + "'");
  return out;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw ConfigError("config: cannot write " + path);
  os << to_text();
}

std::string ExperimentConfig::hash() const { return io::hex64(io::fnv1a(to_text())); }

encoder::EncoderConfig ExperimentConfig::encoder_config(const FrameShape& frame) const {
  encoder::EncoderConfig e;
  e.frame = frame;
  e.backbone = model.encoder_backbone;
  e.frame_feature_dim = model.frame_feature_dim;
  e.hidden_dim = model.hidden_dim;
  e.static_dim = model.static_dim;
  e.dynamic_dim = model.dynamic_dim;
  e.share_static = model.share_static;
  e.validate();
  return e;
}

denoiser::DenoiserNetConfig ExperimentConfig::denoiser_config(const FrameShape& frame) const {
  denoiser::DenoiserNetConfig d;
  d.frame = frame;
  d.cond_dim = model.static_dim + model.dynamic_dim;
  d.backbone = model.denoiser_backbone;
  d.width = model.width;
  d.blocks = model.blocks;
  d.base_channels = model.base_channels;
  d.groups = model.groups;
  d.embed_dim = model.embed_dim;
  d.temb_dim = model.temb_dim;
  return d;
}

diffusion::SigmaSchedule ExperimentConfig::schedule() const {
  return diffusion::karras_step_schedule(sampler.steps, diffusion, sampler.churn);
}

ExperimentConfig preset(const std::string& generator) {
  ExperimentConfig c;
  c.data.generator = generator;
  if (generator == "bouncing") {
    c.model.encoder_backbone = encoder::FrameBackbone::conv;
    c.model.static_dim = 16;
    c.model.dynamic_dim = 2;
    c.model.denoiser_backbone = denoiser::Backbone::unet;
    c.diffusion.p_mean = -1.2;
    c.diffusion.p_std = 1.2;
  } else if (generator == "speaker") {
    c.model.encoder_backbone = encoder::FrameBackbone::mlp;
    c.model.static_dim = 16;
    c.model.dynamic_dim = 2;
    c.diffusion.p_mean = -0.4;
    c.diffusion.p_std = 1.0;
  } else if (generator == "physio" || generator == "correlated") {
    if (generator == "correlated") {
      c.data.train_count = 4096;
      c.data.test_count = 1024;
    }
    c.model.encoder_backbone = encoder::FrameBackbone::mlp;
    c.model.static_dim = 12;
    c.model.dynamic_dim = 2;
    c.model.width = 128;
    c.diffusion.p_mean = -0.4;
    c.diffusion.p_std = 1.0;
  } else {
    throw ConfigError("preset: unknown generator '" + generator + "'");
  }
  return c;
}

}  // namespace seqdiff::harness
