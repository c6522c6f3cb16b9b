#include "seqdiff/harness/checkpoint.hpp"

#include <fstream>

#include "seqdiff/io/binary.hpp"

namespace seqdiff::harness {

using namespace io;

namespace {

void put_doubles(std::ostream& os, const std::vector<double>& v) {
  put<std::uint64_t>(os, v.size());
  put_array(os, v.data(), v.size());
}

std::vector<double> get_doubles(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("array length out of range");
  std::vector<double> v(n);
  get_array(is, v.data(), n);
  return v;
}

void put_params(std::ostream& os, const nn::ParamSet<float>& ps) {
  put<std::uint64_t>(os, ps.items().size());
  for (const auto& [name, v] : ps.items()) {
    put_string(os, name);
    put_tensor(os, v.value());
  }
}

void get_params(std::istream& is, nn::ParamSet<float>& ps, const std::string& what) {
  const auto n = get<std::uint64_t>(is);
  if (n != ps.items().size()) throw FormatError(what + ": parameter count differs from the configured model");
  for (const auto& [name, v] : ps.items()) {
    const auto stored = get_string(is);
    if (stored != name) throw FormatError(what + ": expected parameter " + name + ", found " + stored);
    auto t = get_tensor<float>(is);
    if (!t.same_shape(v.value())) throw FormatError(what + ": shape mismatch for " + name);
    auto handle = v;
    handle.mutable_value() = std::move(t);
  }
}

void put_normalizer(std::ostream& os, const data::NormalizerStats& s) {
  put_doubles(os, s.shift);
  put_doubles(os, s.scale);
  put<double>(os, s.target_std);
  put<std::uint64_t>(os, s.degenerate.size());
  for (const std::uint64_t d : s.degenerate) put(os, d);
}

data::NormalizerStats get_normalizer(std::istream& is) {
  data::NormalizerStats s;
  s.shift = get_doubles(is);
  s.scale = get_doubles(is);
  s.target_std = get<double>(is);
  const auto n = get<std::uint64_t>(is);
  if (n > s.shift.size()) throw FormatError("normalizer: degenerate list out of range");
  s.degenerate.resize(n);
  for (auto& d : s.degenerate) d = get<std::uint64_t>(is);
  if (s.scale.size() != s.shift.size()) throw FormatError("normalizer: shift and scale differ in length");
  return s;
}

void put_prior_config(std::ostream& os, const prior::LatentPriorConfig& c) {
  for (const std::uint64_t v : {c.steps, c.mlp_layers, c.mlp_hidden, c.joint_dim, c.time_embed_dim}) put(os, v);
  put<double>(os, c.beta_start);
  put<double>(os, c.beta_end);
}

prior::LatentPriorConfig get_prior_config(std::istream& is) {
  prior::LatentPriorConfig c;
  c.steps = get<std::uint64_t>(is);
  c.mlp_layers = get<std::uint64_t>(is);
  c.mlp_hidden = get<std::uint64_t>(is);
  c.joint_dim = get<std::uint64_t>(is);
  c.time_embed_dim = get<std::uint64_t>(is);
  c.beta_start = get<double>(is);
  c.beta_end = get<double>(is);
  return c;
}

}  // namespace

Checkpoint new_checkpoint(const ExperimentConfig& cfg, const FrameShape& frame, data::NormalizerStats normalizer) {
  Checkpoint c;
  c.model = std::make_unique<Model>(cfg, frame);
  c.state = make_train_state(*c.model);
  c.normalizer = std::move(normalizer);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  require(c.model != nullptr, "checkpoint: no model");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write("SQCK", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put_string(os, c.config().to_text());
  put_string(os, c.config().hash());
  const auto& f = c.model->frame();
  for (const std::uint64_t v : {f.channels, f.height, f.width}) put(os, v);
  put_normalizer(os, c.normalizer);
  put<std::uint64_t>(os, c.state.step);
  put_string(os, c.state.rng.save());
  put_doubles(os, c.state.losses);
  put_params(os, c.model->params());
  put<std::uint64_t>(os, c.state.opt.steps());
  const auto& slots = c.state.opt.slots();
  require(slots.size() == c.model->params().items().size(), "checkpoint: optimizer does not match the model");
  for (const auto& s : slots) {
    put_tensor(os, s.m);
    put_tensor(os, s.v);
  }
  put<std::uint8_t>(os, c.prior ? 1 : 0);
  if (c.prior) {
    const auto& p = c.prior->prior;
    put_prior_config(os, p.config);
    put_doubles(os, p.standardizer.mean);
    put_doubles(os, p.standardizer.scale);
    put_doubles(os, c.prior->losses);
    put_params(os, p.params);
  }
  if (!os) throw FormatError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[4];
  get_array(is, magic, 4);
  if (std::string(magic, 4) != "SQCK") throw FormatError(path + ": not a checkpoint file");
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto cfg = ExperimentConfig::from_text(get_string(is, std::size_t{1} << 24));
  if (get_string(is) != cfg.hash()) throw FormatError(path + ": config hash does not match the stored config");
  FrameShape f;
  f.channels = get<std::uint64_t>(is);
  f.height = get<std::uint64_t>(is);
  f.width = get<std::uint64_t>(is);
  Checkpoint c = new_checkpoint(cfg, f, get_normalizer(is));
  if (c.normalizer.channels() != f.channels && c.normalizer.channels() != f.dim()) {
    throw FormatError(path + ": normalizer does not match the frame shape");
  }
  c.state.step = get<std::uint64_t>(is);
  c.state.rng.load(get_string(is));
  c.state.losses = get_doubles(is);
  get_params(is, c.model->params(), path);
  c.state.opt.set_steps(get<std::uint64_t>(is));
  for (auto& s : c.state.opt.slots()) {
    auto m = get_tensor<float>(is);
    auto v = get_tensor<float>(is);
    if (!m.same_shape(s.m) || !v.same_shape(s.v)) throw FormatError(path + ": optimizer moment shape mismatch");
    s.m = std::move(m);
    s.v = std::move(v);
  }
  if (get<std::uint8_t>(is) != 0) {
    c.prior = std::make_unique<PriorState>();
    const auto pc = get_prior_config(is);
    pc.validate();
    Rng init(0);
    c.prior->prior.init(pc, "prior", init);
    c.prior->prior.standardizer.mean = get_doubles(is);
    c.prior->prior.standardizer.scale = get_doubles(is);
    c.prior->losses = get_doubles(is);
    if (c.prior->prior.standardizer.mean.size() != pc.joint_dim ||
        c.prior->prior.standardizer.scale.size() != pc.joint_dim) {
      throw FormatError(path + ": prior standardizer width mismatch");
    }
    get_params(is, c.prior->prior.params, path + " (prior)");
  }
  return c;
}

}  // namespace seqdiff::harness
