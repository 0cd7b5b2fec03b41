// SPDX-License-Identifier: Apache-2.0
#include "enrol/nn/models.hpp"

#include <cmath>

#include "enrol/core/error.hpp"
#include "enrol/core/ops.hpp"

namespace enrol::nn {
namespace {

constexpr Real kNormEps = 1e-5;
// Keeps the squeeze relu open at init; GAP of a group-normalized map is near 0.
constexpr Real kSqueezeBias = 1.0;
constexpr std::size_t kKernel = 3;

Shape conv_shape(std::size_t out, std::size_t in, std::size_t k) { return {out, in, k, k, k}; }

}  // namespace

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::vgg:
      return "vgg";
    case BlockKind::resnet:
      return "resnet";
    case BlockKind::seresnet:
      return "seresnet";
  }
  return "vgg";
}

BlockKind parse_block_kind(const std::string& text) {
  if (text == "vgg") return BlockKind::vgg;
  if (text == "resnet") return BlockKind::resnet;
  if (text == "seresnet") return BlockKind::seresnet;
  throw ConfigError("unknown architecture '" + text + "' (expected vgg, resnet or seresnet)");
}

void BlockSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) throw ConfigError("block channels must be positive");
  if (groups_for_norm == 0 || out_channels % groups_for_norm != 0)
    throw ConfigError("block out_channels " + std::to_string(out_channels) +
                      " not divisible by groups_for_norm " + std::to_string(groups_for_norm));
  if (kind == BlockKind::seresnet && (se_reduction == 0 || se_reduction > out_channels))
    throw ConfigError("se_reduction must lie in [1, out_channels]");
}

void ModelSpec::validate() const {
  if (stage_channels.empty()) throw ConfigError("model needs at least one stage");
  if (input_channels == 0 || latent_dim == 0 || encoder_hidden == 0)
    throw ConfigError("model widths must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  const std::size_t factor = std::size_t{1} << stage_channels.size();
  for (std::size_t d : input_dims)
    if (d == 0 || d % factor != 0)
      throw ConfigError("input dims must be divisible by 2^stages = " + std::to_string(factor));
  std::size_t prev = stage_channels.front();
  for (std::size_t c : stage_channels) {
    BlockSpec{kind, prev, c, se_reduction, groups_for_norm}.validate();
    prev = c;
  }
}

void ExpertEncoderSpec::validate() const {
  if (input_dim == 0) throw ConfigError("expert encoder input_dim must be positive");
  if (latent_dim == 0) throw ConfigError("expert encoder latent_dim must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  for (std::size_t w : hidden_widths)
    if (w == 0) throw ConfigError("expert encoder hidden widths must be positive");
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"kind", to_string(s.kind)},
       {"stage_channels", s.stage_channels},
       {"input_dims", s.input_dims},
       {"input_channels", s.input_channels},
       {"encoder_hidden", s.encoder_hidden},
       {"latent_dim", s.latent_dim},
       {"num_classes", s.num_classes},
       {"se_reduction", s.se_reduction},
       {"groups_for_norm", s.groups_for_norm}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
  s = ModelSpec{};
  s.kind = parse_block_kind(j.at("kind").get<std::string>());
  if (j.contains("stage_channels")) j.at("stage_channels").get_to(s.stage_channels);
  if (j.contains("input_dims")) j.at("input_dims").get_to(s.input_dims);
  if (j.contains("input_channels")) j.at("input_channels").get_to(s.input_channels);
  if (j.contains("encoder_hidden")) j.at("encoder_hidden").get_to(s.encoder_hidden);
  if (j.contains("latent_dim")) j.at("latent_dim").get_to(s.latent_dim);
  if (j.contains("num_classes")) j.at("num_classes").get_to(s.num_classes);
  if (j.contains("se_reduction")) j.at("se_reduction").get_to(s.se_reduction);
  if (j.contains("groups_for_norm")) j.at("groups_for_norm").get_to(s.groups_for_norm);
}

void to_json(nlohmann::json& j, const ExpertEncoderSpec& s) {
  j = {{"input_dim", s.input_dim},
       {"hidden_widths", s.hidden_widths},
       {"latent_dim", s.latent_dim},
       {"num_classes", s.num_classes}};
}

void from_json(const nlohmann::json& j, ExpertEncoderSpec& s) {
  s = ExpertEncoderSpec{};
  j.at("input_dim").get_to(s.input_dim);
  if (j.contains("hidden_widths")) j.at("hidden_widths").get_to(s.hidden_widths);
  if (j.contains("latent_dim")) j.at("latent_dim").get_to(s.latent_dim);
  if (j.contains("num_classes")) j.at("num_classes").get_to(s.num_classes);
}

std::size_t ParameterStore::add(std::string name, Tensor value) {
  params_.emplace_back(std::move(name), std::move(value));
  return params_.size() - 1;
}

std::vector<Parameter*> ParameterStore::pointers() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::pointers() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : params_) out.push_back(&p);
  return out;
}

Var Binder::operator()(std::size_t index) const {
  Parameter& p = store_.at(index);
  return mode_ == Binding::trainable ? tape_.parameter(p) : tape_.constant(p.value);
}

std::uint64_t Initializer::next() {
  // splitmix64: identical streams on every platform.
  std::uint64_t z = (rng_state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor Initializer::fan_in_uniform(Shape shape, std::size_t fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape), 0);
  for (Real& v : t.data()) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;  // [0,1)
    v = static_cast<Real>((2 * u - 1) * bound);
  }
  return t;
}

Block::Block(const BlockSpec& spec, const std::string& prefix, ParameterStore& store,
             Initializer& init)
    : spec_(spec) {
  spec_.validate();
  const std::size_t in = spec.in_channels, out = spec.out_channels;
  const std::size_t k3 = kKernel * kKernel * kKernel;
  idx_.conv1 = store.add(prefix + ".conv1.weight",
                         init.fan_in_uniform(conv_shape(out, in, kKernel), in * k3));
  idx_.gn1_gain = store.add(prefix + ".norm1.gain", Tensor({out}, 1));
  idx_.gn1_bias = store.add(prefix + ".norm1.bias", Tensor({out}, 0));
  idx_.conv2 = store.add(prefix + ".conv2.weight",
                         init.fan_in_uniform(conv_shape(out, out, kKernel), out * k3));
  idx_.gn2_gain = store.add(prefix + ".norm2.gain", Tensor({out}, 1));
  idx_.gn2_bias = store.add(prefix + ".norm2.bias", Tensor({out}, 0));
  if (spec.kind != BlockKind::vgg && in != out)
    idx_.shortcut = store.add(prefix + ".shortcut.weight",
                              init.fan_in_uniform(conv_shape(out, in, 1), in));
  if (spec.kind == BlockKind::seresnet) {
    const std::size_t squeezed = out / spec.se_reduction;
    idx_.se_w1 = store.add(prefix + ".se.fc1.weight", init.fan_in_uniform({out, squeezed}, out));
    idx_.se_b1 = store.add(prefix + ".se.fc1.bias", Tensor({squeezed}, kSqueezeBias));
    idx_.se_w2 = store.add(prefix + ".se.fc2.weight",
                           init.fan_in_uniform({squeezed, out}, squeezed));
    idx_.se_b2 = store.add(prefix + ".se.fc2.bias", Tensor({out}, 0));
  }
}

Var Block::forward(Var x, const Binder& bind, Var* pre_activation, Var* se_gate) const {
  const std::size_t g = spec_.groups_for_norm;
  Var h = ops::conv3d(x, bind(idx_.conv1), 1, 1);
  h = ops::relu(ops::group_norm(h, g, kNormEps, bind(idx_.gn1_gain), bind(idx_.gn1_bias)));
  h = ops::conv3d(h, bind(idx_.conv2), 1, 1);
  h = ops::group_norm(h, g, kNormEps, bind(idx_.gn2_gain), bind(idx_.gn2_bias));
  if (spec_.kind == BlockKind::seresnet) {
    Var s = ops::global_avg_pool(h);
    s = ops::relu(ops::dense(s, bind(*idx_.se_w1), bind(*idx_.se_b1)));
    s = ops::sigmoid(ops::dense(s, bind(*idx_.se_w2), bind(*idx_.se_b2)));
    if (se_gate) *se_gate = s;
    h = ops::channel_scale(h, s);
  }
  if (spec_.kind != BlockKind::vgg) {
    Var shortcut = idx_.shortcut ? ops::conv3d(x, bind(*idx_.shortcut), 1, 0) : x;
    h = ops::add(h, shortcut);
  }
  if (pre_activation) *pre_activation = h;
  return ops::relu(h);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : store_.pointers()) n += p->value.size();
  return n;
}

std::vector<Tensor> Model::snapshot() const {
  std::vector<Tensor> out;
  for (const Parameter* p : store_.pointers()) out.push_back(p->value);
  return out;
}

void Model::restore(const std::vector<Tensor>& values) {
  auto ps = store_.pointers();
  if (values.size() != ps.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (values[i].shape() != ps[i]->value.shape())
      throw ShapeError("restore: shape mismatch for '" + ps[i]->name + "'");
    ps[i]->value = values[i];
    ps[i]->momentum = Tensor(values[i].shape(), 0);
    ps[i]->zero_grad();
  }
}

GradingModel::GradingModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Initializer init(seed);
  const std::size_t k3 = kKernel * kKernel * kKernel;
  auto add_conv = [&](const std::string& name, std::size_t in, std::size_t out) {
    Conv c{};
    c.weight = store_.add(name + ".weight", init.fan_in_uniform(conv_shape(out, in, kKernel), in * k3));
    c.gain = store_.add(name + ".norm.gain", Tensor({out}, 1));
    c.bias = store_.add(name + ".norm.bias", Tensor({out}, 0));
    return c;
  };
  std::size_t prev = spec_.stage_channels.front();
  stem_ = add_conv("stem", spec_.input_channels, prev);
  for (std::size_t i = 0; i < spec_.stage_channels.size(); ++i) {
    const std::size_t c = spec_.stage_channels[i];
    const std::string prefix = "stage" + std::to_string(i);
    blocks_.emplace_back(BlockSpec{spec_.kind, prev, c, spec_.se_reduction, spec_.groups_for_norm},
                         prefix + ".block", store_, init);
    downsample_.push_back(add_conv(prefix + ".down", c, c));
    prev = c;
  }
  enc_w1_ = store_.add("encoder.fc1.weight", init.fan_in_uniform({prev, spec_.encoder_hidden}, prev));
  enc_b1_ = store_.add("encoder.fc1.bias", Tensor({spec_.encoder_hidden}, 0));
  enc_w2_ = store_.add("encoder.latent.weight",
                       init.fan_in_uniform({spec_.encoder_hidden, spec_.latent_dim}, spec_.encoder_hidden));
  enc_b2_ = store_.add("encoder.latent.bias", Tensor({spec_.latent_dim}, 0));
  cls_w_ = store_.add("classifier.weight",
                      init.fan_in_uniform({spec_.latent_dim, spec_.num_classes}, spec_.latent_dim));
  cls_b_ = store_.add("classifier.bias", Tensor({spec_.num_classes}, 0));
}

Var GradingModel::conv_norm_relu(Var x, const Conv& c, std::size_t stride, const Binder& bind) const {
  Var h = ops::conv3d(x, bind(c.weight), stride, 1);
  return ops::relu(ops::group_norm(h, spec_.groups_for_norm, kNormEps, bind(c.gain), bind(c.bias)));
}

Var GradingModel::forward(Tape& tape, const Tensor& batch) {
  const Shape expect{spec_.input_channels, spec_.input_dims[0], spec_.input_dims[1],
                     spec_.input_dims[2]};
  if (batch.rank() != 5 || Shape(batch.shape().begin() + 1, batch.shape().end()) != expect)
    throw ShapeError("grading model expects [N," + std::to_string(expect[0]) + "," +
                     std::to_string(expect[1]) + "," + std::to_string(expect[2]) + "," +
                     std::to_string(expect[3]) + "], got " + shape_string(batch.shape()));
  Binder bind(tape, store_, binding());
  Var x = conv_norm_relu(tape.constant(batch), stem_, 1, bind);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i].forward(x, bind);
    x = conv_norm_relu(x, downsample_[i], 2, bind);
  }
  x = ops::global_avg_pool(x);
  x = ops::relu(ops::dense(x, bind(enc_w1_), bind(enc_b1_)));
  x = ops::dense(x, bind(enc_w2_), bind(enc_b2_));
  return ops::dense(x, bind(cls_w_), bind(cls_b_));
}

nlohmann::json GradingModel::spec_json() const { return nlohmann::json(spec_); }

ExpertEncoder::ExpertEncoder(ExpertEncoderSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Initializer init(seed);
  std::size_t prev = spec_.input_dim;
  for (std::size_t i = 0; i < spec_.hidden_widths.size(); ++i) {
    const std::size_t w = spec_.hidden_widths[i];
    const std::string name = "hidden" + std::to_string(i);
    const std::size_t wi = store_.add(name + ".weight", init.fan_in_uniform({prev, w}, prev));
    const std::size_t bi = store_.add(name + ".bias", Tensor({w}, 0));
    hidden_.emplace_back(wi, bi);
    prev = w;
  }
  latent_w_ = store_.add("latent.weight", init.fan_in_uniform({prev, spec_.latent_dim}, prev));
  latent_b_ = store_.add("latent.bias", Tensor({spec_.latent_dim}, 0));
  cls_w_ = store_.add("classifier.weight",
                      init.fan_in_uniform({spec_.latent_dim, spec_.num_classes}, spec_.latent_dim));
  cls_b_ = store_.add("classifier.bias", Tensor({spec_.num_classes}, 0));
}

Var ExpertEncoder::forward(Tape& tape, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != spec_.input_dim)
    throw ShapeError("expert encoder expects [N," + std::to_string(spec_.input_dim) + "], got " +
                     shape_string(features.shape()));
  Binder bind(tape, store_, binding());
  Var x = tape.constant(features);
  for (const auto& [w, b] : hidden_) x = ops::relu(ops::dense(x, bind(w), bind(b)));
  x = ops::dense(x, bind(latent_w_), bind(latent_b_));
  return ops::dense(x, bind(cls_w_), bind(cls_b_));
}

nlohmann::json ExpertEncoder::spec_json() const { return nlohmann::json(spec_); }

std::unique_ptr<GradingModel> build_grading_model(const ModelSpec& spec, std::uint64_t seed) {
  return std::make_unique<GradingModel>(spec, seed);
}

std::unique_ptr<ExpertEncoder> build_expert_encoder(const ExpertEncoderSpec& spec,
                                                    std::uint64_t seed) {
  return std::make_unique<ExpertEncoder>(spec, seed);
}

std::size_t expected_parameter_count(const BlockSpec& s) {
  const std::size_t in = s.in_channels, out = s.out_channels, k3 = 27;
  std::size_t n = out * in * k3 + 2 * out + out * out * k3 + 2 * out;
  if (s.kind != BlockKind::vgg && in != out) n += out * in;
  if (s.kind == BlockKind::seresnet) {
    const std::size_t r = out / s.se_reduction;
    n += out * r + r + r * out + out;
  }
  return n;
}

std::size_t expected_parameter_count(const ModelSpec& s) {
  const std::size_t k3 = 27;
  std::size_t prev = s.stage_channels.front();
  std::size_t n = s.input_channels * prev * k3 + 2 * prev;
  for (std::size_t c : s.stage_channels) {
    n += expected_parameter_count(BlockSpec{s.kind, prev, c, s.se_reduction, s.groups_for_norm});
    n += c * c * k3 + 2 * c;
    prev = c;
  }
  n += prev * s.encoder_hidden + s.encoder_hidden;
  n += s.encoder_hidden * s.latent_dim + s.latent_dim;
  n += s.latent_dim * s.num_classes + s.num_classes;
  return n;
}

std::size_t expected_parameter_count(const ExpertEncoderSpec& s) {
  std::size_t n = 0, prev = s.input_dim;
  for (std::size_t w : s.hidden_widths) {
    n += prev * w + w;
    prev = w;
  }
  n += prev * s.latent_dim + s.latent_dim;
  n += s.latent_dim * s.num_classes + s.num_classes;
  return n;
}

}  // namespace enrol::nn
