// SPDX-License-Identifier: Apache-2.0
//
// Grading networks (VGG / ResNet / SEResNet extraction blocks followed by a
// dense encoder head) and the expert encoder over hand-crafted features.
//
// Layout of a grading model:
//   stem:    conv3d 3^3 (in -> c0) -> group_norm -> relu
//   stage i: extraction block (c_{i-1} -> c_i)
//            conv3d 3^3 stride 2 (c_i -> c_i) -> group_norm -> relu
//   head:    global_avg_pool -> dense(c_last -> hidden) -> relu
//            -> dense(hidden -> latent) -> dense(latent -> classes)
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "enrol/core/tape.hpp"
#include "json.hpp"

namespace enrol::nn {

enum class BlockKind { vgg, resnet, seresnet };

std::string to_string(BlockKind kind);
BlockKind parse_block_kind(const std::string& text);

struct BlockSpec {
  BlockKind kind = BlockKind::vgg;
  std::size_t in_channels = 1;
  std::size_t out_channels = 8;
  std::size_t se_reduction = 4;
  std::size_t groups_for_norm = 4;

  void validate() const;
};

struct ModelSpec {
  BlockKind kind = BlockKind::vgg;
  std::vector<std::size_t> stage_channels{8, 16, 32, 64};
  std::array<std::size_t, 3> input_dims{16, 16, 16};
  std::size_t input_channels = 1;
  std::size_t encoder_hidden = 32;
  std::size_t latent_dim = 16;
  std::size_t num_classes = 2;
  std::size_t se_reduction = 4;
  std::size_t groups_for_norm = 4;

  void validate() const;
};

struct ExpertEncoderSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths{32};
  std::size_t latent_dim = 16;
  std::size_t num_classes = 2;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);
void to_json(nlohmann::json& j, const ExpertEncoderSpec& s);
void from_json(const nlohmann::json& j, ExpertEncoderSpec& s);

/// Ordered parameter storage. Addresses are stable once construction ends.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor value);
  Parameter& at(std::size_t i) { return params_.at(i); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }
  std::size_t size() const { return params_.size(); }
  std::vector<Parameter*> pointers();
  std::vector<const Parameter*> pointers() const;

 private:
  std::vector<Parameter> params_;
};

/// How a forward pass places parameters on the tape.
enum class Binding { trainable, frozen };

/// Binds parameters from a store onto one tape.
class Binder {
 public:
  Binder(Tape& tape, ParameterStore& store, Binding mode) : tape_(tape), store_(store), mode_(mode) {}
  Var operator()(std::size_t index) const;
  Tape& tape() const { return tape_; }

 private:
  Tape& tape_;
  ParameterStore& store_;
  Binding mode_;
};

/// Deterministic fan-in-scaled uniform initializer (He uniform bound
/// sqrt(6 / fan_in)).
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_state_(seed) {}
  Tensor fan_in_uniform(Shape shape, std::size_t fan_in);

 private:
  std::uint64_t next();
  std::uint64_t rng_state_;
};

/// One extraction block. Parameters live in the owning model's store.
class Block {
 public:
  Block(const BlockSpec& spec, const std::string& prefix, ParameterStore& store, Initializer& init);

  /// `pre_activation`, when given, receives the value fed to the final relu.
  Var forward(Var x, const Binder& bind, Var* pre_activation = nullptr,
              Var* se_gate = nullptr) const;

  const BlockSpec& spec() const { return spec_; }

  struct Indices {
    std::size_t conv1, gn1_gain, gn1_bias, conv2, gn2_gain, gn2_bias;
    std::optional<std::size_t> shortcut;
    std::optional<std::size_t> se_w1, se_b1, se_w2, se_b2;
  };
  const Indices& indices() const { return idx_; }

 private:
  BlockSpec spec_;
  Indices idx_{};
};

class Model {
 public:
  virtual ~Model() = default;

  /// Logits [N, num_classes]. Frozen models bind their weights as constants.
  virtual Var forward(Tape& tape, const Tensor& batch) = 0;
  virtual nlohmann::json spec_json() const = 0;
  virtual std::string kind_name() const = 0;
  virtual std::size_t num_classes() const = 0;

  std::vector<Parameter*> parameters() { return store_.pointers(); }
  std::vector<const Parameter*> parameters() const { return store_.pointers(); }
  std::size_t parameter_count() const;
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  /// Flat copy of every parameter value, in declaration order.
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 protected:
  Binding binding() const { return frozen_ ? Binding::frozen : Binding::trainable; }

  ParameterStore store_;
  bool frozen_ = false;
};

class GradingModel final : public Model {
 public:
  GradingModel(ModelSpec spec, std::uint64_t seed);

  Var forward(Tape& tape, const Tensor& batch) override;
  nlohmann::json spec_json() const override;
  std::string kind_name() const override { return "grading"; }
  std::size_t num_classes() const override { return spec_.num_classes; }
  const ModelSpec& spec() const { return spec_; }
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  struct Conv {
    std::size_t weight, gain, bias;
  };
  Var conv_norm_relu(Var x, const Conv& c, std::size_t stride, const Binder& bind) const;

  ModelSpec spec_;
  Conv stem_{};
  std::vector<Block> blocks_;
  std::vector<Conv> downsample_;
  std::size_t enc_w1_ = 0, enc_b1_ = 0, enc_w2_ = 0, enc_b2_ = 0, cls_w_ = 0, cls_b_ = 0;
};

class ExpertEncoder final : public Model {
 public:
  ExpertEncoder(ExpertEncoderSpec spec, std::uint64_t seed);

  Var forward(Tape& tape, const Tensor& features) override;
  nlohmann::json spec_json() const override;
  std::string kind_name() const override { return "expert"; }
  std::size_t num_classes() const override { return spec_.num_classes; }
  const ExpertEncoderSpec& spec() const { return spec_; }

  /// Index of the final dense layer's weight and bias in the store.
  std::size_t classifier_weight_index() const { return cls_w_; }
  std::size_t classifier_bias_index() const { return cls_b_; }

 private:
  ExpertEncoderSpec spec_;
  std::vector<std::pair<std::size_t, std::size_t>> hidden_;
  std::size_t latent_w_ = 0, latent_b_ = 0, cls_w_ = 0, cls_b_ = 0;
};

std::unique_ptr<GradingModel> build_grading_model(const ModelSpec& spec, std::uint64_t seed);
std::unique_ptr<ExpertEncoder> build_expert_encoder(const ExpertEncoderSpec& spec,
                                                    std::uint64_t seed);

/// Closed-form parameter count from layer shapes.
std::size_t expected_parameter_count(const ModelSpec& spec);
std::size_t expected_parameter_count(const BlockSpec& spec);
std::size_t expected_parameter_count(const ExpertEncoderSpec& spec);

}  // namespace enrol::nn
