// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoints: "ENRLCKPT", u32 version, u32 header length, a JSON header
// {kind, spec, parameters:[{name, shape}]}, then every parameter as
// little-endian f64 in declaration order.
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "enrol/nn/models.hpp"

namespace enrol::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;  // "grading" or "expert"
  nlohmann::json spec;
  std::vector<std::string> names;
  std::vector<Tensor> values;
};

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model described by the checkpoint and loads its parameters.
std::unique_ptr<Model> load_model(const std::filesystem::path& path);
std::unique_ptr<GradingModel> load_grading_model(const std::filesystem::path& path);
std::unique_ptr<ExpertEncoder> load_expert_encoder(const std::filesystem::path& path);

}  // namespace enrol::nn
