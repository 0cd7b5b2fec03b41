// SPDX-License-Identifier: Apache-2.0
#include "enrol/nn/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "enrol/core/error.hpp"
#include "enrol/io/binary.hpp"

namespace enrol::nn {
namespace {

constexpr char kMagic[8] = {'E', 'N', 'R', 'L', 'C', 'K', 'P', 'T'};

void load_values(Model& model, const Checkpoint& ck) {
  auto params = model.parameters();
  if (params.size() != ck.values.size())
    throw FormatError("checkpoint holds " + std::to_string(ck.values.size()) +
                      " parameters, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->name != ck.names[i])
      throw FormatError("checkpoint parameter '" + ck.names[i] + "' does not match '" +
                        params[i]->name + "'");
  model.restore(ck.values);
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["kind"] = model.kind_name();
  header["spec"] = model.spec_json();
  header["parameters"] = nlohmann::json::array();
  for (const Parameter* p : model.parameters())
    header["parameters"].push_back({{"name", p->name}, {"shape", p->value.shape()}});
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, sizeof kMagic);
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter* p : model.parameters())
    for (Real v : p->value.data()) io::write_le<double>(os, static_cast<double>(v));
  if (!os) throw InputError("write to '" + path.string() + "' failed");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
    throw FormatError("unrecognized format: '" + path.string() + "' is not a checkpoint");
  const auto version = io::read_le<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto length = io::read_le<std::uint32_t>(is, "checkpoint header length");
  std::string text(length, '\0');
  if (!is.read(text.data(), length)) throw FormatError("truncated checkpoint header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.kind = header.at("kind").get<std::string>();
    ck.spec = header.at("spec");
    for (const auto& p : header.at("parameters")) {
      ck.names.push_back(p.at("name").get<std::string>());
      ck.values.emplace_back(p.at("shape").get<Shape>(), 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  for (Tensor& t : ck.values)
    for (Real& v : t.data()) v = static_cast<Real>(io::read_le<double>(is, "parameter payload"));
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("payload size mismatch: trailing bytes after checkpoint parameters");
  return ck;
}

std::unique_ptr<GradingModel> load_grading_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.kind != "grading") throw FormatError("checkpoint holds a '" + ck.kind + "' model");
  auto model = build_grading_model(ck.spec.get<ModelSpec>(), 0);
  load_values(*model, ck);
  return model;
}

std::unique_ptr<ExpertEncoder> load_expert_encoder(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.kind != "expert") throw FormatError("checkpoint holds a '" + ck.kind + "' model");
  auto model = build_expert_encoder(ck.spec.get<ExpertEncoderSpec>(), 0);
  load_values(*model, ck);
  return model;
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.kind == "grading") {
    auto m = build_grading_model(ck.spec.get<ModelSpec>(), 0);
    load_values(*m, ck);
    return m;
  }
  if (ck.kind == "expert") {
    auto m = build_expert_encoder(ck.spec.get<ExpertEncoderSpec>(), 0);
    load_values(*m, ck);
    return m;
  }
  throw FormatError("unknown model kind '" + ck.kind + "' in checkpoint");
}

}  // namespace enrol::nn
