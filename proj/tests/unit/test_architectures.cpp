// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "enrol/core/error.hpp"
#include "enrol/core/ops.hpp"
#include "enrol/nn/checkpoint.hpp"
#include "enrol/nn/models.hpp"
#include "test_util.hpp"

using namespace enrol;
using namespace enrol::nn;
using enrol::testing::random_tensor;

namespace {

ModelSpec small_spec(BlockKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.stage_channels = {4, 8};
  s.input_dims = {8, 8, 8};
  s.encoder_hidden = 8;
  s.latent_dim = 4;
  s.groups_for_norm = 2;
  s.se_reduction = 2;
  return s;
}

Tensor run_block(const Block& block, ParameterStore& store, const Tensor& input,
                 Var* pre = nullptr, Var* gate = nullptr, Tape* tape_out = nullptr) {
  Tape local;
  Tape& tape = tape_out ? *tape_out : local;
  Binder bind(tape, store, Binding::frozen);
  Var y = block.forward(tape.constant(input), bind, pre, gate);
  if (pre) *pre = tape.constant(pre->value());
  if (gate) *gate = tape.constant(gate->value());
  return y.value();
}

Tensor logits_of(Model& m, const Tensor& batch) {
  Tape tape;
  return m.forward(tape, batch).value();
}

// Extracts sample i of a batch as a batch of one.
Tensor sample(const Tensor& batch, std::size_t i) {
  Shape s = batch.shape();
  const std::size_t per = batch.size() / s[0];
  s[0] = 1;
  std::vector<Real> v(batch.raw() + i * per, batch.raw() + (i + 1) * per);
  return Tensor(s, std::move(v));
}

}  // namespace

TEST_CASE("block kinds: SE gate at one reproduces resnet") {
  std::mt19937_64 rng(3);
  ParameterStore se_store, res_store;
  Initializer a(11), b(11);
  const BlockSpec se{BlockKind::seresnet, 4, 8, 2, 2};
  const BlockSpec rs{BlockKind::resnet, 4, 8, 2, 2};
  Block se_block(se, "b", se_store, a);
  Block res_block(rs, "b", res_store, b);
  // Copy shared conv/norm/shortcut weights; force excitation to sigmoid(50) == 1 in double.
  for (std::size_t i = 0; i < res_store.size(); ++i) se_store.at(i).value = res_store.at(i).value;
  se_store.at(*se_block.indices().se_w2).value.fill(0);
  se_store.at(*se_block.indices().se_b2).value.fill(50);

  const Tensor x = random_tensor({2, 4, 4, 4, 4}, rng);
  Var gate;
  Tape tape;
  const Tensor ys = run_block(se_block, se_store, x, nullptr, &gate, &tape);
  const Tensor yr = run_block(res_block, res_store, x);
  for (Real g : gate.value().data()) CHECK(g == 1.0);
  for (std::size_t i = 0; i < ys.size(); ++i) CHECK(ys[i] == doctest::Approx(yr[i]).epsilon(1e-15));
}

TEST_CASE("block kinds: zero conv weights leave the shortcut") {
  std::mt19937_64 rng(5);
  ParameterStore store;
  Initializer init(1);
  Block block(BlockSpec{BlockKind::resnet, 4, 4, 4, 2}, "b", store, init);
  store.at(block.indices().conv1).value.fill(0);
  store.at(block.indices().conv2).value.fill(0);
  CHECK_FALSE(block.indices().shortcut.has_value());
  const Tensor x = random_tensor({1, 4, 4, 4, 4}, rng);
  const Tensor y = run_block(block, store, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == std::max<Real>(x[i], 0));
}

TEST_CASE("block kinds: vgg and resnet differ by the shortcut pre-activation") {
  std::mt19937_64 rng(8);
  for (std::size_t in : {4u, 6u}) {
    ParameterStore vs, rs;
    Initializer a(21), b(21);
    Block vgg(BlockSpec{BlockKind::vgg, in, 4, 4, 2}, "b", vs, a);
    Block res(BlockSpec{BlockKind::resnet, in, 4, 4, 2}, "b", rs, b);
    for (std::size_t i = 0; i < vs.size(); ++i) REQUIRE(vs.at(i).value == rs.at(i).value);
    const Tensor x = random_tensor({2, in, 4, 4, 4}, rng);
    Var pv, pr;
    Tape t1, t2;
    run_block(vgg, vs, x, &pv, nullptr, &t1);
    run_block(res, rs, x, &pr, nullptr, &t2);
    Tensor shortcut = x;
    if (res.indices().shortcut) {
      Tape t;
      shortcut = ops::conv3d(t.constant(x), t.constant(rs.at(*res.indices().shortcut).value), 1, 0)
                     .value();
    }
    for (std::size_t i = 0; i < shortcut.size(); ++i)
      CHECK(pr.value()[i] - pv.value()[i] == doctest::Approx(shortcut[i]).epsilon(1e-12));
  }
}

TEST_CASE("block spec validation") {
  CHECK_THROWS_AS(BlockSpec({BlockKind::vgg, 4, 6, 4, 4}).validate(), ConfigError);
  CHECK_THROWS_AS(BlockSpec({BlockKind::seresnet, 4, 4, 8, 2}).validate(), ConfigError);
  ModelSpec s = small_spec(BlockKind::vgg);
  s.input_dims = {8, 8, 6};
  CHECK_THROWS_AS(build_grading_model(s, 1), ConfigError);
  CHECK(parse_block_kind("seresnet") == BlockKind::seresnet);
  CHECK_THROWS_AS(parse_block_kind("densenet"), ConfigError);
}

TEST_CASE("grading model: shape, determinism, batch independence") {
  std::mt19937_64 rng(13);
  for (BlockKind kind : {BlockKind::vgg, BlockKind::resnet, BlockKind::seresnet}) {
    CAPTURE(to_string(kind));
    auto m = build_grading_model(small_spec(kind), 42);
    auto twin = build_grading_model(small_spec(kind), 42);
    for (std::size_t i = 0; i < m->store().size(); ++i)
      CHECK(m->store().at(i).value == twin->store().at(i).value);

    const Tensor batch = random_tensor({3, 1, 8, 8, 8}, rng);
    const Tensor out = logits_of(*m, batch);
    CHECK(out.shape() == Shape{3, 2});
    CHECK(out.all_finite());
    CHECK(logits_of(*m, batch) == out);

    // Each sample alone gives the same logits; a permuted batch permutes outputs.
    for (std::size_t i = 0; i < 3; ++i) {
      const Tensor one = logits_of(*m, sample(batch, i));
      CHECK(one[0] == doctest::Approx(out[i * 2]).epsilon(1e-12));
      CHECK(one[1] == doctest::Approx(out[i * 2 + 1]).epsilon(1e-12));
    }
    const std::size_t per = batch.size() / 3;
    std::vector<Real> perm;
    for (std::size_t i : {2u, 0u, 1u}) perm.insert(perm.end(), batch.raw() + i * per, batch.raw() + (i + 1) * per);
    const Tensor pout = logits_of(*m, Tensor(batch.shape(), perm));
    const std::size_t order[] = {2, 0, 1};
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 2; ++c)
        CHECK(pout[r * 2 + c] == doctest::Approx(out[order[r] * 2 + c]).epsilon(1e-12));

    CHECK_THROWS_AS(logits_of(*m, random_tensor({1, 1, 8, 8, 4}, rng)), ShapeError);
  }
  auto other = build_grading_model(small_spec(BlockKind::vgg), 43);
  auto base = build_grading_model(small_spec(BlockKind::vgg), 42);
  CHECK_FALSE(other->store().at(0).value == base->store().at(0).value);
}

TEST_CASE("grading model: parameter counts") {
  // Default desk spec, by hand:
  //   stem 1*8*27 + 16                                    = 232
  //   stage0 block 8*8*27*2 + 32 = 3488, down 8*8*27+16   = 1744
  //   stage1 block 8*16*27 + 16*16*27 + 64 = 10432, down  = 6944
  //   stage2 block 16*32*27 + 32*32*27 + 128 = 41600, down = 27712
  //   stage3 block 32*64*27 + 64*64*27 + 256 = 166144, down = 110720
  //   head 64*32+32 + 32*16+16 + 16*2+2                   = 2642
  ModelSpec spec;
  CHECK(expected_parameter_count(spec) == 371658);
  CHECK(build_grading_model(spec, 0)->parameter_count() == 371658);

  for (const auto& st : {std::vector<std::size_t>{8, 16, 32, 64}, std::vector<std::size_t>{4, 8}}) {
    std::size_t counts[3];
    int i = 0;
    for (BlockKind kind : {BlockKind::vgg, BlockKind::resnet, BlockKind::seresnet}) {
      ModelSpec s;
      s.kind = kind;
      s.stage_channels = st;
      const auto m = build_grading_model(s, 0);
      CHECK(m->parameter_count() == expected_parameter_count(s));
      counts[i++] = m->parameter_count();
    }
    CHECK(counts[0] <= counts[1]);
    CHECK(counts[1] <= counts[2]);
  }
}

TEST_CASE("grading model: doubled classifier doubles logits") {
  std::mt19937_64 rng(17);
  auto m = build_grading_model(small_spec(BlockKind::resnet), 9);
  const Tensor batch = random_tensor({2, 1, 8, 8, 8}, rng);
  const Tensor before = logits_of(*m, batch);
  for (Parameter* p : m->parameters())
    if (p->name.rfind("classifier.", 0) == 0)
      for (Real& v : p->value.data()) v *= 2;
  const Tensor after = logits_of(*m, batch);
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(after[i] == doctest::Approx(2 * before[i]).epsilon(1e-12));
  for (std::size_t r = 0; r < 2; ++r)
    CHECK((before[r * 2] > before[r * 2 + 1]) == (after[r * 2] > after[r * 2 + 1]));
}

TEST_CASE("SE gate stays inside (0,1)") {
  std::mt19937_64 rng(23);
  ParameterStore store;
  Initializer init(2);
  Block block(BlockSpec{BlockKind::seresnet, 4, 8, 2, 2}, "b", store, init);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({2, 4, 4, 4, 4}, rng, -5, 5);
    Var gate;
    Tape tape;
    run_block(block, store, x, nullptr, &gate, &tape);
    for (Real g : gate.value().data()) {
      CHECK(g > 0);
      CHECK(g < 1);
    }
  }
}

TEST_CASE("every parameter receives gradient") {
  std::mt19937_64 rng(29);
  for (BlockKind kind : {BlockKind::vgg, BlockKind::resnet, BlockKind::seresnet}) {
    CAPTURE(to_string(kind));
    auto m = build_grading_model(small_spec(kind), 5);
    Tape tape;
    const Tensor batch = random_tensor({2, 1, 8, 8, 8}, rng);
    Var logits = m->forward(tape, batch);
    Var loss = ops::cross_entropy(ops::softmax(logits), ops::one_hot(std::vector<int>{0, 1}, 2));
    tape.backward(loss);
    for (const Parameter* p : m->parameters()) {
      CAPTURE(p->name);
      REQUIRE(p->has_grad);
      bool nonzero = false;
      for (Real g : p->grad.data()) nonzero |= std::abs(g) > 0;
      CHECK(nonzero);
    }
  }
}

TEST_CASE("frozen models stay off the gradient path") {
  std::mt19937_64 rng(31);
  auto m = build_grading_model(small_spec(BlockKind::vgg), 5);
  m->set_frozen(true);
  Tape tape;
  Var logits = m->forward(tape, random_tensor({1, 1, 8, 8, 8}, rng));
  CHECK_FALSE(logits.requires_grad());
}

TEST_CASE("expert encoder") {
  std::mt19937_64 rng(37);
  ExpertEncoderSpec spec;
  spec.input_dim = 10;
  spec.hidden_widths = {12, 6};
  auto e = build_expert_encoder(spec, 3);
  CHECK(e->parameter_count() == expected_parameter_count(spec));
  CHECK(expected_parameter_count(spec) == 10 * 12 + 12 + 12 * 6 + 6 + 6 * 16 + 16 + 16 * 2 + 2);
  auto twin = build_expert_encoder(spec, 3);
  for (std::size_t i = 0; i < e->store().size(); ++i)
    CHECK(e->store().at(i).value == twin->store().at(i).value);

  for (std::size_t n : {1u, 5u}) {
    const Tensor x = random_tensor({n, 10}, rng);
    CHECK(logits_of(*e, x).shape() == Shape{n, 2});
  }
  e->store().at(e->classifier_weight_index()).value.fill(0);
  e->store().at(e->classifier_bias_index()).value.fill(0);
  Tape tape;
  const Tensor p = ops::softmax(e->forward(tape, random_tensor({4, 10}, rng))).value();
  for (Real v : p.data()) CHECK(v == 0.5);
  CHECK_THROWS_AS(logits_of(*e, random_tensor({2, 9}, rng)), ShapeError);
  ExpertEncoderSpec bad;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip and corruption") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "enrol_ckpt_test";
  fs::create_directories(dir);
  std::mt19937_64 rng(41);
  auto m = build_grading_model(small_spec(BlockKind::seresnet), 77);
  save_checkpoint(*m, dir / "m.ckpt");
  auto back = load_grading_model(dir / "m.ckpt");
  CHECK(back->spec_json() == m->spec_json());
  for (std::size_t i = 0; i < m->store().size(); ++i)
    CHECK(back->store().at(i).value == m->store().at(i).value);
  const Tensor x = random_tensor({1, 1, 8, 8, 8}, rng);
  CHECK(logits_of(*back, x) == logits_of(*m, x));
  CHECK(dynamic_cast<GradingModel*>(load_model(dir / "m.ckpt").get()) != nullptr);
  CHECK_THROWS_AS(load_expert_encoder(dir / "m.ckpt"), FormatError);

  {
    std::ofstream os(dir / "bad.ckpt", std::ios::binary);
    os << "NOTACKPT and some bytes";
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "bad.ckpt"), doctest::Contains("unrecognized format"),
                       FormatError);
  const auto size = fs::file_size(dir / "m.ckpt");
  fs::copy_file(dir / "m.ckpt", dir / "short.ckpt", fs::copy_options::overwrite_existing);
  fs::resize_file(dir / "short.ckpt", size - 3);
  CHECK_THROWS_AS(read_checkpoint(dir / "short.ckpt"), FormatError);
  fs::remove_all(dir);
}
