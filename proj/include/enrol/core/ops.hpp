// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Every function records one node on the tape of
// its first argument and returns a handle to the result.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "enrol/core/tape.hpp"

namespace enrol::ops {

/// Log-domain clamp for cross-entropy and KL.
inline constexpr Real kProbFloor = 1e-12;

/// 3D cross-correlation. input [N,Cin,D,H,W], kernel [Cout,Cin,k,k,k].
/// Output spatial size is floor((D + 2*padding - k)/stride) + 1 per axis.
Var conv3d(Var input, Var kernel, std::size_t stride, std::size_t padding);

/// Group normalization over [N,C,...]: statistics per sample and per group
/// of C/num_groups consecutive channels, then per-channel gain and bias.
Var group_norm(Var x, std::size_t num_groups, Real eps, Var gain, Var bias);

/// max(0, x); the subgradient at 0 is 0.
Var relu(Var x);

/// Logistic function 1/(1+exp(-x)).
Var sigmoid(Var x);

/// x[N,Fin] * weights[Fin,Fout] + bias[Fout].
Var dense(Var x, Var weights, Var bias);

/// Mean over all trailing spatial axes: [N,C,...] -> [N,C].
Var global_avg_pool(Var x);

/// Multiplies every spatial element of x[N,C,...] by scale[N,C].
Var channel_scale(Var x, Var scale);

/// Row-wise max-shifted softmax over [N,K], K >= 2.
Var softmax(Var logits);

/// Mean over rows of -ln(max(p_true, 1e-12)). `labels` must be one-hot.
Var cross_entropy(Var probs, const Tensor& labels);

/// Per-row KL(p || q) = sum_k p_k ln(p_k / max(q_k, 1e-12)) with 0 ln 0 = 0.
/// Rows of both inputs must be distributions to within 1e-6.
Var kl_divergence(Var p, Var q);

Var add(Var a, Var b);
Var mul(Var a, Var b);
/// Elementwise product with a constant tensor of the same shape.
Var mul_const(Var a, const Tensor& weights);
Var scale(Var a, Real factor);
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);

/// Non-differentiable per-row cross-entropy on plain values, same clamp as
/// cross_entropy().
std::vector<Real> per_sample_cross_entropy(const Tensor& probs, const Tensor& labels);

/// One-hot [N,K] from class indices; throws InputError for out-of-range labels.
Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

/// Output spatial extent of a convolution along one axis.
std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                               std::size_t padding);

}  // namespace enrol::ops
