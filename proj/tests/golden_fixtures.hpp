// SPDX-License-Identifier: Apache-2.0
//
// Frozen byte fixtures for the two on-disk formats.

#pragma once

#include "mivc/model.hpp"

namespace mivc::golden {

/// Instances [1, 2] and [3, 4], unshaped.
inline constexpr const char* kTwoByTwoBagHex =
    "4d49564301000000020000000100000002000000"
    "0000803f000000400000404000008040";

/// One (2, 2) instance [0.5, -1.25, 3.0, 0.1].
inline constexpr const char* kShapedBagHex =
    "4d49564301000000010000000200000002000000020000000000003f0000a0bf00004040cdcccc3d";

/// attn, identity 1 -> 1, K = 1, w = [0.5], Z = [[2]], head W = [[1], [-1]], b = [0.25, 0].
inline Model tiny_model() {
  Model m;
  m.strategy = Strategy::kAttn;
  m.encoder.kind = EncoderKind::kIdentity;
  m.encoder.in_dim = m.encoder.out_dim = 1;
  m.encoder.frozen = true;
  m.pooling = PoolingParams::zeros(PoolingKind::kAttn, 1, 1);
  m.pooling.w = Vector{0.5};
  m.pooling.Z = Matrix{{2}};
  m.head.W = Matrix{{1}, {-1}};
  m.head.b = Vector{0.25, 0};
  return m;
}

inline constexpr const char* kTinyModelHex =
    "4d49564d01000000090000000d0000006d6574612e7374726174656779010000"
    "000100000000000000000014400c0000006d6574612e656e636f646572010000"
    "00040000000000000000000000000000000000f03f000000000000f03f000000"
    "000000f03f0c0000006d6574612e706f6f6c696e670100000004000000000000"
    "0000000040000000000000f03f000000000000f03f00000000000000000b0000"
    "006d6574612e636f6e6361740100000003000000000000000000184000000000"
    "000000000000000000000000090000006d6574612e6865616401000000030000"
    "000000000000000040000000000000f03f000000000000000009000000706f6f"
    "6c696e672e770100000001000000000000000000e03f09000000706f6f6c696e"
    "672e5a020000000100000001000000000000000000004006000000686561642e"
    "57020000000200000001000000000000000000f03f000000000000f0bf060000"
    "00686561642e620100000002000000000000000000d03f0000000000000000";

}  // namespace mivc::golden
