// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "viewflow/camera.hpp"
#include "viewflow/errors.hpp"
#include "viewflow/rope.hpp"

namespace viewflow {

// Camera-fusion strategies for the self-attention score.
//
// kNoRopePlucker       camera content passes through the video QK projections
//                      and is added to the rotated queries/keys without any
//                      rotation of its own
// kRope3DPlucker       camera tokens added to projected queries/keys, the sum
//                      rotated with full (x, y, t) phases; entangles camera
//                      identity with the frame's temporal index
// kRope2DAdditive      camera tokens rotated with (x, y, 0) phases and added
//                      to the rotated queries/keys; score keeps video-camera
//                      cross terms
// kRope2DValues        additive fusion plus camera tokens added to the values
// kRope2DSeparateQKCat separate camera QK projections, camera rotated with
//                      (x, y, 0) phases; score is the sum of the video and
//                      camera inner products (channel-concatenated heads)
enum class AttentionVariant {
    kNoRopePlucker,
    kRope3DPlucker,
    kRope2DAdditive,
    kRope2DValues,
    kRope2DSeparateQKCat,
};

inline constexpr int kAttentionVariantCount = 5;
extern const AttentionVariant kAllAttentionVariants[kAttentionVariantCount];

const char* to_string(AttentionVariant v);
AttentionVariant attention_variant_from_string(const std::string& name);

struct AttentionDims {
    int d = 0;     // video token width across heads
    int d_c = 0;   // camera token width across heads
    int heads = 1;
    // 0 means the variant default: 1/sqrt(head_dim) for fused q/k variants,
    // 1/sqrt(head_dim + cam_head_dim) for the concatenated variant (the
    // effective key width grows)
    double softmax_scale = 0.0;

    int head_dim() const { return d / heads; }
    int cam_head_dim() const { return d_c / heads; }
    void validate(AttentionVariant variant) const;
    double effective_scale(AttentionVariant variant) const;
};

// ---------------------------------------------------------------------------
// Camera token encoder: flattened Plucker patch volumes -> d_c tokens through
// a two-layer MLP (hidden width twice the input, SiLU). Each transformer
// layer owns one encoder.

struct CameraEncoderView {
    Eigen::Ref<const Eigen::MatrixXd> w1; // hidden x plucker_dim
    Eigen::Ref<const Eigen::MatrixXd> b1; // hidden x 1
    Eigen::Ref<const Eigen::MatrixXd> w2; // d_c x hidden
    Eigen::Ref<const Eigen::MatrixXd> b2; // d_c x 1
};

struct CameraEncoderGrads {
    Eigen::Ref<Eigen::MatrixXd> w1, b1, w2, b2;
};

struct CameraEncoderCache {
    Eigen::MatrixXd pre; // hidden x N, pre-activation
    Eigen::MatrixXd act; // hidden x N
};

Eigen::MatrixXd camera_encoder_forward(const Eigen::MatrixXd& plucker_patches,
                                       const CameraEncoderView& enc, CameraEncoderCache* cache);
void camera_encoder_backward(const Eigen::MatrixXd& d_tokens,
                             const Eigen::MatrixXd& plucker_patches, const CameraEncoderView& enc,
                             const CameraEncoderCache& cache, CameraEncoderGrads& grads);

// Spec-level surface: Plucker maps for consecutive frames -> camera token
// grid with the same patch compression as the video tokenizer.
struct CameraTokens {
    Eigen::MatrixXd tokens; // d_c x N, token order: frame group, then y, then x
    int layer_index = 0;
    int grid_t = 0, grid_h = 0, grid_w = 0;
};

CameraTokens encode_camera_tokens(const std::vector<PluckerMap>& maps, int p_t, int p_s,
                                  const CameraEncoderView& enc, int layer_index = 0);

// ---------------------------------------------------------------------------
// Rotation tables precomputed per sequence; shared by every layer and head.

struct RopeSinCos {
    Eigen::MatrixXd cos_xyt, sin_xyt; // J x N, video table, full position
    Eigen::MatrixXd cos_xy0, sin_xy0; // J x N, video table, t = 0
    Eigen::MatrixXd cam_cos, cam_sin; // Jc x N, camera table, t = 0
};

RopeSinCos make_rope_sincos(const std::vector<TokenPos>& positions,
                            const AxisFrequencyTable& video_table,
                            const AxisFrequencyTable& camera_table);

// Rotates every head block of m (rows = heads * 2J) by per-column phases.
void rotate_heads_inplace(Eigen::MatrixXd& m, const Eigen::MatrixXd& cos_t,
                          const Eigen::MatrixXd& sin_t, int heads, bool inverse = false);

// ---------------------------------------------------------------------------
// Attention core on projected q/k/v grids (d x N, one column per token).

struct AttentionCoreParams {
    const Eigen::MatrixXd* cam_wq = nullptr;   // d_c x d_c, kRope2DSeparateQKCat
    const Eigen::MatrixXd* cam_wk = nullptr;
    const Eigen::MatrixXd* video_wq = nullptr; // d x d, kNoRopePlucker
    const Eigen::MatrixXd* video_wk = nullptr;
};

struct AttentionCoreCache {
    Eigen::MatrixXd q_rot, k_rot, v_eff; // d x N
    Eigen::MatrixXd qc, kc;              // d_c x N, rotated camera q/k (cat variant)
    Eigen::MatrixXd cam_q_pre, cam_k_pre; // d_c x N pre-rotation (cat variant)
    std::vector<Eigen::MatrixXd> probs; // per head, Nq x Nk
    double scale = 0.0;
};

struct AttentionCoreGrads {
    Eigen::MatrixXd dq, dk, dv; // d x N
    Eigen::MatrixXd dcamera;    // d_c x N
    Eigen::MatrixXd dcam_wq, dcam_wk;     // set for kRope2DSeparateQKCat
    Eigen::MatrixXd dvideo_wq, dvideo_wk; // set for kNoRopePlucker
};

// per-head score matrices prior to softmax (softmax scale included)
struct AttentionScores {
    std::vector<Eigen::MatrixXd> head; // heads x (Nq x Nk)
};

AttentionScores attention_scores(AttentionVariant variant, const Eigen::MatrixXd& q,
                                 const Eigen::MatrixXd& k, const Eigen::MatrixXd& camera,
                                 const AttentionCoreParams& proj, const AttentionDims& dims,
                                 const RopeSinCos& rope);

// camera-camera contribution to the score, same scale as attention_scores
AttentionScores camera_score_term(AttentionVariant variant, const Eigen::MatrixXd& camera,
                                  const AttentionCoreParams& proj, const AttentionDims& dims,
                                  const RopeSinCos& rope);

// camera QK projection + 2-D rotation (step (iii) surface)
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> camera_qk(const Eigen::MatrixXd& camera,
                                                      const Eigen::MatrixXd& wq,
                                                      const Eigen::MatrixXd& wk,
                                                      const std::vector<TokenPos>& positions,
                                                      const AxisFrequencyTable& camera_table);

// softmax over keys per query, then value aggregation; returns d x N
Eigen::MatrixXd attention_core_forward(AttentionVariant variant, const Eigen::MatrixXd& q,
                                       const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                                       const Eigen::MatrixXd& camera,
                                       const AttentionCoreParams& proj, const AttentionDims& dims,
                                       const RopeSinCos& rope, AttentionCoreCache* cache);

AttentionCoreGrads attention_core_backward(AttentionVariant variant, const Eigen::MatrixXd& d_out,
                                           const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                           const Eigen::MatrixXd& v, const Eigen::MatrixXd& camera,
                                           const AttentionCoreParams& proj,
                                           const AttentionDims& dims, const RopeSinCos& rope,
                                           const AttentionCoreCache& cache);

} // namespace viewflow
