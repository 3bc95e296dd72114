// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "viewflow/attention.hpp"
#include "viewflow/errors.hpp"
#include "viewflow/image.hpp"
#include "viewflow/param_store.hpp"
#include "viewflow/rng.hpp"
#include "viewflow/rope.hpp"

namespace viewflow {

enum class TokenRole : std::uint8_t { kContext, kTarget };

struct GridFrame {
    int view = 0;
    int time_index = 0;
    double timestamp = 0.0;
    TokenRole role = TokenRole::kContext;
};

// Spatio-temporal token grid over context and target frames. Token columns
// are ordered view, then frame group, then y, then x. With temporal patching
// (p_t > 1) each token spans p_t consecutive frames of one view and its
// temporal index is time_index / p_t of the group's first frame.
struct TokenGrid {
    Eigen::MatrixXd tokens; // raw_patch_dim x N
    std::vector<TokenPos> positions;
    std::vector<int> token_group;      // patch-group index per token
    std::vector<GridFrame> frames;     // per input frame
    std::vector<int> group_first_frame;
    int tokens_x = 0, tokens_y = 0;
    int p_t = 1, p_s = 1;
    int channels = 3;
    int width = 0, height = 0;

    int tokens_per_group() const { return tokens_x * tokens_y; }
    std::vector<std::uint8_t> token_is_target() const;
};

struct ViewFrames {
    int view = 0;
    std::vector<Image> images;
    std::vector<GridFrame> meta; // same length as images
};

TokenGrid patchify(const std::vector<ViewFrames>& views, int p_t, int p_s);

// Inverse: token values with the grid's column layout back to one image per
// input frame. unpatchify(grid, grid.tokens) reproduces the inputs bitwise.
std::vector<Image> unpatchify(const TokenGrid& grid, const Eigen::MatrixXd& token_values);

// ---------------------------------------------------------------------------

struct DiTConfig {
    int depth = 2;
    int heads = 2;
    int d = 32;
    int d_c = 32;
    int ffn_mult = 4;
    int p_t = 1;
    int p_s = 4;
    int cond_width = 0; // 0 disables the cross-attention conditioning path
    int channels = 3;
    AttentionVariant variant = AttentionVariant::kRope2DSeparateQKCat;
    FrequencyLayout rope_layout = FrequencyLayout::kDisjointBlocks;
    double rope_base = 10000.0;
    double softmax_scale = 0.0; // 0 = variant default

    int raw_patch_dim() const { return channels * p_t * p_s * p_s; }
    int plucker_patch_dim() const { return 6 * p_t * p_s * p_s; }
    int cam_hidden_dim() const { return 2 * plucker_patch_dim(); }
    void validate() const;
    bool operator==(const DiTConfig&) const = default;
};

// One flattened episode: the joint context+target token sequence.
struct SequenceInput {
    Eigen::MatrixXd video;   // raw_patch_dim x N; target columns hold the current z
    Eigen::MatrixXd plucker; // plucker_patch_dim x N
    std::vector<TokenPos> positions;
    std::vector<std::uint8_t> is_target;
    Eigen::VectorXd cond; // size 0 or cond_width

    int n_tokens() const { return static_cast<int>(video.cols()); }
    std::vector<int> target_cols() const;
};

struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd inv_std;
};

struct BlockCache {
    Eigen::VectorXd mod; // 6d: [shift_a; scale_a; gate_a; shift_f; scale_f; gate_f]
    LnCache ln_attn, ln_cross, ln_ffn;
    Eigen::MatrixXd u_attn;
    Eigen::MatrixXd q, k, v;
    Eigen::MatrixXd cam_tokens;
    CameraEncoderCache cam;
    AttentionCoreCache core;
    Eigen::MatrixXd attn_concat; // core output, pre output-projection
    Eigen::MatrixXd attn_out;
    Eigen::MatrixXd x_attn; // after attention residual
    Eigen::MatrixXd cross_in, cross_vc, cross_out;
    Eigen::MatrixXd x_cross;
    Eigen::MatrixXd u_ffn, ffn_pre, ffn_act, ffn_out;
    Eigen::MatrixXd x_ffn;
};

struct DitForwardCache {
    RopeSinCos rope;
    Eigen::MatrixXd x0;
    Eigen::VectorXd t_raw, t_pre, t_hidden, t_emb, t_act;
    std::vector<BlockCache> blocks;
    Eigen::MatrixXd x_final; // target columns entering the head
    LnCache ln_f;
    Eigen::VectorXd mod_f; // 2d: [shift; scale]
    Eigen::MatrixXd head_in;
    std::vector<int> target_cols;
    double tau = 0.0;
};

// Minimal diffusion transformer over a joint context+target sequence with
// per-layer camera encoders and the configured camera-fusion variant.
// Diffusion time conditions every token (context included) through adaLN
// modulation of block activations.
class DiTModel {
  public:
    explicit DiTModel(DiTConfig cfg);

    const DiTConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    void init_params(Rng& rng);      // training init; stabilizer layers zeroed
    void randomize_params(Rng& rng); // every tensor random (gradient checks)

    const AxisFrequencyTable& video_table() const { return video_table_; }
    const AxisFrequencyTable& camera_table() const { return camera_table_; }

    // velocity prediction on target tokens (raw_patch_dim x n_target),
    // columns in target-column order; throws NumericalError on non-finite
    // activations
    Eigen::MatrixXd forward(const SequenceInput& seq, double tau, DitForwardCache* cache) const;

    // accumulates parameter gradients into grads (length params().size())
    void backward(const SequenceInput& seq, const DitForwardCache& cache,
                  const Eigen::MatrixXd& d_velocity, std::vector<double>& grads) const;

  private:
    struct BlockIds {
        int mod_w, mod_b;
        int wq, wk, wv, wo, bq, bk, bv, bo;
        int cam_w1, cam_b1, cam_w2, cam_b2;
        int cam_wq, cam_wk;
        int cross_wq, cross_bq, cross_wk, cross_wv, cross_wo, cross_bo;
        int ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    };

    DiTConfig cfg_;
    ParamStore store_;
    AxisFrequencyTable video_table_;
    AxisFrequencyTable camera_table_;
    int embed_w_, embed_b_, role_emb_;
    int time_w1_, time_b1_, time_w2_, time_b2_;
    std::vector<BlockIds> blocks_;
    int final_mod_w_, final_mod_b_;
    int head_w_, head_b_;
};

// ---------------------------------------------------------------------------
// rectified flow

// Loss at a fixed noise/time draw: z_tau = (1 - tau) z0 + tau eps on target
// columns, squared error of the predicted velocity against eps - z0, averaged
// over target entries. eps has one column per target token.
double rectified_flow_loss_at(const DiTModel& model, const SequenceInput& seq_clean,
                              const Eigen::MatrixXd& eps, double tau,
                              std::vector<double>* grads);

// samples eps ~ N(0, I) and tau ~ U(0, 1)
double rectified_flow_loss(const DiTModel& model, const SequenceInput& seq_clean, Rng& rng,
                           std::vector<double>* grads);

// Euler integration of dz = -v dtau from tau = 1 to 0 in `steps` uniform
// steps: z <- z - v(z, tau_k)/steps with tau_k = 1 - k/steps. Throws
// NumericalError when any |entry| exceeds 1e6.
using VelocityField = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;
Eigen::MatrixXd integrate_velocity_field(Eigen::MatrixXd z, int steps, const VelocityField& field);

// Draws initial target tokens from N(0, I), denoises with the model, returns
// final target token values (raw_patch_dim x n_target). Context columns of
// seq are never modified. The observer, when set, sees the working sequence
// after every step.
using SampleObserver = std::function<void(int step, const SequenceInput& state)>;
Eigen::MatrixXd sample_targets(const DiTModel& model, const SequenceInput& seq, int steps,
                               Rng& rng, const SampleObserver& observer = {});

} // namespace viewflow
