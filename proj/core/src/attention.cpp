// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/attention.hpp"

#include <cmath>

#include "viewflow/patchify.hpp"

namespace viewflow {

const AttentionVariant kAllAttentionVariants[kAttentionVariantCount] = {
    AttentionVariant::kNoRopePlucker,      AttentionVariant::kRope3DPlucker,
    AttentionVariant::kRope2DAdditive,     AttentionVariant::kRope2DValues,
    AttentionVariant::kRope2DSeparateQKCat};

const char* to_string(AttentionVariant v) {
    switch (v) {
        case AttentionVariant::kNoRopePlucker: return "no_rope_plucker";
        case AttentionVariant::kRope3DPlucker: return "rope3d_plucker";
        case AttentionVariant::kRope2DAdditive: return "rope2d_additive";
        case AttentionVariant::kRope2DValues: return "rope2d_values";
        case AttentionVariant::kRope2DSeparateQKCat: return "rope2d_separate_qk_cat";
    }
    return "unknown";
}

AttentionVariant attention_variant_from_string(const std::string& name) {
    for (AttentionVariant v : kAllAttentionVariants)
        if (name == to_string(v)) return v;
    throw InvalidParams("unknown attention variant: " + name);
}

void AttentionDims::validate(AttentionVariant variant) const {
    if (d <= 0 || heads <= 0 || d % heads != 0 || (d / heads) % 2 != 0)
        throw InvalidDimension("AttentionDims: d must split into heads with even head width");
    if (d_c <= 0 || d_c % heads != 0 || (d_c / heads) % 2 != 0)
        throw InvalidDimension("AttentionDims: d_c must split into heads with even head width");
    if (variant != AttentionVariant::kRope2DSeparateQKCat && d_c != d)
        throw ShapeError("AttentionDims: additive fusion variants require d_c == d");
}

double AttentionDims::effective_scale(AttentionVariant variant) const {
    if (softmax_scale > 0.0) return softmax_scale;
    if (variant == AttentionVariant::kRope2DSeparateQKCat)
        return 1.0 / std::sqrt(static_cast<double>(head_dim() + cam_head_dim()));
    return 1.0 / std::sqrt(static_cast<double>(head_dim()));
}

// ---------------------------------------------------------------------------
// camera encoder

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

} // namespace

Eigen::MatrixXd camera_encoder_forward(const Eigen::MatrixXd& plucker_patches,
                                       const CameraEncoderView& enc, CameraEncoderCache* cache) {
    if (enc.w1.cols() != plucker_patches.rows())
        throw ShapeError("camera_encoder_forward: plucker patch width mismatch");
    Eigen::MatrixXd pre = enc.w1 * plucker_patches;
    pre.colwise() += Eigen::VectorXd(enc.b1.col(0));
    Eigen::MatrixXd act = pre.unaryExpr([](double x) { return silu(x); });
    Eigen::MatrixXd tokens = enc.w2 * act;
    tokens.colwise() += Eigen::VectorXd(enc.b2.col(0));
    if (cache) {
        cache->pre = std::move(pre);
        cache->act = std::move(act);
    }
    return tokens;
}

void camera_encoder_backward(const Eigen::MatrixXd& d_tokens,
                             const Eigen::MatrixXd& plucker_patches, const CameraEncoderView& enc,
                             const CameraEncoderCache& cache, CameraEncoderGrads& grads) {
    grads.w2 += d_tokens * cache.act.transpose();
    grads.b2.col(0) += d_tokens.rowwise().sum();
    Eigen::MatrixXd d_act = enc.w2.transpose() * d_tokens;
    Eigen::MatrixXd d_pre =
        d_act.cwiseProduct(cache.pre.unaryExpr([](double x) { return silu_grad(x); }));
    grads.w1 += d_pre * plucker_patches.transpose();
    grads.b1.col(0) += d_pre.rowwise().sum();
}

CameraTokens encode_camera_tokens(const std::vector<PluckerMap>& maps, int p_t, int p_s,
                                  const CameraEncoderView& enc, int layer_index) {
    if (maps.empty()) throw EmptyInput("encode_camera_tokens: no plucker maps");
    if (p_t <= 0 || static_cast<int>(maps.size()) % p_t != 0)
        throw ShapeError("encode_camera_tokens: frame count not divisible by p_t");

    std::vector<std::vector<Eigen::MatrixXd>> planes;
    planes.reserve(maps.size());
    for (const auto& m : maps) planes.push_back(plucker_planes(m));

    CameraTokens out;
    out.layer_index = layer_index;
    out.grid_t = static_cast<int>(maps.size()) / p_t;
    out.grid_h = maps[0].height / p_s;
    out.grid_w = maps[0].width / p_s;

    const int tokens_per_group = out.grid_h * out.grid_w;
    Eigen::MatrixXd flat(6 * p_t * p_s * p_s, out.grid_t * tokens_per_group);
    for (int g = 0; g < out.grid_t; ++g) {
        std::vector<const std::vector<Eigen::MatrixXd>*> group;
        for (int dt = 0; dt < p_t; ++dt)
            group.push_back(&planes[static_cast<std::size_t>(g * p_t + dt)]);
        flat.middleCols(g * tokens_per_group, tokens_per_group) = flatten_patch_group(group, p_s);
    }
    out.tokens = camera_encoder_forward(flat, enc, nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// rotations

RopeSinCos make_rope_sincos(const std::vector<TokenPos>& positions,
                            const AxisFrequencyTable& video_table,
                            const AxisFrequencyTable& camera_table) {
    const Eigen::Index n = static_cast<Eigen::Index>(positions.size());
    const Eigen::Index j_video = video_table.pairs();
    const Eigen::Index j_cam = camera_table.pairs();
    RopeSinCos rc;
    rc.cos_xyt.resize(j_video, n);
    rc.sin_xyt.resize(j_video, n);
    rc.cos_xy0.resize(j_video, n);
    rc.sin_xy0.resize(j_video, n);
    rc.cam_cos.resize(j_cam, n);
    rc.cam_sin.resize(j_cam, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const TokenPos pos = positions[static_cast<std::size_t>(i)];
        const Eigen::VectorXd full = make_phases(pos, video_table).phases;
        const Eigen::VectorXd flat = make_phases({pos.x, pos.y, 0}, video_table).phases;
        const Eigen::VectorXd cam = make_phases({pos.x, pos.y, 0}, camera_table).phases;
        rc.cos_xyt.col(i) = full.array().cos();
        rc.sin_xyt.col(i) = full.array().sin();
        rc.cos_xy0.col(i) = flat.array().cos();
        rc.sin_xy0.col(i) = flat.array().sin();
        rc.cam_cos.col(i) = cam.array().cos();
        rc.cam_sin.col(i) = cam.array().sin();
    }
    return rc;
}

void rotate_heads_inplace(Eigen::MatrixXd& m, const Eigen::MatrixXd& cos_t,
                          const Eigen::MatrixXd& sin_t, int heads, bool inverse) {
    const Eigen::Index pairs = cos_t.rows();
    if (m.rows() != heads * 2 * pairs)
        throw InvalidDimension("rotate_heads_inplace: row count must equal heads * 2J");
    if (m.cols() != cos_t.cols())
        throw ShapeError("rotate_heads_inplace: column count mismatch with phase table");
    const double sign = inverse ? -1.0 : 1.0;
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
        for (int h = 0; h < heads; ++h) {
            const Eigen::Index base = static_cast<Eigen::Index>(h) * 2 * pairs;
            for (Eigen::Index j = 0; j < pairs; ++j) {
                const double c = cos_t(j, col);
                const double s = sign * sin_t(j, col);
                const double a = m(base + 2 * j, col);
                const double b = m(base + 2 * j + 1, col);
                m(base + 2 * j, col) = c * a - s * b;
                m(base + 2 * j + 1, col) = s * a + c * b;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// fused q/k per variant

namespace {

struct FusedQK {
    Eigen::MatrixXd q_rot, k_rot;          // d x N
    Eigen::MatrixXd qc, kc;                // d_c x N (cat)
    Eigen::MatrixXd cam_q_pre, cam_k_pre;  // d_c x N pre-rotation (cat)
};

void require_cat_projections(const AttentionCoreParams& proj) {
    if (!proj.cam_wq || !proj.cam_wk)
        throw InvalidParams("kRope2DSeparateQKCat requires camera QK projections");
}

void require_video_projections(const AttentionCoreParams& proj) {
    if (!proj.video_wq || !proj.video_wk)
        throw InvalidParams("kNoRopePlucker requires the video QK projections");
}

FusedQK fuse_qk(AttentionVariant variant, const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                const Eigen::MatrixXd& camera, const AttentionCoreParams& proj,
                const AttentionDims& dims, const RopeSinCos& rope) {
    dims.validate(variant);
    if (q.rows() != dims.d || k.rows() != dims.d)
        throw ShapeError("attention: q/k row count must equal d");
    if (camera.rows() != dims.d_c || camera.cols() != q.cols())
        throw ShapeError("attention: camera token grid shape mismatch");

    FusedQK f;
    switch (variant) {
        case AttentionVariant::kNoRopePlucker: {
            require_video_projections(proj);
            f.q_rot = q;
            f.k_rot = k;
            rotate_heads_inplace(f.q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            rotate_heads_inplace(f.k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            f.q_rot += (*proj.video_wq) * camera;
            f.k_rot += (*proj.video_wk) * camera;
            break;
        }
        case AttentionVariant::kRope3DPlucker: {
            f.q_rot = q + camera;
            f.k_rot = k + camera;
            rotate_heads_inplace(f.q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            rotate_heads_inplace(f.k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            break;
        }
        case AttentionVariant::kRope2DAdditive:
        case AttentionVariant::kRope2DValues: {
            f.q_rot = q;
            f.k_rot = k;
            rotate_heads_inplace(f.q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            rotate_heads_inplace(f.k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            Eigen::MatrixXd cam_rot = camera;
            rotate_heads_inplace(cam_rot, rope.cos_xy0, rope.sin_xy0, dims.heads);
            f.q_rot += cam_rot;
            f.k_rot += cam_rot;
            break;
        }
        case AttentionVariant::kRope2DSeparateQKCat: {
            require_cat_projections(proj);
            f.q_rot = q;
            f.k_rot = k;
            rotate_heads_inplace(f.q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            rotate_heads_inplace(f.k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads);
            f.cam_q_pre = (*proj.cam_wq) * camera;
            f.cam_k_pre = (*proj.cam_wk) * camera;
            f.qc = f.cam_q_pre;
            f.kc = f.cam_k_pre;
            rotate_heads_inplace(f.qc, rope.cam_cos, rope.cam_sin, dims.heads);
            rotate_heads_inplace(f.kc, rope.cam_cos, rope.cam_sin, dims.heads);
            break;
        }
    }
    return f;
}

} // namespace

AttentionScores attention_scores(AttentionVariant variant, const Eigen::MatrixXd& q,
                                 const Eigen::MatrixXd& k, const Eigen::MatrixXd& camera,
                                 const AttentionCoreParams& proj, const AttentionDims& dims,
                                 const RopeSinCos& rope) {
    const FusedQK f = fuse_qk(variant, q, k, camera, proj, dims, rope);
    const double scale = dims.effective_scale(variant);
    const int hd = dims.head_dim();
    const int chd = dims.cam_head_dim();

    AttentionScores scores;
    scores.head.reserve(static_cast<std::size_t>(dims.heads));
    for (int h = 0; h < dims.heads; ++h) {
        Eigen::MatrixXd s = f.q_rot.middleRows(h * hd, hd).transpose() *
                            f.k_rot.middleRows(h * hd, hd);
        if (variant == AttentionVariant::kRope2DSeparateQKCat)
            s += f.qc.middleRows(h * chd, chd).transpose() * f.kc.middleRows(h * chd, chd);
        scores.head.push_back(scale * s);
    }
    return scores;
}

AttentionScores camera_score_term(AttentionVariant variant, const Eigen::MatrixXd& camera,
                                  const AttentionCoreParams& proj, const AttentionDims& dims,
                                  const RopeSinCos& rope) {
    dims.validate(variant);
    const double scale = dims.effective_scale(variant);
    Eigen::MatrixXd cq, ck;
    int width = 0;
    switch (variant) {
        case AttentionVariant::kNoRopePlucker:
            require_video_projections(proj);
            cq = (*proj.video_wq) * camera;
            ck = (*proj.video_wk) * camera;
            width = dims.head_dim();
            break;
        case AttentionVariant::kRope3DPlucker:
            cq = camera;
            ck = camera;
            rotate_heads_inplace(cq, rope.cos_xyt, rope.sin_xyt, dims.heads);
            rotate_heads_inplace(ck, rope.cos_xyt, rope.sin_xyt, dims.heads);
            width = dims.head_dim();
            break;
        case AttentionVariant::kRope2DAdditive:
        case AttentionVariant::kRope2DValues:
            cq = camera;
            rotate_heads_inplace(cq, rope.cos_xy0, rope.sin_xy0, dims.heads);
            ck = cq;
            width = dims.head_dim();
            break;
        case AttentionVariant::kRope2DSeparateQKCat:
            require_cat_projections(proj);
            cq = (*proj.cam_wq) * camera;
            ck = (*proj.cam_wk) * camera;
            rotate_heads_inplace(cq, rope.cam_cos, rope.cam_sin, dims.heads);
            rotate_heads_inplace(ck, rope.cam_cos, rope.cam_sin, dims.heads);
            width = dims.cam_head_dim();
            break;
    }
    AttentionScores term;
    term.head.reserve(static_cast<std::size_t>(dims.heads));
    for (int h = 0; h < dims.heads; ++h)
        term.head.push_back(scale * cq.middleRows(h * width, width).transpose() *
                            ck.middleRows(h * width, width));
    return term;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> camera_qk(const Eigen::MatrixXd& camera,
                                                      const Eigen::MatrixXd& wq,
                                                      const Eigen::MatrixXd& wk,
                                                      const std::vector<TokenPos>& positions,
                                                      const AxisFrequencyTable& camera_table) {
    if (wq.cols() != camera.rows() || wk.cols() != camera.rows())
        throw ShapeError("camera_qk: projection width must match camera token width");
    if (static_cast<Eigen::Index>(positions.size()) != camera.cols())
        throw ShapeError("camera_qk: one position per camera token required");
    Eigen::MatrixXd q = wq * camera;
    Eigen::MatrixXd k = wk * camera;
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
        const TokenPos p = positions[static_cast<std::size_t>(i)];
        const RopePhases ph = make_phases({p.x, p.y, 0}, camera_table);
        Eigen::VectorXd col = q.col(i);
        rotate_inplace(col, ph.phases);
        q.col(i) = col;
        col = k.col(i);
        rotate_inplace(col, ph.phases);
        k.col(i) = col;
    }
    return {std::move(q), std::move(k)};
}

// ---------------------------------------------------------------------------
// forward / backward

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
    const Eigen::VectorXd row_max = s.rowwise().maxCoeff();
    Eigen::MatrixXd p = (s.colwise() - row_max).array().exp();
    const Eigen::VectorXd sums = p.rowwise().sum();
    p.array().colwise() /= sums.array();
    return p;
}

} // namespace

Eigen::MatrixXd attention_core_forward(AttentionVariant variant, const Eigen::MatrixXd& q,
                                       const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                                       const Eigen::MatrixXd& camera,
                                       const AttentionCoreParams& proj, const AttentionDims& dims,
                                       const RopeSinCos& rope, AttentionCoreCache* cache) {
    if (!q.allFinite() || !k.allFinite() || !v.allFinite() || !camera.allFinite())
        throw NumericalError("attention_core_forward: non-finite input");
    if (v.rows() != dims.d || v.cols() != q.cols())
        throw ShapeError("attention_core_forward: value grid shape mismatch");

    FusedQK f = fuse_qk(variant, q, k, camera, proj, dims, rope);
    const double scale = dims.effective_scale(variant);
    const int hd = dims.head_dim();
    const int chd = dims.cam_head_dim();

    Eigen::MatrixXd v_eff = v;
    if (variant == AttentionVariant::kRope2DValues) v_eff += camera;

    Eigen::MatrixXd out(dims.d, q.cols());
    std::vector<Eigen::MatrixXd> probs;
    probs.reserve(static_cast<std::size_t>(dims.heads));
    for (int h = 0; h < dims.heads; ++h) {
        Eigen::MatrixXd s = f.q_rot.middleRows(h * hd, hd).transpose() *
                            f.k_rot.middleRows(h * hd, hd);
        if (variant == AttentionVariant::kRope2DSeparateQKCat)
            s += f.qc.middleRows(h * chd, chd).transpose() * f.kc.middleRows(h * chd, chd);
        s *= scale;
        Eigen::MatrixXd p = softmax_rows(s);
        out.middleRows(h * hd, hd) = v_eff.middleRows(h * hd, hd) * p.transpose();
        probs.push_back(std::move(p));
    }

    if (cache) {
        cache->q_rot = std::move(f.q_rot);
        cache->k_rot = std::move(f.k_rot);
        cache->qc = std::move(f.qc);
        cache->kc = std::move(f.kc);
        cache->cam_q_pre = std::move(f.cam_q_pre);
        cache->cam_k_pre = std::move(f.cam_k_pre);
        cache->v_eff = std::move(v_eff);
        cache->probs = std::move(probs);
        cache->scale = scale;
    }
    return out;
}

AttentionCoreGrads attention_core_backward(AttentionVariant variant, const Eigen::MatrixXd& d_out,
                                           const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                           const Eigen::MatrixXd& v, const Eigen::MatrixXd& camera,
                                           const AttentionCoreParams& proj,
                                           const AttentionDims& dims, const RopeSinCos& rope,
                                           const AttentionCoreCache& cache) {
    (void)q;
    (void)k;
    const int hd = dims.head_dim();
    const int chd = dims.cam_head_dim();
    const double scale = cache.scale;
    const Eigen::Index n = v.cols();

    AttentionCoreGrads g;
    g.dq.setZero(dims.d, n);
    g.dk.setZero(dims.d, n);
    g.dv.setZero(dims.d, n);
    g.dcamera.setZero(dims.d_c, n);

    // gradients at the rotated/fused nodes
    Eigen::MatrixXd d_q_rot = Eigen::MatrixXd::Zero(dims.d, n);
    Eigen::MatrixXd d_k_rot = Eigen::MatrixXd::Zero(dims.d, n);
    Eigen::MatrixXd d_qc, d_kc;
    if (variant == AttentionVariant::kRope2DSeparateQKCat) {
        d_qc.setZero(dims.d_c, n);
        d_kc.setZero(dims.d_c, n);
    }
    Eigen::MatrixXd d_v_eff = Eigen::MatrixXd::Zero(dims.d, n);

    for (int h = 0; h < dims.heads; ++h) {
        const auto& p = cache.probs[static_cast<std::size_t>(h)];
        const auto d_out_h = d_out.middleRows(h * hd, hd);
        const auto v_h = cache.v_eff.middleRows(h * hd, hd);

        d_v_eff.middleRows(h * hd, hd) += d_out_h * p;
        Eigen::MatrixXd d_p = d_out_h.transpose() * v_h; // Nq x Nk

        // softmax backward per row
        Eigen::MatrixXd d_s(p.rows(), p.cols());
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double dot = d_p.row(i).dot(p.row(i));
            d_s.row(i) = (d_p.row(i).array() - dot) * p.row(i).array();
        }
        d_s *= scale;

        d_q_rot.middleRows(h * hd, hd) += cache.k_rot.middleRows(h * hd, hd) * d_s.transpose();
        d_k_rot.middleRows(h * hd, hd) += cache.q_rot.middleRows(h * hd, hd) * d_s;
        if (variant == AttentionVariant::kRope2DSeparateQKCat) {
            d_qc.middleRows(h * chd, chd) += cache.kc.middleRows(h * chd, chd) * d_s.transpose();
            d_kc.middleRows(h * chd, chd) += cache.qc.middleRows(h * chd, chd) * d_s;
        }
    }

    // values path
    g.dv = d_v_eff;
    if (variant == AttentionVariant::kRope2DValues) g.dcamera += d_v_eff;

    // unwind the fusion
    switch (variant) {
        case AttentionVariant::kNoRopePlucker: {
            // q_rot = R(q) + Wq_v * camera
            g.dvideo_wq = d_q_rot * camera.transpose();
            g.dvideo_wk = d_k_rot * camera.transpose();
            g.dcamera += proj.video_wq->transpose() * d_q_rot;
            g.dcamera += proj.video_wk->transpose() * d_k_rot;
            rotate_heads_inplace(d_q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            rotate_heads_inplace(d_k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            g.dq = d_q_rot;
            g.dk = d_k_rot;
            break;
        }
        case AttentionVariant::kRope3DPlucker: {
            rotate_heads_inplace(d_q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            rotate_heads_inplace(d_k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            g.dq = d_q_rot;
            g.dk = d_k_rot;
            g.dcamera += d_q_rot + d_k_rot;
            break;
        }
        case AttentionVariant::kRope2DAdditive:
        case AttentionVariant::kRope2DValues: {
            Eigen::MatrixXd d_cam_rot = d_q_rot + d_k_rot;
            rotate_heads_inplace(d_cam_rot, rope.cos_xy0, rope.sin_xy0, dims.heads, true);
            g.dcamera += d_cam_rot;
            rotate_heads_inplace(d_q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            rotate_heads_inplace(d_k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            g.dq = d_q_rot;
            g.dk = d_k_rot;
            break;
        }
        case AttentionVariant::kRope2DSeparateQKCat: {
            rotate_heads_inplace(d_q_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            rotate_heads_inplace(d_k_rot, rope.cos_xyt, rope.sin_xyt, dims.heads, true);
            g.dq = d_q_rot;
            g.dk = d_k_rot;
            rotate_heads_inplace(d_qc, rope.cam_cos, rope.cam_sin, dims.heads, true);
            rotate_heads_inplace(d_kc, rope.cam_cos, rope.cam_sin, dims.heads, true);
            g.dcam_wq = d_qc * camera.transpose();
            g.dcam_wk = d_kc * camera.transpose();
            g.dcamera += proj.cam_wq->transpose() * d_qc;
            g.dcamera += proj.cam_wk->transpose() * d_kc;
            break;
        }
    }
    return g;
}

} // namespace viewflow
