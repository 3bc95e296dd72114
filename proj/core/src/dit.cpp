// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/dit.hpp"

#include <cmath>
#include <numbers>

#include "viewflow/patchify.hpp"

namespace viewflow {

// ---------------------------------------------------------------------------
// token grid

std::vector<std::uint8_t> TokenGrid::token_is_target() const {
    std::vector<std::uint8_t> out(positions.size(), 0);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const int group = token_group[i];
        const int frame = group_first_frame[static_cast<std::size_t>(group)];
        out[i] = frames[static_cast<std::size_t>(frame)].role == TokenRole::kTarget ? 1 : 0;
    }
    return out;
}

TokenGrid patchify(const std::vector<ViewFrames>& views, int p_t, int p_s) {
    if (p_t <= 0 || p_s <= 0) throw ShapeError("patchify: patch sizes must be positive");
    int total_frames = 0;
    for (const auto& v : views) total_frames += static_cast<int>(v.images.size());
    if (total_frames == 0) throw EmptyInput("patchify: no frames");

    TokenGrid grid;
    grid.p_t = p_t;
    grid.p_s = p_s;

    // shape checks
    for (const auto& v : views) {
        if (v.images.size() != v.meta.size())
            throw ShapeError("patchify: image/meta count mismatch");
        if (static_cast<int>(v.images.size()) % p_t != 0)
            throw ShapeError("patchify: frame count per view not divisible by p_t");
        for (const auto& img : v.images) {
            if (grid.width == 0) {
                grid.width = img.width;
                grid.height = img.height;
            }
            if (img.width != grid.width || img.height != grid.height)
                throw ShapeError("patchify: frames must share image dimensions");
        }
    }
    if (grid.width % p_s != 0 || grid.height % p_s != 0)
        throw ShapeError("patchify: image size not divisible by p_s");

    grid.tokens_x = grid.width / p_s;
    grid.tokens_y = grid.height / p_s;
    const int per_group = grid.tokens_per_group();

    int n_groups = total_frames / p_t;
    grid.tokens.resize(3 * p_t * p_s * p_s, n_groups * per_group);
    grid.positions.reserve(static_cast<std::size_t>(n_groups * per_group));
    grid.token_group.reserve(static_cast<std::size_t>(n_groups * per_group));

    int group = 0;
    int frame_base = 0;
    for (const auto& v : views) {
        std::vector<std::vector<Eigen::MatrixXd>> planes;
        planes.reserve(v.images.size());
        for (const auto& img : v.images) planes.push_back(image_planes(img));

        const int groups_here = static_cast<int>(v.images.size()) / p_t;
        for (int g = 0; g < groups_here; ++g) {
            const GridFrame& first = v.meta[static_cast<std::size_t>(g * p_t)];
            for (int dt = 1; dt < p_t; ++dt) {
                const GridFrame& f = v.meta[static_cast<std::size_t>(g * p_t + dt)];
                if (f.role != first.role)
                    throw ShapeError("patchify: mixed roles within one patch group");
                if (f.time_index != first.time_index + dt)
                    throw ShapeError("patchify: non-consecutive time indices within a patch group");
            }
            std::vector<const std::vector<Eigen::MatrixXd>*> group_planes;
            for (int dt = 0; dt < p_t; ++dt)
                group_planes.push_back(&planes[static_cast<std::size_t>(g * p_t + dt)]);
            grid.tokens.middleCols(group * per_group, per_group) =
                flatten_patch_group(group_planes, p_s);

            const int t_index = first.time_index / p_t;
            for (int y = 0; y < grid.tokens_y; ++y)
                for (int x = 0; x < grid.tokens_x; ++x) {
                    grid.positions.push_back({x, y, t_index});
                    grid.token_group.push_back(group);
                }
            grid.group_first_frame.push_back(frame_base + g * p_t);
            ++group;
        }
        for (const auto& m : v.meta) grid.frames.push_back(m);
        frame_base += static_cast<int>(v.images.size());
    }
    return grid;
}

std::vector<Image> unpatchify(const TokenGrid& grid, const Eigen::MatrixXd& token_values) {
    if (token_values.rows() != grid.tokens.rows() || token_values.cols() != grid.tokens.cols())
        throw ShapeError("unpatchify: token value shape mismatch");
    std::vector<Image> images(grid.frames.size(), Image(grid.width, grid.height));
    const int per_group = grid.tokens_per_group();
    const int n_groups = static_cast<int>(grid.group_first_frame.size());
    for (int g = 0; g < n_groups; ++g) {
        std::vector<std::vector<Eigen::MatrixXd>> frame_planes(static_cast<std::size_t>(grid.p_t));
        std::vector<std::vector<Eigen::MatrixXd>*> ptrs;
        for (auto& f : frame_planes) ptrs.push_back(&f);
        unflatten_patch_group(token_values.middleCols(g * per_group, per_group), grid.p_s, 3,
                              grid.height, grid.width, ptrs);
        for (int dt = 0; dt < grid.p_t; ++dt) {
            const int frame = grid.group_first_frame[static_cast<std::size_t>(g)] + dt;
            images[static_cast<std::size_t>(frame)] =
                planes_to_image(frame_planes[static_cast<std::size_t>(dt)]);
        }
    }
    return images;
}

// ---------------------------------------------------------------------------
// config

void DiTConfig::validate() const {
    if (depth < 0) throw InvalidParams("DiTConfig: negative depth");
    if (heads <= 0 || d <= 0 || d % heads != 0 || (d / heads) % 2 != 0)
        throw InvalidDimension("DiTConfig: d must split into heads with even per-head width");
    if (d_c <= 0 || d_c % heads != 0 || (d_c / heads) % 2 != 0)
        throw InvalidDimension("DiTConfig: d_c must split into heads with even per-head width");
    if (variant != AttentionVariant::kRope2DSeparateQKCat && d_c != d)
        throw ShapeError("DiTConfig: additive fusion variants require d_c == d");
    if (ffn_mult <= 0) throw InvalidParams("DiTConfig: ffn_mult must be positive");
    if (p_t <= 0 || p_t > 4 || p_s <= 0) throw InvalidParams("DiTConfig: patch sizes out of range");
    if (cond_width < 0) throw InvalidParams("DiTConfig: negative cond_width");
    if (channels <= 0) throw InvalidParams("DiTConfig: channels must be positive");
    if (!(rope_base > 0.0)) throw InvalidParams("DiTConfig: rope base must be positive");
}

std::vector<int> SequenceInput::target_cols() const {
    std::vector<int> cols;
    for (std::size_t i = 0; i < is_target.size(); ++i)
        if (is_target[i]) cols.push_back(static_cast<int>(i));
    return cols;
}

// ---------------------------------------------------------------------------
// small math helpers

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

constexpr double kLnEps = 1e-6;

// per-column layer norm without learned affine (adaLN supplies it)
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, LnCache& cache) {
    const Eigen::Index d = x.rows();
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    cache.inv_std = (var.array() + kLnEps).rsqrt().transpose();
    cache.xhat = centered.array().rowwise() * cache.inv_std.transpose().array();
    (void)d;
    return cache.xhat;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& d_xhat, const LnCache& cache) {
    Eigen::RowVectorXd mean_d = d_xhat.colwise().mean();
    Eigen::RowVectorXd mean_dx = (d_xhat.array() * cache.xhat.array()).colwise().mean();
    Eigen::MatrixXd dx = d_xhat;
    dx.rowwise() -= mean_d;
    dx -= (cache.xhat.array().rowwise() * mean_dx.array()).matrix();
    dx.array().rowwise() *= cache.inv_std.transpose().array();
    return dx;
}

// u = xhat * (1 + scale) + shift, scale/shift broadcast over columns
Eigen::MatrixXd modulate(const Eigen::MatrixXd& xhat, const Eigen::VectorXd& shift,
                         const Eigen::VectorXd& scale) {
    Eigen::MatrixXd u = xhat.array().colwise() * (1.0 + scale.array());
    u.colwise() += shift;
    return u;
}

Eigen::VectorXd sinusoidal_embedding(double tau, int dim) {
    const int half = dim / 2;
    Eigen::VectorXd e(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / static_cast<double>(half));
        const double arg = 1000.0 * tau * freq;
        e[i] = std::cos(arg);
        e[half + i] = std::sin(arg);
    }
    return e;
}

} // namespace

// ---------------------------------------------------------------------------
// model

DiTModel::DiTModel(DiTConfig cfg)
    : cfg_(cfg),
      video_table_(AxisFrequencyTable::make(cfg.d / cfg.heads, cfg.rope_layout, cfg.rope_base)),
      camera_table_(AxisFrequencyTable::make(cfg.d_c / cfg.heads, cfg.rope_layout, cfg.rope_base)) {
    cfg_.validate();
    const int d = cfg_.d;
    const int raw = cfg_.raw_patch_dim();
    const int pdim = cfg_.plucker_patch_dim();
    const int hidden = cfg_.cam_hidden_dim();

    embed_w_ = store_.add("embed.w", d, raw);
    embed_b_ = store_.add("embed.b", d, 1);
    role_emb_ = store_.add("role.emb", d, 2);
    time_w1_ = store_.add("time.w1", d, d);
    time_b1_ = store_.add("time.b1", d, 1);
    time_w2_ = store_.add("time.w2", d, d);
    time_b2_ = store_.add("time.b2", d, 1);

    blocks_.reserve(static_cast<std::size_t>(cfg_.depth));
    for (int i = 0; i < cfg_.depth; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        BlockIds b{};
        b.mod_w = store_.add(p + "mod.w", 6 * d, d);
        b.mod_b = store_.add(p + "mod.b", 6 * d, 1);
        b.wq = store_.add(p + "attn.wq", d, d);
        b.wk = store_.add(p + "attn.wk", d, d);
        b.wv = store_.add(p + "attn.wv", d, d);
        b.wo = store_.add(p + "attn.wo", d, d);
        b.bq = store_.add(p + "attn.bq", d, 1);
        b.bk = store_.add(p + "attn.bk", d, 1);
        b.bv = store_.add(p + "attn.bv", d, 1);
        b.bo = store_.add(p + "attn.bo", d, 1);
        b.cam_w1 = store_.add(p + "cam.w1", hidden, pdim);
        b.cam_b1 = store_.add(p + "cam.b1", hidden, 1);
        b.cam_w2 = store_.add(p + "cam.w2", cfg_.d_c, hidden);
        b.cam_b2 = store_.add(p + "cam.b2", cfg_.d_c, 1);
        // allocated for every variant so parameter layout and init draws are
        // identical across the ablation
        b.cam_wq = store_.add(p + "cam.wq", cfg_.d_c, cfg_.d_c);
        b.cam_wk = store_.add(p + "cam.wk", cfg_.d_c, cfg_.d_c);
        if (cfg_.cond_width > 0) {
            b.cross_wq = store_.add(p + "cross.wq", d, d);
            b.cross_bq = store_.add(p + "cross.bq", d, 1);
            b.cross_wk = store_.add(p + "cross.wk", d, cfg_.cond_width);
            b.cross_wv = store_.add(p + "cross.wv", d, cfg_.cond_width);
            b.cross_wo = store_.add(p + "cross.wo", d, d);
            b.cross_bo = store_.add(p + "cross.bo", d, 1);
        }
        b.ffn_w1 = store_.add(p + "ffn.w1", cfg_.ffn_mult * d, d);
        b.ffn_b1 = store_.add(p + "ffn.b1", cfg_.ffn_mult * d, 1);
        b.ffn_w2 = store_.add(p + "ffn.w2", d, cfg_.ffn_mult * d);
        b.ffn_b2 = store_.add(p + "ffn.b2", d, 1);
        blocks_.push_back(b);
    }
    final_mod_w_ = store_.add("final.mod.w", 2 * d, d);
    final_mod_b_ = store_.add("final.mod.b", 2 * d, 1);
    head_w_ = store_.add("head.w", raw, d);
    head_b_ = store_.add("head.b", raw, 1);
    store_.finalize();
}

void DiTModel::randomize_params(Rng& rng) {
    for (std::size_t i = 0; i < store_.tensor_count(); ++i)
        store_.init_xavier(static_cast<int>(i), rng);
}

void DiTModel::init_params(Rng& rng) {
    randomize_params(rng);
    // biases start at zero
    for (std::size_t i = 0; i < store_.tensor_count(); ++i)
        if (store_.info(static_cast<int>(i)).cols == 1) store_.init_zero(static_cast<int>(i));
    // stabilizers: modulation, camera encoder output, cross output and the
    // velocity head start at zero so an untrained model is the identity map
    // with zero predicted velocity
    for (const auto& b : blocks_) {
        store_.init_zero(b.mod_w);
        store_.init_zero(b.cam_w2);
        if (cfg_.cond_width > 0) store_.init_zero(b.cross_wo);
    }
    store_.init_zero(final_mod_w_);
    store_.init_zero(head_w_);
}

Eigen::MatrixXd DiTModel::forward(const SequenceInput& seq, double tau,
                                  DitForwardCache* cache) const {
    const int d = cfg_.d;
    const Eigen::Index n = seq.video.cols();
    if (seq.video.rows() != cfg_.raw_patch_dim())
        throw ShapeError("DiTModel::forward: video patch width mismatch");
    if (seq.plucker.rows() != cfg_.plucker_patch_dim() || seq.plucker.cols() != n)
        throw ShapeError("DiTModel::forward: plucker patch grid mismatch");
    if (static_cast<Eigen::Index>(seq.positions.size()) != n ||
        static_cast<Eigen::Index>(seq.is_target.size()) != n)
        throw ShapeError("DiTModel::forward: per-token metadata size mismatch");
    if (cfg_.cond_width > 0 && seq.cond.size() != cfg_.cond_width)
        throw ShapeError("DiTModel::forward: conditioning vector width mismatch");
    if (!seq.video.allFinite() || !seq.plucker.allFinite())
        throw NumericalError("DiTModel::forward: non-finite inputs");
    if (!(tau >= 0.0 && tau <= 1.0))
        throw InvalidParams("DiTModel::forward: tau must lie in [0, 1]");

    DitForwardCache local;
    DitForwardCache& c = cache ? *cache : local;
    c.tau = tau;
    c.target_cols = seq.target_cols();
    if (c.target_cols.empty()) throw ShapeError("DiTModel::forward: sequence has no target tokens");

    c.rope = make_rope_sincos(seq.positions, video_table_, camera_table_);

    // embedding + role
    Eigen::MatrixXd x = store_.param(embed_w_) * seq.video;
    x.colwise() += Eigen::VectorXd(store_.param(embed_b_).col(0));
    ConstMatMap role = store_.param(role_emb_);
    for (Eigen::Index i = 0; i < n; ++i) x.col(i) += role.col(seq.is_target[static_cast<std::size_t>(i)] ? 1 : 0);
    c.x0 = x;

    // diffusion-time conditioning, shared by every block
    c.t_raw = sinusoidal_embedding(tau, d);
    c.t_pre = store_.param(time_w1_) * c.t_raw + store_.param(time_b1_).col(0);
    c.t_hidden = c.t_pre.unaryExpr([](double v) { return silu(v); });
    c.t_emb = store_.param(time_w2_) * c.t_hidden + store_.param(time_b2_).col(0);
    c.t_act = c.t_emb.unaryExpr([](double v) { return silu(v); });

    AttentionDims dims{cfg_.d, cfg_.d_c, cfg_.heads, cfg_.softmax_scale};

    c.blocks.assign(static_cast<std::size_t>(cfg_.depth), BlockCache{});
    for (int bi = 0; bi < cfg_.depth; ++bi) {
        const BlockIds& ids = blocks_[static_cast<std::size_t>(bi)];
        BlockCache& bc = c.blocks[static_cast<std::size_t>(bi)];

        bc.mod = store_.param(ids.mod_w) * c.t_act + store_.param(ids.mod_b).col(0);
        const Eigen::VectorXd shift_a = bc.mod.segment(0, d);
        const Eigen::VectorXd scale_a = bc.mod.segment(d, d);
        const Eigen::VectorXd gate_a = bc.mod.segment(2 * d, d);
        const Eigen::VectorXd shift_f = bc.mod.segment(3 * d, d);
        const Eigen::VectorXd scale_f = bc.mod.segment(4 * d, d);
        const Eigen::VectorXd gate_f = bc.mod.segment(5 * d, d);

        // attention branch
        layer_norm(x, bc.ln_attn);
        bc.u_attn = modulate(bc.ln_attn.xhat, shift_a, scale_a);
        bc.q = store_.param(ids.wq) * bc.u_attn;
        bc.q.colwise() += Eigen::VectorXd(store_.param(ids.bq).col(0));
        bc.k = store_.param(ids.wk) * bc.u_attn;
        bc.k.colwise() += Eigen::VectorXd(store_.param(ids.bk).col(0));
        bc.v = store_.param(ids.wv) * bc.u_attn;
        bc.v.colwise() += Eigen::VectorXd(store_.param(ids.bv).col(0));

        CameraEncoderView enc{store_.param(ids.cam_w1), store_.param(ids.cam_b1),
                              store_.param(ids.cam_w2), store_.param(ids.cam_b2)};
        bc.cam_tokens = camera_encoder_forward(seq.plucker, enc, &bc.cam);

        const Eigen::MatrixXd cam_wq = store_.param(ids.cam_wq);
        const Eigen::MatrixXd cam_wk = store_.param(ids.cam_wk);
        const Eigen::MatrixXd video_wq = store_.param(ids.wq);
        const Eigen::MatrixXd video_wk = store_.param(ids.wk);
        AttentionCoreParams proj;
        proj.cam_wq = &cam_wq;
        proj.cam_wk = &cam_wk;
        proj.video_wq = &video_wq;
        proj.video_wk = &video_wk;

        bc.attn_concat = attention_core_forward(cfg_.variant, bc.q, bc.k, bc.v, bc.cam_tokens,
                                                proj, dims, c.rope, &bc.core);
        bc.attn_out = store_.param(ids.wo) * bc.attn_concat;
        bc.attn_out.colwise() += Eigen::VectorXd(store_.param(ids.bo).col(0));
        bc.x_attn = x + (bc.attn_out.array().colwise() * gate_a.array()).matrix();
        x = bc.x_attn;

        // conditioning branch; softmax over a single key token is constant,
        // so the output reduces to a broadcast of the projected value
        if (cfg_.cond_width > 0) {
            layer_norm(x, bc.ln_cross);
            bc.cross_in = bc.ln_cross.xhat;
            bc.cross_vc = store_.param(ids.cross_wv) * seq.cond;
            Eigen::MatrixXd concat = bc.cross_vc.replicate(1, n);
            bc.cross_out = store_.param(ids.cross_wo) * concat;
            bc.cross_out.colwise() += Eigen::VectorXd(store_.param(ids.cross_bo).col(0));
            bc.x_cross = x + bc.cross_out;
            x = bc.x_cross;
        }

        // feed-forward branch
        layer_norm(x, bc.ln_ffn);
        bc.u_ffn = modulate(bc.ln_ffn.xhat, shift_f, scale_f);
        bc.ffn_pre = store_.param(ids.ffn_w1) * bc.u_ffn;
        bc.ffn_pre.colwise() += Eigen::VectorXd(store_.param(ids.ffn_b1).col(0));
        bc.ffn_act = bc.ffn_pre.unaryExpr([](double v) { return gelu(v); });
        bc.ffn_out = store_.param(ids.ffn_w2) * bc.ffn_act;
        bc.ffn_out.colwise() += Eigen::VectorXd(store_.param(ids.ffn_b2).col(0));
        bc.x_ffn = x + (bc.ffn_out.array().colwise() * gate_f.array()).matrix();
        x = bc.x_ffn;
    }

    // velocity head on target tokens only
    const Eigen::Index nt = static_cast<Eigen::Index>(c.target_cols.size());
    c.x_final.resize(d, nt);
    for (Eigen::Index i = 0; i < nt; ++i)
        c.x_final.col(i) = x.col(c.target_cols[static_cast<std::size_t>(i)]);
    layer_norm(c.x_final, c.ln_f);
    c.mod_f = store_.param(final_mod_w_) * c.t_act + store_.param(final_mod_b_).col(0);
    c.head_in = modulate(c.ln_f.xhat, c.mod_f.segment(0, d), c.mod_f.segment(d, d));
    Eigen::MatrixXd y = store_.param(head_w_) * c.head_in;
    y.colwise() += Eigen::VectorXd(store_.param(head_b_).col(0));
    if (!y.allFinite()) throw NumericalError("DiTModel::forward: non-finite activations");
    return y;
}

void DiTModel::backward(const SequenceInput& seq, const DitForwardCache& c,
                        const Eigen::MatrixXd& d_velocity, std::vector<double>& grads) const {
    const int d = cfg_.d;
    const Eigen::Index n = seq.video.cols();
    const Eigen::Index nt = static_cast<Eigen::Index>(c.target_cols.size());
    if (d_velocity.rows() != cfg_.raw_patch_dim() || d_velocity.cols() != nt)
        throw ShapeError("DiTModel::backward: velocity gradient shape mismatch");

    auto g = [&](int id) { return store_.view(grads, id); };

    Eigen::VectorXd d_t_act = Eigen::VectorXd::Zero(d);

    // head
    g(head_w_) += d_velocity * c.head_in.transpose();
    g(head_b_).col(0) += d_velocity.rowwise().sum();
    Eigen::MatrixXd d_head_in = store_.param(head_w_).transpose() * d_velocity;

    const Eigen::VectorXd scale_h = c.mod_f.segment(d, d);
    Eigen::MatrixXd d_xhat_f = d_head_in.array().colwise() * (1.0 + scale_h.array());
    Eigen::VectorXd d_mod_f(2 * d);
    d_mod_f.segment(0, d) = d_head_in.rowwise().sum();
    d_mod_f.segment(d, d) = (d_head_in.array() * c.ln_f.xhat.array()).rowwise().sum();
    g(final_mod_w_) += d_mod_f * c.t_act.transpose();
    g(final_mod_b_).col(0) += d_mod_f;
    d_t_act += store_.param(final_mod_w_).transpose() * d_mod_f;

    Eigen::MatrixXd d_x_final = layer_norm_backward(d_xhat_f, c.ln_f);

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(d, n);
    for (Eigen::Index i = 0; i < nt; ++i)
        dx.col(c.target_cols[static_cast<std::size_t>(i)]) = d_x_final.col(i);

    AttentionDims dims{cfg_.d, cfg_.d_c, cfg_.heads, cfg_.softmax_scale};

    for (int bi = cfg_.depth - 1; bi >= 0; --bi) {
        const BlockIds& ids = blocks_[static_cast<std::size_t>(bi)];
        const BlockCache& bc = c.blocks[static_cast<std::size_t>(bi)];
        const Eigen::VectorXd scale_a = bc.mod.segment(d, d);
        const Eigen::VectorXd gate_a = bc.mod.segment(2 * d, d);
        const Eigen::VectorXd scale_f = bc.mod.segment(4 * d, d);
        const Eigen::VectorXd gate_f = bc.mod.segment(5 * d, d);
        Eigen::VectorXd d_mod = Eigen::VectorXd::Zero(6 * d);

        // feed-forward branch
        Eigen::MatrixXd d_ffn_out = dx.array().colwise() * gate_f.array();
        d_mod.segment(5 * d, d) = (dx.array() * bc.ffn_out.array()).rowwise().sum();
        g(ids.ffn_w2) += d_ffn_out * bc.ffn_act.transpose();
        g(ids.ffn_b2).col(0) += d_ffn_out.rowwise().sum();
        Eigen::MatrixXd d_act = store_.param(ids.ffn_w2).transpose() * d_ffn_out;
        Eigen::MatrixXd d_pre =
            d_act.cwiseProduct(bc.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }));
        g(ids.ffn_w1) += d_pre * bc.u_ffn.transpose();
        g(ids.ffn_b1).col(0) += d_pre.rowwise().sum();
        Eigen::MatrixXd d_u_ffn = store_.param(ids.ffn_w1).transpose() * d_pre;

        Eigen::MatrixXd d_xhat3 = d_u_ffn.array().colwise() * (1.0 + scale_f.array());
        d_mod.segment(3 * d, d) = d_u_ffn.rowwise().sum();
        d_mod.segment(4 * d, d) = (d_u_ffn.array() * bc.ln_ffn.xhat.array()).rowwise().sum();
        dx += layer_norm_backward(d_xhat3, bc.ln_ffn);

        // conditioning branch: no gradient reaches the pre-norm input through
        // the constant softmax, only the value/output projections learn
        if (cfg_.cond_width > 0) {
            g(ids.cross_wo) += dx * bc.cross_vc.replicate(1, n).transpose();
            g(ids.cross_bo).col(0) += dx.rowwise().sum();
            Eigen::VectorXd d_vc =
                (store_.param(ids.cross_wo).transpose() * dx).rowwise().sum();
            g(ids.cross_wv) += d_vc * seq.cond.transpose();
        }

        // attention branch
        Eigen::MatrixXd d_attn_out = dx.array().colwise() * gate_a.array();
        d_mod.segment(2 * d, d) = (dx.array() * bc.attn_out.array()).rowwise().sum();
        g(ids.wo) += d_attn_out * bc.attn_concat.transpose();
        g(ids.bo).col(0) += d_attn_out.rowwise().sum();
        Eigen::MatrixXd d_core = store_.param(ids.wo).transpose() * d_attn_out;

        const Eigen::MatrixXd cam_wq = store_.param(ids.cam_wq);
        const Eigen::MatrixXd cam_wk = store_.param(ids.cam_wk);
        const Eigen::MatrixXd video_wq = store_.param(ids.wq);
        const Eigen::MatrixXd video_wk = store_.param(ids.wk);
        AttentionCoreParams proj;
        proj.cam_wq = &cam_wq;
        proj.cam_wk = &cam_wk;
        proj.video_wq = &video_wq;
        proj.video_wk = &video_wk;

        AttentionCoreGrads cg = attention_core_backward(cfg_.variant, d_core, bc.q, bc.k, bc.v,
                                                        bc.cam_tokens, proj, dims, c.rope,
                                                        bc.core);

        g(ids.wq) += cg.dq * bc.u_attn.transpose();
        g(ids.bq).col(0) += cg.dq.rowwise().sum();
        g(ids.wk) += cg.dk * bc.u_attn.transpose();
        g(ids.bk).col(0) += cg.dk.rowwise().sum();
        g(ids.wv) += cg.dv * bc.u_attn.transpose();
        g(ids.bv).col(0) += cg.dv.rowwise().sum();
        if (cfg_.variant == AttentionVariant::kNoRopePlucker) {
            g(ids.wq) += cg.dvideo_wq;
            g(ids.wk) += cg.dvideo_wk;
        }
        if (cfg_.variant == AttentionVariant::kRope2DSeparateQKCat) {
            g(ids.cam_wq) += cg.dcam_wq;
            g(ids.cam_wk) += cg.dcam_wk;
        }

        CameraEncoderView enc{store_.param(ids.cam_w1), store_.param(ids.cam_b1),
                              store_.param(ids.cam_w2), store_.param(ids.cam_b2)};
        MatMap g_cam_w1 = g(ids.cam_w1), g_cam_b1 = g(ids.cam_b1);
        MatMap g_cam_w2 = g(ids.cam_w2), g_cam_b2 = g(ids.cam_b2);
        CameraEncoderGrads enc_grads{g_cam_w1, g_cam_b1, g_cam_w2, g_cam_b2};
        camera_encoder_backward(cg.dcamera, seq.plucker, enc, bc.cam, enc_grads);

        Eigen::MatrixXd d_u_attn = store_.param(ids.wq).transpose() * cg.dq +
                                   store_.param(ids.wk).transpose() * cg.dk +
                                   store_.param(ids.wv).transpose() * cg.dv;
        Eigen::MatrixXd d_xhat1 = d_u_attn.array().colwise() * (1.0 + scale_a.array());
        d_mod.segment(0, d) = d_u_attn.rowwise().sum();
        d_mod.segment(d, d) = (d_u_attn.array() * bc.ln_attn.xhat.array()).rowwise().sum();
        dx += layer_norm_backward(d_xhat1, bc.ln_attn);

        g(ids.mod_w) += d_mod * c.t_act.transpose();
        g(ids.mod_b).col(0) += d_mod;
        d_t_act += store_.param(ids.mod_w).transpose() * d_mod;
    }

    // embedding
    g(embed_w_) += dx * seq.video.transpose();
    g(embed_b_).col(0) += dx.rowwise().sum();
    MatMap d_role = g(role_emb_);
    for (Eigen::Index i = 0; i < n; ++i)
        d_role.col(seq.is_target[static_cast<std::size_t>(i)] ? 1 : 0) += dx.col(i);

    // diffusion-time path
    Eigen::VectorXd d_t_emb =
        d_t_act.cwiseProduct(c.t_emb.unaryExpr([](double v) { return silu_grad(v); }));
    g(time_w2_) += d_t_emb * c.t_hidden.transpose();
    g(time_b2_).col(0) += d_t_emb;
    Eigen::VectorXd d_t_hidden = store_.param(time_w2_).transpose() * d_t_emb;
    Eigen::VectorXd d_t_pre =
        d_t_hidden.cwiseProduct(c.t_pre.unaryExpr([](double v) { return silu_grad(v); }));
    g(time_w1_) += d_t_pre * c.t_raw.transpose();
    g(time_b1_).col(0) += d_t_pre;
}

// ---------------------------------------------------------------------------
// rectified flow

double rectified_flow_loss_at(const DiTModel& model, const SequenceInput& seq_clean,
                              const Eigen::MatrixXd& eps, double tau,
                              std::vector<double>* grads) {
    const std::vector<int> targets = seq_clean.target_cols();
    const Eigen::Index nt = static_cast<Eigen::Index>(targets.size());
    if (eps.rows() != seq_clean.video.rows() || eps.cols() != nt)
        throw ShapeError("rectified_flow_loss_at: noise shape mismatch");

    SequenceInput noised = seq_clean;
    Eigen::MatrixXd z0(eps.rows(), nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        const int col = targets[static_cast<std::size_t>(i)];
        z0.col(i) = seq_clean.video.col(col);
        noised.video.col(col) = (1.0 - tau) * z0.col(i) + tau * eps.col(i);
    }
    const Eigen::MatrixXd v_star = eps - z0;

    DitForwardCache cache;
    const Eigen::MatrixXd v_pred = model.forward(noised, tau, grads ? &cache : nullptr);

    const Eigen::MatrixXd residual = v_pred - v_star;
    const double denom = static_cast<double>(residual.size());
    const double loss = residual.squaredNorm() / denom;
    if (grads) {
        const Eigen::MatrixXd d_vel = (2.0 / denom) * residual;
        model.backward(noised, cache, d_vel, *grads);
    }
    return loss;
}

double rectified_flow_loss(const DiTModel& model, const SequenceInput& seq_clean, Rng& rng,
                           std::vector<double>* grads) {
    const Eigen::Index nt = static_cast<Eigen::Index>(seq_clean.target_cols().size());
    Eigen::MatrixXd eps(seq_clean.video.rows(), nt);
    for (Eigen::Index c = 0; c < eps.cols(); ++c)
        for (Eigen::Index r = 0; r < eps.rows(); ++r) eps(r, c) = rng.gauss();
    const double tau = rng.uniform();
    return rectified_flow_loss_at(model, seq_clean, eps, tau, grads);
}

Eigen::MatrixXd integrate_velocity_field(Eigen::MatrixXd z, int steps,
                                         const VelocityField& field) {
    if (steps < 1) throw InvalidParams("integrate_velocity_field: steps must be >= 1");
    const double h = 1.0 / static_cast<double>(steps);
    for (int k = 0; k < steps; ++k) {
        const double tau = 1.0 - static_cast<double>(k) / static_cast<double>(steps);
        z -= h * field(z, tau);
        if ((z.array().abs() > 1e6).any())
            throw NumericalError("integrate_velocity_field: trajectory diverged");
    }
    return z;
}

Eigen::MatrixXd sample_targets(const DiTModel& model, const SequenceInput& seq, int steps,
                               Rng& rng, const SampleObserver& observer) {
    const std::vector<int> targets = seq.target_cols();
    const Eigen::Index nt = static_cast<Eigen::Index>(targets.size());
    Eigen::MatrixXd z(seq.video.rows(), nt);
    for (Eigen::Index c = 0; c < z.cols(); ++c)
        for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = rng.gauss();

    SequenceInput work = seq;
    int step_counter = 0;
    auto field = [&](const Eigen::MatrixXd& zt, double tau) {
        for (Eigen::Index i = 0; i < nt; ++i)
            work.video.col(targets[static_cast<std::size_t>(i)]) = zt.col(i);
        Eigen::MatrixXd v = model.forward(work, tau, nullptr);
        return v;
    };

    if (!observer) return integrate_velocity_field(std::move(z), steps, field);

    // manual loop so the observer can watch every state
    const double h = 1.0 / static_cast<double>(steps);
    for (int k = 0; k < steps; ++k) {
        const double tau = 1.0 - static_cast<double>(k) / static_cast<double>(steps);
        z -= h * field(z, tau);
        if ((z.array().abs() > 1e6).any())
            throw NumericalError("sample_targets: trajectory diverged");
        for (Eigen::Index i = 0; i < nt; ++i)
            work.video.col(targets[static_cast<std::size_t>(i)]) = z.col(i);
        observer(step_counter++, work);
    }
    return z;
}

} // namespace viewflow
