#include "eeo/model.hpp"

#include <cmath>
#include <string>

#include "eeo/errors.hpp"
#include "eeo/rng.hpp"

namespace eeo {

namespace {

void add_into(Matrix& acc, const Matrix& m) {
    if (!acc.same_shape(m)) throw ShapeError("add_into: shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += m.data()[i];
}

// Staged values of one block's forward pass, kept for the backward pass.
struct BlockCache {
    Matrix z;  // block input, N x d
    Matrix q;  // N x d_m
    Matrix k;  // N x d_m
    Matrix a;  // N x N
    Matrix v;  // N x d
    Matrix r;  // N x d, residual stream after the attention update
};

struct ForwardCache {
    std::vector<BlockCache> blocks;
    Matrix out;
};

ForwardCache run_blocks(const TokenMatrix& z0, const ModelParams& p) {
    if (p.blocks.empty()) throw ShapeError("forward: model has no attention blocks");
    ForwardCache cache;
    cache.blocks.reserve(p.blocks.size());
    Matrix z = z0;
    for (const AttentionBlock& blk : p.blocks) {
        BlockCache c;
        c.z = z;
        c.q = matmul(z, blk.w_q);
        c.k = matmul(z, blk.w_k);
        const double inv = 1.0 / std::sqrt(static_cast<double>(blk.w_q.cols()));
        c.a = softmax_rows(scale(matmul(c.q, transpose(c.k)), inv));
        c.v = matmul(z, blk.w_v);
        c.r = add(z, matmul(c.a, c.v));
        z = matmul(c.r, blk.w_o);
        cache.blocks.push_back(std::move(c));
    }
    cache.out = std::move(z);
    return cache;
}

// Gradient of softmax_rows: given upstream dL/dA, returns dL/dScores where
// A = softmax_rows(Scores). Row i: dS[i][j] = A[i][j] (dA[i][j] - sum_k dA[i][k] A[i][k]).
Matrix softmax_rows_backward(const Matrix& a, const Matrix& g_a) {
    Matrix g_s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row_dot = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) row_dot += g_a(i, j) * a(i, j);
        for (std::size_t j = 0; j < a.cols(); ++j)
            g_s(i, j) = a(i, j) * (g_a(i, j) - row_dot);
    }
    return g_s;
}

// Backward pass through the block stack. g_out is dL/d(out); returns
// dL/d(z0) and accumulates per-block weight gradients into `grads`.
Matrix backprop_blocks(const ForwardCache& cache, const ModelParams& p,
                       Matrix g_out, ModelParams& grads) {
    for (std::size_t li = p.blocks.size(); li-- > 0;) {
        const AttentionBlock& blk = p.blocks[li];
        const BlockCache& c = cache.blocks[li];
        const double inv = 1.0 / std::sqrt(static_cast<double>(blk.w_q.cols()));

        const Matrix g_r = matmul(g_out, transpose(blk.w_o));
        add_into(grads.blocks[li].w_o, matmul(transpose(c.r), g_out));

        // r = z + a v; the residual path passes g_r through unchanged.
        const Matrix g_a = matmul(g_r, transpose(c.v));
        const Matrix g_v = matmul(transpose(c.a), g_r);
        add_into(grads.blocks[li].w_v, matmul(transpose(c.z), g_v));

        const Matrix g_s = softmax_rows_backward(c.a, g_a);
        const Matrix g_q = scale(matmul(g_s, c.k), inv);
        const Matrix g_k = scale(matmul(transpose(g_s), c.q), inv);
        add_into(grads.blocks[li].w_q, matmul(transpose(c.z), g_q));
        add_into(grads.blocks[li].w_k, matmul(transpose(c.z), g_k));

        Matrix g_z = g_r;
        add_into(g_z, matmul(g_v, transpose(blk.w_v)));
        add_into(g_z, matmul(g_q, transpose(blk.w_q)));
        add_into(g_z, matmul(g_k, transpose(blk.w_k)));
        g_out = std::move(g_z);
    }
    return g_out;
}

}  // namespace

TSInput::TSInput(std::size_t vars, std::size_t len, Matrix vals)
    : D(vars), L(len), values(std::move(vals)) {
    if (D == 0 || L == 0) throw ShapeError("TSInput: D and L must be at least 1");
    if (values.rows() != D || values.cols() != L)
        throw ShapeError("TSInput: values must be D x L, got " +
                         std::to_string(values.rows()) + "x" +
                         std::to_string(values.cols()));
}

ImgInput::ImgInput(std::size_t channels, std::size_t height, std::size_t width,
                   std::vector<double> vals)
    : C(channels), H(height), W(width), values(std::move(vals)) {
    if (C == 0 || H == 0 || W == 0)
        throw ShapeError("ImgInput: C, H, W must be at least 1");
    if (values.size() != C * H * W)
        throw ShapeError("ImgInput: expected " + std::to_string(C * H * W) +
                         " values, got " + std::to_string(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw NumericError("ImgInput: non-finite value at index " + std::to_string(i));
}

void ModelShape::validate() const {
    if (d == 0 || d_m == 0) throw ValidationError("model shape: d and d_m must be at least 1");
    if (layers < 1 || layers > 4)
        throw ValidationError("model shape: layers must be between 1 and 4, got " +
                              std::to_string(layers));
    if (head_out > 0 && n_tokens == 0)
        throw ValidationError("model shape: a readout head requires n_tokens to be set");
}

std::size_t ModelShape::param_dim() const {
    validate();
    std::size_t total = 0;
    if (patch_len > 0) total += patch_len * d;
    if (img_patch_dim > 0) total += img_patch_dim * d;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t out = (l + 1 == layers) ? resolved_d_out() : d;
        total += d * d_m * 2 + d * d + d * out;
    }
    if (head_out > 0) total += head_in() * head_out;
    return total;
}

ModelParams::ModelParams(ModelShape s) : shape(std::move(s)) {
    shape.validate();
    if (shape.patch_len > 0) phi_ts = Matrix(shape.patch_len, shape.d);
    if (shape.img_patch_dim > 0) phi_img = Matrix(shape.img_patch_dim, shape.d);
    blocks.reserve(shape.layers);
    for (std::size_t l = 0; l < shape.layers; ++l) {
        const std::size_t out = (l + 1 == shape.layers) ? shape.resolved_d_out() : shape.d;
        blocks.push_back(AttentionBlock{Matrix(shape.d, shape.d_m), Matrix(shape.d, shape.d_m),
                                        Matrix(shape.d, shape.d), Matrix(shape.d, out)});
    }
    if (shape.head_out > 0) head = Matrix(shape.head_in(), shape.head_out);
}

ModelParams ModelParams::zeros(const ModelShape& s) { return ModelParams(s); }

namespace {

template <typename Fn>
void walk_params(ModelParams& p, Fn&& fn) {
    if (p.phi_ts) fn(*p.phi_ts);
    if (p.phi_img) fn(*p.phi_img);
    for (AttentionBlock& b : p.blocks) {
        fn(b.w_q);
        fn(b.w_k);
        fn(b.w_v);
        fn(b.w_o);
    }
    if (p.head) fn(*p.head);
}

}  // namespace

ParamVector ModelParams::flatten() const {
    ParamVector out(shape.param_dim());
    std::size_t at = 0;
    auto& self = const_cast<ModelParams&>(*this);
    walk_params(self, [&](Matrix& m) {
        for (double x : m.data()) out[at++] = x;
    });
    return out;
}

ModelParams ModelParams::unflatten(const ModelShape& s, const ParamVector& w) {
    if (w.dim() != s.param_dim())
        throw ShapeError("model parameters: vector has length " + std::to_string(w.dim()) +
                         " but the shape requires " + std::to_string(s.param_dim()));
    ModelParams p(s);
    std::size_t at = 0;
    walk_params(p, [&](Matrix& m) {
        for (double& x : m.data()) x = w[at++];
    });
    return p;
}

ModelParams ModelParams::init(const ModelShape& s, std::uint64_t seed) {
    ModelParams p(s);
    Rng rng = Rng::stream(seed, stream::kInit, 0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.d));
    walk_params(p, [&](Matrix& m) {
        for (double& x : m.data()) x = (2.0 * rng.uniform() - 1.0) * bound;
    });
    return p;
}

TokenMatrix tokenize_ts(const TSInput& x, std::size_t patch_len, const Matrix& phi) {
    if (patch_len == 0) throw ShapeError("tokenize_ts: patch_len must be at least 1");
    if (x.L % patch_len != 0)
        throw ShapeError("tokenize_ts: sequence length " + std::to_string(x.L) +
                         " is not divisible by patch_len " + std::to_string(patch_len) +
                         "; left-pad the series to a multiple first (nothing is padded "
                         "silently)");
    if (phi.rows() != patch_len)
        throw ShapeError("tokenize_ts: projection expects " + std::to_string(phi.rows()) +
                         " rows per patch, patch_len is " + std::to_string(patch_len));
    const std::size_t per_var = x.L / patch_len;
    Matrix patches(x.D * per_var, patch_len);
    for (std::size_t v = 0; v < x.D; ++v)
        for (std::size_t t = 0; t < per_var; ++t)
            for (std::size_t k = 0; k < patch_len; ++k)
                patches(v * per_var + t, k) = x.values(v, t * patch_len + k);
    return matmul(patches, phi);
}

TokenMatrix patch_embed_img(const ImgInput& x, std::size_t patch, const Matrix& phi) {
    if (patch == 0) throw ShapeError("patch_embed_img: patch must be at least 1");
    if (x.H % patch != 0 || x.W % patch != 0)
        throw ShapeError("patch_embed_img: image " + std::to_string(x.H) + "x" +
                         std::to_string(x.W) + " is not divisible by patch " +
                         std::to_string(patch));
    const std::size_t block_dim = x.C * patch * patch;
    if (phi.rows() != block_dim)
        throw ShapeError("patch_embed_img: projection expects " + std::to_string(block_dim) +
                         " rows, got " + std::to_string(phi.rows()));
    const std::size_t grid_h = x.H / patch;
    const std::size_t grid_w = x.W / patch;
    Matrix blocks(grid_h * grid_w, block_dim);
    for (std::size_t gr = 0; gr < grid_h; ++gr)
        for (std::size_t gc = 0; gc < grid_w; ++gc) {
            const std::size_t token = gr * grid_w + gc;
            for (std::size_t ch = 0; ch < x.C; ++ch)
                for (std::size_t rr = 0; rr < patch; ++rr)
                    for (std::size_t cc = 0; cc < patch; ++cc) {
                        const std::size_t row = gr * patch + rr;
                        const std::size_t col = gc * patch + cc;
                        blocks(token, ch * patch * patch + rr * patch + cc) =
                            x.values[ch * x.H * x.W + row * x.W + col];
                    }
        }
    return matmul(blocks, phi);
}

Matrix attention_matrix(const TokenMatrix& z, const Matrix& w_q, const Matrix& w_k) {
    if (w_q.rows() != z.cols() || w_k.rows() != z.cols() || w_q.cols() != w_k.cols())
        throw ShapeError("attention_matrix: tokens are N x " + std::to_string(z.cols()) +
                         ", weights are " + std::to_string(w_q.rows()) + "x" +
                         std::to_string(w_q.cols()) + " and " + std::to_string(w_k.rows()) +
                         "x" + std::to_string(w_k.cols()));
    const double inv = 1.0 / std::sqrt(static_cast<double>(w_q.cols()));
    return softmax_rows(scale(matmul(matmul(z, w_q), transpose(matmul(z, w_k))), inv));
}

Matrix forward(const TokenMatrix& z, const ModelParams& p) {
    return run_blocks(z, p).out;
}

double attention_loss(const Matrix& a, const Matrix& a_star) {
    if (!a.same_shape(a_star))
        throw ShapeError("attention_loss: shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(a_star.rows()) +
                         "x" + std::to_string(a_star.cols()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a.data()[i] - a_star.data()[i];
        sum += diff * diff;
    }
    return 0.5 * sum;
}

std::pair<double, double> mse_mae(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse_mae: shape mismatch " + std::to_string(pred.rows()) + "x" +
                         std::to_string(pred.cols()) + " vs " + std::to_string(target.rows()) +
                         "x" + std::to_string(target.cols()));
    if (pred.size() == 0) throw ShapeError("mse_mae: empty matrices");
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = pred.data()[i] - target.data()[i];
        se += diff * diff;
        ae += std::abs(diff);
    }
    const double n = static_cast<double>(pred.size());
    return {se / n, ae / n};
}

ForecastObjective::ForecastObjective(std::vector<TSWindow> windows, ModelShape shape,
                                     std::size_t batch_size)
    : windows_(std::move(windows)), shape_(std::move(shape)), batch_size_(batch_size) {
    shape_.validate();
    if (windows_.empty()) throw ValidationError("forecast objective: no windows");
    if (shape_.patch_len == 0)
        throw ValidationError("forecast objective: shape needs patch_len for the series "
                              "projection");
    if (shape_.head_out == 0)
        throw ValidationError("forecast objective: shape needs a readout head");
    vars_ = windows_.front().x.rows();
    const std::size_t lookback = windows_.front().x.cols();
    horizon_ = windows_.front().y.cols();
    if (lookback % shape_.patch_len != 0)
        throw ValidationError("forecast objective: lookback " + std::to_string(lookback) +
                              " is not divisible by patch_len " +
                              std::to_string(shape_.patch_len));
    const std::size_t n_tokens = vars_ * (lookback / shape_.patch_len);
    if (shape_.n_tokens != n_tokens)
        throw ValidationError("forecast objective: shape declares " +
                              std::to_string(shape_.n_tokens) + " tokens, windows produce " +
                              std::to_string(n_tokens));
    if (shape_.head_out != vars_ * horizon_)
        throw ValidationError("forecast objective: head emits " +
                              std::to_string(shape_.head_out) + " values, targets need " +
                              std::to_string(vars_ * horizon_));
    patches_.reserve(windows_.size());
    for (const TSWindow& w : windows_) {
        if (w.x.rows() != vars_ || w.x.cols() != lookback)
            throw ValidationError("forecast objective: inconsistent window input shapes");
        if (w.y.rows() != vars_ || w.y.cols() != horizon_)
            throw ValidationError("forecast objective: inconsistent window target shapes");
        const TSInput input(vars_, lookback, w.x);
        const std::size_t per_var = lookback / shape_.patch_len;
        Matrix p(n_tokens, shape_.patch_len);
        for (std::size_t v = 0; v < vars_; ++v)
            for (std::size_t t = 0; t < per_var; ++t)
                for (std::size_t k = 0; k < shape_.patch_len; ++k)
                    p(v * per_var + t, k) = input.values(v, t * shape_.patch_len + k);
        patches_.push_back(std::move(p));
    }
}

std::vector<std::size_t> ForecastObjective::batch_indices(const BatchHandle& batch) const {
    std::vector<std::size_t> idx;
    if (batch_size_ == 0 || batch_size_ >= windows_.size()) {
        idx.resize(windows_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return idx;
    }
    Rng rng = Rng::stream(batch.seed, stream::kBatch, batch.step);
    idx.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i)
        idx.push_back(static_cast<std::size_t>(rng.next_u64() % windows_.size()));
    return idx;
}

double ForecastObjective::eval(const ParamVector& w, const BatchHandle& batch) const {
    const ModelParams p = ModelParams::unflatten(shape_, w);
    const std::vector<std::size_t> idx = batch_indices(batch);
    const double denom = static_cast<double>(shape_.head_out);
    double total = 0.0;
    for (std::size_t i : idx) {
        const Matrix z = matmul(patches_[i], *p.phi_ts);
        const Matrix y = forward(z, p);
        double se = 0.0;
        for (std::size_t j = 0; j < shape_.head_out; ++j) {
            double pred = 0.0;
            for (std::size_t t = 0; t < y.size(); ++t)
                pred += y.data()[t] * (*p.head)(t, j);
            const double diff = pred - windows_[i].y.data()[j];
            se += diff * diff;
        }
        total += se / denom;
    }
    return total / static_cast<double>(idx.size());
}

ParamVector ForecastObjective::grad(const ParamVector& w, const BatchHandle& batch) const {
    const ModelParams p = ModelParams::unflatten(shape_, w);
    const std::vector<std::size_t> idx = batch_indices(batch);
    ModelParams grads = ModelParams::zeros(shape_);
    const double denom = static_cast<double>(shape_.head_out) *
                         static_cast<double>(idx.size());
    for (std::size_t i : idx) {
        const Matrix z0 = matmul(patches_[i], *p.phi_ts);
        const ForwardCache cache = run_blocks(z0, p);
        const Matrix& y = cache.out;

        // Readout and loss gradient: pred_j = sum_t flat(y)_t head[t][j].
        std::vector<double> g_pred(shape_.head_out, 0.0);
        for (std::size_t j = 0; j < shape_.head_out; ++j) {
            double pred = 0.0;
            for (std::size_t t = 0; t < y.size(); ++t)
                pred += y.data()[t] * (*p.head)(t, j);
            g_pred[j] = 2.0 * (pred - windows_[i].y.data()[j]) / denom;
        }
        Matrix g_y(y.rows(), y.cols());
        for (std::size_t t = 0; t < y.size(); ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < shape_.head_out; ++j)
                acc += (*p.head)(t, j) * g_pred[j];
            g_y.data()[t] = acc;
            for (std::size_t j = 0; j < shape_.head_out; ++j)
                (*grads.head)(t, j) += y.data()[t] * g_pred[j];
        }

        const Matrix g_z0 = backprop_blocks(cache, p, std::move(g_y), grads);
        add_into(*grads.phi_ts, matmul(transpose(patches_[i]), g_z0));
    }
    return grads.flatten();
}

Matrix ForecastObjective::predict(const ParamVector& w, std::size_t window) const {
    if (window >= windows_.size())
        throw ShapeError("forecast objective: window index out of range");
    const ModelParams p = ModelParams::unflatten(shape_, w);
    const Matrix y = forward(matmul(patches_[window], *p.phi_ts), p);
    Matrix pred(vars_, horizon_);
    for (std::size_t j = 0; j < shape_.head_out; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t)
            acc += y.data()[t] * (*p.head)(t, j);
        pred.data()[j] = acc;
    }
    return pred;
}

const Matrix& ForecastObjective::target(std::size_t window) const {
    if (window >= windows_.size())
        throw ShapeError("forecast objective: window index out of range");
    return windows_[window].y;
}

Matrix ForecastObjective::representation(const ParamVector& w, std::size_t window) const {
    if (window >= windows_.size())
        throw ShapeError("forecast objective: window index out of range");
    const ModelParams p = ModelParams::unflatten(shape_, w);
    return forward(matmul(patches_[window], *p.phi_ts), p);
}

Matrix ForecastObjective::attention(const ParamVector& w, std::size_t window) const {
    if (window >= windows_.size())
        throw ShapeError("forecast objective: window index out of range");
    const ModelParams p = ModelParams::unflatten(shape_, w);
    const ForwardCache cache = run_blocks(matmul(patches_[window], *p.phi_ts), p);
    return cache.blocks.back().a;
}

AttentionAlignObjective::AttentionAlignObjective(std::vector<TokenMatrix> tokens,
                                                 std::size_t d_m,
                                                 std::uint64_t teacher_seed)
    : tokens_(std::move(tokens)), d_m_(d_m) {
    if (tokens_.empty()) throw ValidationError("attention-align objective: no windows");
    if (d_m_ == 0) throw ValidationError("attention-align objective: d_m must be at least 1");
    d_ = tokens_.front().cols();
    for (const TokenMatrix& z : tokens_)
        if (z.cols() != d_ || z.rows() == 0)
            throw ValidationError("attention-align objective: inconsistent token shapes");

    Rng rng = Rng::stream(teacher_seed, stream::kTeacher, 0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_));
    Matrix wq(d_, d_m_), wk(d_, d_m_);
    for (double& x : wq.data()) x = (2.0 * rng.uniform() - 1.0) * bound;
    for (double& x : wk.data()) x = (2.0 * rng.uniform() - 1.0) * bound;
    teacher_ = ParamVector(2 * d_ * d_m_);
    std::size_t at = 0;
    for (double x : wq.data()) teacher_[at++] = x;
    for (double x : wk.data()) teacher_[at++] = x;
    targets_.reserve(tokens_.size());
    for (const TokenMatrix& z : tokens_) targets_.push_back(attention_matrix(z, wq, wk));
}

std::pair<Matrix, Matrix> AttentionAlignObjective::split(const ParamVector& w) const {
    if (w.dim() != dim())
        throw ShapeError("attention-align objective: vector has length " +
                         std::to_string(w.dim()) + " but needs " + std::to_string(dim()));
    Matrix wq(d_, d_m_), wk(d_, d_m_);
    std::size_t at = 0;
    for (double& x : wq.data()) x = w[at++];
    for (double& x : wk.data()) x = w[at++];
    return {std::move(wq), std::move(wk)};
}

double AttentionAlignObjective::eval(const ParamVector& w, const BatchHandle&) const {
    const auto [wq, wk] = split(w);
    double total = 0.0;
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        total += attention_loss(attention_matrix(tokens_[i], wq, wk), targets_[i]);
    return total / static_cast<double>(tokens_.size());
}

ParamVector AttentionAlignObjective::grad(const ParamVector& w, const BatchHandle&) const {
    const auto [wq, wk] = split(w);
    const double inv = 1.0 / std::sqrt(static_cast<double>(d_m_));
    const double mean = 1.0 / static_cast<double>(tokens_.size());
    Matrix g_wq(d_, d_m_), g_wk(d_, d_m_);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const TokenMatrix& z = tokens_[i];
        const Matrix q = matmul(z, wq);
        const Matrix k = matmul(z, wk);
        const Matrix a = softmax_rows(scale(matmul(q, transpose(k)), inv));

        Matrix g_a(a.rows(), a.cols());
        for (std::size_t t = 0; t < a.size(); ++t)
            g_a.data()[t] = (a.data()[t] - targets_[i].data()[t]) * mean;
        const Matrix g_s = softmax_rows_backward(a, g_a);
        add_into(g_wq, matmul(transpose(z), scale(matmul(g_s, k), inv)));
        add_into(g_wk, matmul(transpose(z), scale(matmul(transpose(g_s), q), inv)));
    }
    ParamVector out(dim());
    std::size_t at = 0;
    for (double x : g_wq.data()) out[at++] = x;
    for (double x : g_wk.data()) out[at++] = x;
    return out;
}

const Matrix& AttentionAlignObjective::target(std::size_t window) const {
    if (window >= targets_.size())
        throw ShapeError("attention-align objective: window index out of range");
    return targets_[window];
}

ParamVector AttentionAlignObjective::teacher_params() const { return teacher_; }

Matrix AttentionAlignObjective::attention(const ParamVector& w, std::size_t window) const {
    if (window >= tokens_.size())
        throw ShapeError("attention-align objective: window index out of range");
    const auto [wq, wk] = split(w);
    return attention_matrix(tokens_[window], wq, wk);
}

}  // namespace eeo
