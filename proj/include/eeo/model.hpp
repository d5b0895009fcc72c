#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eeo/matrix.hpp"
#include "eeo/objective.hpp"

namespace eeo {

// A multivariate time series laid out variable-major: values is D x L,
// row v holding the full length-L history of variable v.
struct TSInput {
    TSInput(std::size_t vars, std::size_t len, Matrix vals);

    std::size_t D;
    std::size_t L;
    Matrix values;
};

// A dense image, channel-major: values[ch*H*W + row*W + col].
struct ImgInput {
    ImgInput(std::size_t channels, std::size_t height, std::size_t width,
             std::vector<double> vals);

    std::size_t C;
    std::size_t H;
    std::size_t W;
    std::vector<double> values;
};

// Token matrices are plain matrices: one token per row (N rows, d columns).
using TokenMatrix = Matrix;

// Static description of the encoder. d is the embedding width, d_m the
// attention width, layers the stack depth (1..4). d_out = 0 means the last
// block keeps width d. patch_len > 0 adds a trainable series projection
// (patch_len x d); img_patch_dim > 0 adds an image projection. head_out > 0
// appends a linear readout from the flattened encoder output (n_tokens must
// then be set).
struct ModelShape {
    std::size_t d = 4;
    std::size_t d_m = 4;
    std::size_t d_out = 0;
    std::size_t layers = 1;
    std::size_t patch_len = 0;
    std::size_t img_patch_dim = 0;
    std::size_t n_tokens = 0;
    std::size_t head_out = 0;

    void validate() const;
    std::size_t resolved_d_out() const { return d_out == 0 ? d : d_out; }
    std::size_t head_in() const { return n_tokens * resolved_d_out(); }
    std::size_t param_dim() const;
};

struct AttentionBlock {
    Matrix w_q;  // d x d_m
    Matrix w_k;  // d x d_m
    Matrix w_v;  // d x d   (output must be addable to the residual stream)
    Matrix w_o;  // d x d, or d x d_out on the last block
};

// Every learnable tensor of the model. Flattening walks phi_ts, phi_img,
// then each block's W_q, W_k, W_v, W_o, then the head, each row-major; the
// round trip through a ParamVector is the identity.
struct ModelParams {
    explicit ModelParams(ModelShape s);

    ModelShape shape;
    std::optional<Matrix> phi_ts;
    std::optional<Matrix> phi_img;
    std::vector<AttentionBlock> blocks;
    std::optional<Matrix> head;

    ParamVector flatten() const;
    static ModelParams unflatten(const ModelShape& s, const ParamVector& w);
    // All weights i.i.d. uniform in [-1/sqrt(d), 1/sqrt(d)], drawn in
    // flatten order from the dedicated init stream of `seed`.
    static ModelParams init(const ModelShape& s, std::uint64_t seed);
    static ModelParams zeros(const ModelShape& s);
};

// Splits each variable's series into L/patch_len contiguous patches and
// projects every patch through phi (patch_len x d). Tokens are ordered
// variable-major, then time. Throws ShapeError when L is not divisible by
// patch_len (callers must left-pad; nothing is padded silently).
TokenMatrix tokenize_ts(const TSInput& x, std::size_t patch_len, const Matrix& phi);

// Cuts the image into non-overlapping patch x patch blocks (row-major over
// the grid), flattens each block channel-major then row then column, and
// projects through phi ((C*patch*patch) x d).
TokenMatrix patch_embed_img(const ImgInput& x, std::size_t patch, const Matrix& phi);

// A = softmax_rows(Z W_q (Z W_k)^T / sqrt(d_m)); rows sum to 1.
Matrix attention_matrix(const TokenMatrix& z, const Matrix& w_q, const Matrix& w_k);

// One block: f(Z) = [Z + A(Z) Z W_v] W_o, applied `layers` times.
Matrix forward(const TokenMatrix& z, const ModelParams& p);

// 0.5 * squared Frobenius distance between two same-shape attention maps.
double attention_loss(const Matrix& a, const Matrix& a_star);

// Mean squared / mean absolute error over all entries.
std::pair<double, double> mse_mae(const Matrix& pred, const Matrix& target);

// One training window: a D x L input slice and its D x H continuation.
struct TSWindow {
    Matrix x;  // D x L
    Matrix y;  // D x H
};

// Forecasting objective over flattened ModelParams. Each window is
// tokenized with the trainable phi_ts, encoded, flattened, and mapped by the
// head to horizon * variable values; the loss is the mean squared error over
// the batch. batch_size = 0 trains full-batch; otherwise eval/grad draw
// batch_size windows (with replacement) from the batch stream of the handle.
class ForecastObjective final : public Objective {
  public:
    ForecastObjective(std::vector<TSWindow> windows, ModelShape shape,
                      std::size_t batch_size = 0);

    std::size_t dim() const override { return shape_.param_dim(); }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;

    const ModelShape& shape() const { return shape_; }
    std::size_t window_count() const { return windows_.size(); }
    // Per-window prediction reshaped to D x H, for metric reporting.
    Matrix predict(const ParamVector& w, std::size_t window) const;
    const Matrix& target(std::size_t window) const;
    // Last-block encoder output / attention map on one window, for
    // diagnostics snapshots.
    Matrix representation(const ParamVector& w, std::size_t window = 0) const;
    Matrix attention(const ParamVector& w, std::size_t window = 0) const;

  private:
    std::vector<std::size_t> batch_indices(const BatchHandle& batch) const;

    std::vector<TSWindow> windows_;
    std::vector<Matrix> patches_;  // per window: N x patch_len
    ModelShape shape_;
    std::size_t batch_size_;
    std::size_t horizon_;
    std::size_t vars_;
};

// Attention-alignment objective: frozen token windows, targets produced by a
// hidden teacher (W_q*, W_k*) drawn from the teacher stream of teacher_seed.
// Parameters are one block's W_q and W_k (flattened, W_q first); the loss is
// the mean over windows of attention_loss against the teacher's map, so the
// optimum value 0 is attainable.
class AttentionAlignObjective final : public Objective {
  public:
    AttentionAlignObjective(std::vector<TokenMatrix> tokens, std::size_t d_m,
                            std::uint64_t teacher_seed);

    std::size_t dim() const override { return 2 * d_ * d_m_; }
    double eval(const ParamVector& w, const BatchHandle& batch = {}) const override;
    ParamVector grad(const ParamVector& w, const BatchHandle& batch = {}) const override;

    std::size_t window_count() const { return tokens_.size(); }
    const Matrix& target(std::size_t window) const;
    ParamVector teacher_params() const;
    Matrix attention(const ParamVector& w, std::size_t window = 0) const;

  private:
    std::pair<Matrix, Matrix> split(const ParamVector& w) const;

    std::vector<TokenMatrix> tokens_;
    std::vector<Matrix> targets_;
    ParamVector teacher_;
    std::size_t d_;
    std::size_t d_m_;
};

}  // namespace eeo
