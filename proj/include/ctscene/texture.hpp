#pragma once

#include <filesystem>
#include <map>

#include "ctscene/optimizer.hpp"

namespace ctscene {

// Multiresolution feature lattice over UV in [0,1]^2.  A query interpolates
// each level bilinearly and concatenates the results.
struct MultiResGrid {
    int feature_width = 8;
    std::vector<int> level_res;           // r_1 < ... < r_L, each >= 2
    std::vector<Eigen::MatrixXd> levels;  // (r*r) x F, node (ix, iy) at row iy*r + ix

    static MultiResGrid create(std::vector<int> resolutions, int feature_width, uint64_t seed);

    int num_levels() const { return static_cast<int>(level_res.size()); }
    int embedding_dim() const { return feature_width * num_levels(); }
};

// plain layer norm (no affine): y = (z - mean) / sqrt(var + eps)
Eigen::VectorXd layer_norm(const Eigen::VectorXd& z, double eps = 1e-5);
Eigen::VectorXd layer_norm_vjp(const Eigen::VectorXd& z, const Eigen::VectorXd& upstream,
                               double eps = 1e-5);

// Concatenated multilevel bilinear lookup, normalized; the affine part of the
// layer norm lives in DecoderParams.  Out-of-range coordinates clamp with a
// warning.
Eigen::VectorXd query_embedding(const MultiResGrid& grid, double u, double v);

struct DecoderParams {
    int heads = 4;
    Eigen::VectorXd ln_gain, ln_bias;    // D
    Eigen::MatrixXd w_q, w_k, w_v, w_o;  // D x D, split evenly across heads
    Eigen::MatrixXd w_rgb;               // D x 3
    Eigen::Vector3d b_rgb;

    static DecoderParams create(int dim, int heads, uint64_t seed);
    int dim() const { return static_cast<int>(ln_gain.size()); }
    int head_dim() const { return dim() / heads; }
};

// Anchors are pre-sampled UV positions bucketed by (instance, normal group);
// their embeddings are derived from the current grid on every pass.
struct AnchorSet {
    struct Bucket {
        std::vector<std::array<double, 2>> uvs;
    };
    std::map<std::pair<int, int>, Bucket> buckets;

    static AnchorSet stratified(const std::vector<std::pair<int, int>>& keys, int per_bucket,
                                uint64_t seed);
    const Bucket* find(int instance, int normal_group) const;
};

struct UvSample {
    double u;
    double v;
    int instance = 0;
    int normal_group = 0;
};

// quantized face normal -> one of six axis-aligned groups
int normal_group_of(const Eigen::Vector3d& n);

struct DecodeDetail {
    Eigen::Vector3d rgb;
    Eigen::VectorXd attn_out;                      // concatenated head outputs, pre W_o
    std::vector<Eigen::VectorXd> attn_weights;     // per head, rows sum to 1
    bool used_fallback = false;                    // empty bucket: query attends to itself
};

// Cross-attention decode of one embedding against its bucket's anchors:
// Q from the query, K/V from the anchors, concatenated heads, output
// projection, then a logistic squash onto [0,1]^3.
Eigen::Vector3d decode_rgb(const MultiResGrid& grid, const DecoderParams& params,
                           const Eigen::VectorXd& q_embedding, const AnchorSet::Bucket* bucket);
DecodeDetail decode_rgb_detail(const MultiResGrid& grid, const DecoderParams& params,
                               const Eigen::VectorXd& q_embedding,
                               const AnchorSet::Bucket* bucket);

// Batched decode: anchor projections are shared per bucket, samples keep
// their input order.
Eigen::MatrixXd render_patch(const MultiResGrid& grid, const DecoderParams& params,
                             const std::vector<UvSample>& samples, const AnchorSet& anchors);

struct TextureGrads {
    std::vector<Eigen::MatrixXd> levels;
    Eigen::VectorXd ln_gain, ln_bias;
    Eigen::MatrixXd w_q, w_k, w_v, w_o, w_rgb;
    Eigen::Vector3d b_rgb;

    static TextureGrads zeros_like(const MultiResGrid& grid, const DecoderParams& params);
};

// Analytic gradients through linear -> attention -> layer norm -> bilinear,
// including the anchor-embedding paths into the grid.  `upstream` is n x 3,
// matching a render_patch output on the same inputs.
TextureGrads texture_backward(const MultiResGrid& grid, const DecoderParams& params,
                              const std::vector<UvSample>& samples, const AnchorSet& anchors,
                              const Eigen::MatrixXd& upstream);

// Plain gradient descent on mean squared error against per-sample targets;
// returns the loss curve (aborts early on divergence).
std::vector<double> fit_to_target(MultiResGrid& grid, DecoderParams& params,
                                  const std::vector<UvSample>& samples, const AnchorSet& anchors,
                                  const Eigen::MatrixXd& target, int steps, double lr);

// Single-container serialization: JSON header (shapes) + raw float64 payload.
void save_texture(const std::filesystem::path& path, const MultiResGrid& grid,
                  const DecoderParams& params);
std::pair<MultiResGrid, DecoderParams> load_texture(const std::filesystem::path& path);

// Adapter driving the texture parameters through the CTS optimizer: theta is
// the flat concatenation of all grid levels (row-major) followed by the
// decoder parameters, and the rendered image is the flattened n x 3 patch.
class TextureRenderer : public Renderer {
  public:
    TextureRenderer(MultiResGrid grid_shape, DecoderParams param_shape,
                    std::vector<UvSample> samples, AnchorSet anchors);

    Vec render(const Vec& theta, const Pose& pose) const override;
    Vec vjp(const Vec& theta, const Pose& pose, const Vec& grad_image) const override;

    int theta_dim() const;
    int image_dim() const { return static_cast<int>(samples_.size()) * 3; }

    Vec flatten(const MultiResGrid& grid, const DecoderParams& params) const;
    std::pair<MultiResGrid, DecoderParams> unflatten(const Vec& theta) const;

  private:
    MultiResGrid grid_shape_;
    DecoderParams param_shape_;
    std::vector<UvSample> samples_;
    AnchorSet anchors_;
};

}  // namespace ctscene
