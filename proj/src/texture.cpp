#include "ctscene/texture.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ctscene/io.hpp"
#include "ctscene/rng.hpp"

namespace ctscene {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd randn_matrix(std::mt19937_64& rng, int rows, int cols, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = n(rng);
    }
    return m;
}

}  // namespace

MultiResGrid MultiResGrid::create(std::vector<int> resolutions, int feature_width, uint64_t seed) {
    if (resolutions.empty() || feature_width < 1) {
        throw std::invalid_argument("MultiResGrid: need levels and a positive feature width");
    }
    for (size_t i = 0; i < resolutions.size(); ++i) {
        if (resolutions[i] < 2) {
            throw std::invalid_argument("MultiResGrid: level resolution must be >= 2");
        }
        if (i > 0 && resolutions[i] <= resolutions[i - 1]) {
            throw std::invalid_argument("MultiResGrid: resolutions must increase");
        }
    }
    MultiResGrid g;
    g.feature_width = feature_width;
    g.level_res = std::move(resolutions);
    auto rng = rng_stream(seed, "texture-grid");
    for (int r : g.level_res) {
        g.levels.push_back(randn_matrix(rng, r * r, feature_width, 0.1));
    }
    return g;
}

Eigen::VectorXd layer_norm(const Eigen::VectorXd& z, double eps) {
    double mu = z.mean();
    double var = (z.array() - mu).square().mean();
    return (z.array() - mu) / std::sqrt(var + eps);
}

Eigen::VectorXd layer_norm_vjp(const Eigen::VectorXd& z, const Eigen::VectorXd& upstream,
                               double eps) {
    if (z.size() != upstream.size()) {
        throw std::invalid_argument("layer_norm_vjp: shape mismatch");
    }
    double mu = z.mean();
    double var = (z.array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + eps);
    Eigen::VectorXd y = (z.array() - mu) * inv;
    double mean_up = upstream.mean();
    double mean_up_y = (upstream.array() * y.array()).mean();
    return (inv * (upstream.array() - mean_up - y.array() * mean_up_y)).matrix();
}

namespace {

// bilinear footprint of one query on one level
struct LevelNodes {
    int idx[4];
    double w[4];
};

struct EmbedTrace {
    Eigen::VectorXd z;  // pre-norm concatenation
    Eigen::VectorXd y;  // normalized
    std::vector<LevelNodes> nodes;
};

EmbedTrace embed(const MultiResGrid& grid, double u, double v) {
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
        log_warn("query_embedding: uv outside [0,1]^2, clamping");
        u = std::clamp(u, 0.0, 1.0);
        v = std::clamp(v, 0.0, 1.0);
    }
    const int F = grid.feature_width;
    EmbedTrace t;
    t.z.resize(grid.embedding_dim());
    t.nodes.resize(grid.num_levels());
    for (int l = 0; l < grid.num_levels(); ++l) {
        const int r = grid.level_res[l];
        double gx = u * (r - 1);
        double gy = v * (r - 1);
        int ix = std::min(static_cast<int>(gx), r - 2);
        int iy = std::min(static_cast<int>(gy), r - 2);
        double fx = gx - ix;
        double fy = gy - iy;
        LevelNodes& n = t.nodes[l];
        n.idx[0] = iy * r + ix;
        n.idx[1] = iy * r + ix + 1;
        n.idx[2] = (iy + 1) * r + ix;
        n.idx[3] = (iy + 1) * r + ix + 1;
        n.w[0] = (1 - fx) * (1 - fy);
        n.w[1] = fx * (1 - fy);
        n.w[2] = (1 - fx) * fy;
        n.w[3] = fx * fy;
        Eigen::VectorXd feat = Eigen::VectorXd::Zero(F);
        for (int k = 0; k < 4; ++k) {
            feat += n.w[k] * grid.levels[l].row(n.idx[k]).transpose();
        }
        t.z.segment(l * F, F) = feat;
    }
    t.y = layer_norm(t.z);
    return t;
}

void scatter_embed(const MultiResGrid& grid, const EmbedTrace& t, const Eigen::VectorXd& d_y,
                   std::vector<Eigen::MatrixXd>& level_grads) {
    Eigen::VectorXd d_z = layer_norm_vjp(t.z, d_y);
    const int F = grid.feature_width;
    for (int l = 0; l < grid.num_levels(); ++l) {
        const LevelNodes& n = t.nodes[l];
        for (int k = 0; k < 4; ++k) {
            level_grads[l].row(n.idx[k]) += n.w[k] * d_z.segment(l * F, F).transpose();
        }
    }
}

}  // namespace

Eigen::VectorXd query_embedding(const MultiResGrid& grid, double u, double v) {
    return embed(grid, u, v).y;
}

DecoderParams DecoderParams::create(int dim, int heads, uint64_t seed) {
    if (dim < 1 || heads < 1 || dim % heads != 0) {
        throw std::invalid_argument("DecoderParams: dim must be a positive multiple of heads");
    }
    auto rng = rng_stream(seed, "texture-decoder");
    DecoderParams p;
    p.heads = heads;
    p.ln_gain = Eigen::VectorXd::Ones(dim);
    p.ln_bias = Eigen::VectorXd::Zero(dim);
    double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    p.w_q = randn_matrix(rng, dim, dim, scale);
    p.w_k = randn_matrix(rng, dim, dim, scale);
    p.w_v = randn_matrix(rng, dim, dim, scale);
    p.w_o = randn_matrix(rng, dim, dim, scale);
    p.w_rgb = randn_matrix(rng, dim, 3, scale);
    p.b_rgb = Eigen::Vector3d::Zero();
    return p;
}

AnchorSet AnchorSet::stratified(const std::vector<std::pair<int, int>>& keys, int per_bucket,
                                uint64_t seed) {
    if (per_bucket < 1) {
        throw std::invalid_argument("AnchorSet: per_bucket must be >= 1");
    }
    AnchorSet set;
    for (const auto& key : keys) {
        auto rng = rng_stream(seed ^ fnv1a64("anchors"),
                              std::to_string(key.first) + ":" + std::to_string(key.second));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(per_bucket))));
        Bucket bucket;
        for (int j = 0; j < g && static_cast<int>(bucket.uvs.size()) < per_bucket; ++j) {
            for (int i = 0; i < g && static_cast<int>(bucket.uvs.size()) < per_bucket; ++i) {
                bucket.uvs.push_back({(i + u01(rng)) / g, (j + u01(rng)) / g});
            }
        }
        set.buckets[key] = std::move(bucket);
    }
    return set;
}

const AnchorSet::Bucket* AnchorSet::find(int instance, int normal_group) const {
    auto it = buckets.find({instance, normal_group});
    return it == buckets.end() ? nullptr : &it->second;
}

int normal_group_of(const Eigen::Vector3d& n) {
    int axis = 0;
    double best = std::abs(n.x());
    if (std::abs(n.y()) > best) {
        axis = 1;
        best = std::abs(n.y());
    }
    if (std::abs(n.z()) > best) {
        axis = 2;
    }
    return 2 * axis + (n[axis] >= 0.0 ? 0 : 1);
}

namespace {

struct BucketTrace {
    std::vector<EmbedTrace> anchor_emb;
    Eigen::MatrixXd Ea;  // n_a x D, affine embeddings
    Eigen::MatrixXd K;   // n_a x D
    Eigen::MatrixXd V;   // n_a x D
};

BucketTrace project_bucket(const MultiResGrid& grid, const DecoderParams& params,
                           const AnchorSet::Bucket& bucket) {
    BucketTrace t;
    const int n = static_cast<int>(bucket.uvs.size());
    const int D = params.dim();
    t.anchor_emb.reserve(n);
    t.Ea.resize(n, D);
    for (int i = 0; i < n; ++i) {
        t.anchor_emb.push_back(embed(grid, bucket.uvs[i][0], bucket.uvs[i][1]));
        t.Ea.row(i) = (params.ln_gain.array() * t.anchor_emb.back().y.array() +
                       params.ln_bias.array())
                          .matrix()
                          .transpose();
    }
    t.K = t.Ea * params.w_k;
    t.V = t.Ea * params.w_v;
    return t;
}

struct AttentionTrace {
    Eigen::VectorXd q;                       // D
    std::vector<Eigen::VectorXd> attn;       // per head
    Eigen::VectorXd attn_out;                // D
    Eigen::VectorXd o;                       // D
    Eigen::Vector3d rgb;
};

AttentionTrace attend(const DecoderParams& params, const Eigen::VectorXd& e,
                      const Eigen::MatrixXd& K, const Eigen::MatrixXd& V) {
    const int H = params.heads;
    const int dh = params.head_dim();
    AttentionTrace t;
    t.q = params.w_q.transpose() * e;
    t.attn.resize(H);
    t.attn_out.resize(params.dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < H; ++h) {
        Eigen::VectorXd scores = K.middleCols(h * dh, dh) * t.q.segment(h * dh, dh) * scale;
        scores.array() -= scores.maxCoeff();
        Eigen::VectorXd w = scores.array().exp();
        w /= w.sum();
        t.attn[h] = w;
        t.attn_out.segment(h * dh, dh) = V.middleCols(h * dh, dh).transpose() * w;
    }
    t.o = params.w_o.transpose() * t.attn_out;
    Eigen::Vector3d pre = params.w_rgb.transpose() * t.o + params.b_rgb;
    t.rgb = {sigmoid(pre.x()), sigmoid(pre.y()), sigmoid(pre.z())};
    return t;
}

// gradient of one decoded sample; d_e_query and d_K/d_V accumulate outside
void attend_backward(const DecoderParams& params, const Eigen::VectorXd& e,
                     const Eigen::MatrixXd& K, const Eigen::MatrixXd& V, const AttentionTrace& t,
                     const Eigen::Vector3d& d_rgb, TextureGrads& g, Eigen::VectorXd& d_e_query,
                     Eigen::MatrixXd& d_K, Eigen::MatrixXd& d_V) {
    const int H = params.heads;
    const int dh = params.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::Vector3d d_pre =
        d_rgb.array() * t.rgb.array() * (1.0 - t.rgb.array());
    g.w_rgb += t.o * d_pre.transpose();
    g.b_rgb += d_pre;
    Eigen::VectorXd d_o = params.w_rgb * d_pre;

    g.w_o += t.attn_out * d_o.transpose();
    Eigen::VectorXd d_attn_out = params.w_o * d_o;

    Eigen::VectorXd d_q = Eigen::VectorXd::Zero(params.dim());
    for (int h = 0; h < H; ++h) {
        Eigen::VectorXd d_out_h = d_attn_out.segment(h * dh, dh);
        const auto K_h = K.middleCols(h * dh, dh);
        const auto V_h = V.middleCols(h * dh, dh);
        const Eigen::VectorXd& w = t.attn[h];

        Eigen::VectorXd d_attn = V_h * d_out_h;
        d_V.middleCols(h * dh, dh) += w * d_out_h.transpose();
        double dot = w.dot(d_attn);
        Eigen::VectorXd d_scores = (w.array() * (d_attn.array() - dot)).matrix();
        d_q.segment(h * dh, dh) = K_h.transpose() * d_scores * scale;
        d_K.middleCols(h * dh, dh) += d_scores * t.q.segment(h * dh, dh).transpose() * scale;
    }
    g.w_q += e * d_q.transpose();
    d_e_query += params.w_q * d_q;
}

}  // namespace

DecodeDetail decode_rgb_detail(const MultiResGrid& grid, const DecoderParams& params,
                               const Eigen::VectorXd& q_embedding,
                               const AnchorSet::Bucket* bucket) {
    if (q_embedding.size() != params.dim() || grid.embedding_dim() != params.dim()) {
        throw std::invalid_argument("decode_rgb: embedding width mismatch");
    }
    Eigen::VectorXd e =
        (params.ln_gain.array() * q_embedding.array() + params.ln_bias.array()).matrix();

    DecodeDetail out;
    Eigen::MatrixXd K, V;
    if (bucket == nullptr || bucket->uvs.empty()) {
        // no anchors to attend to: the query is its own reference
        log_warn("decode_rgb: empty anchor bucket, falling back to the query itself");
        out.used_fallback = true;
        Eigen::MatrixXd Ea = e.transpose();
        K = Ea * params.w_k;
        V = Ea * params.w_v;
    } else {
        BucketTrace bt = project_bucket(grid, params, *bucket);
        K = std::move(bt.K);
        V = std::move(bt.V);
    }
    AttentionTrace t = attend(params, e, K, V);
    out.rgb = t.rgb;
    out.attn_out = t.attn_out;
    out.attn_weights = t.attn;
    return out;
}

Eigen::Vector3d decode_rgb(const MultiResGrid& grid, const DecoderParams& params,
                           const Eigen::VectorXd& q_embedding, const AnchorSet::Bucket* bucket) {
    return decode_rgb_detail(grid, params, q_embedding, bucket).rgb;
}

Eigen::MatrixXd render_patch(const MultiResGrid& grid, const DecoderParams& params,
                             const std::vector<UvSample>& samples, const AnchorSet& anchors) {
    Eigen::MatrixXd out(samples.size(), 3);
    std::map<std::pair<int, int>, BucketTrace> cache;
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const AnchorSet::Bucket* bucket = anchors.find(s.instance, s.normal_group);
        EmbedTrace emb = embed(grid, s.u, s.v);
        if (bucket == nullptr || bucket->uvs.empty()) {
            out.row(i) = decode_rgb(grid, params, emb.y, nullptr).transpose();
            continue;
        }
        auto key = std::make_pair(s.instance, s.normal_group);
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, project_bucket(grid, params, *bucket)).first;
        }
        Eigen::VectorXd e =
            (params.ln_gain.array() * emb.y.array() + params.ln_bias.array()).matrix();
        out.row(i) = attend(params, e, it->second.K, it->second.V).rgb.transpose();
    }
    return out;
}

TextureGrads TextureGrads::zeros_like(const MultiResGrid& grid, const DecoderParams& params) {
    TextureGrads g;
    for (const auto& level : grid.levels) {
        g.levels.push_back(Eigen::MatrixXd::Zero(level.rows(), level.cols()));
    }
    int D = params.dim();
    g.ln_gain = Eigen::VectorXd::Zero(D);
    g.ln_bias = Eigen::VectorXd::Zero(D);
    g.w_q = Eigen::MatrixXd::Zero(D, D);
    g.w_k = Eigen::MatrixXd::Zero(D, D);
    g.w_v = Eigen::MatrixXd::Zero(D, D);
    g.w_o = Eigen::MatrixXd::Zero(D, D);
    g.w_rgb = Eigen::MatrixXd::Zero(D, 3);
    g.b_rgb = Eigen::Vector3d::Zero();
    return g;
}

TextureGrads texture_backward(const MultiResGrid& grid, const DecoderParams& params,
                              const std::vector<UvSample>& samples, const AnchorSet& anchors,
                              const Eigen::MatrixXd& upstream) {
    if (upstream.rows() != static_cast<Eigen::Index>(samples.size()) || upstream.cols() != 3) {
        throw std::invalid_argument("texture_backward: upstream must be n x 3");
    }
    TextureGrads g = TextureGrads::zeros_like(grid, params);

    // shared anchor projections with accumulated adjoints per bucket
    struct BucketState {
        BucketTrace trace;
        Eigen::MatrixXd d_K, d_V;
    };
    std::map<std::pair<int, int>, BucketState> buckets;

    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const AnchorSet::Bucket* bucket = anchors.find(s.instance, s.normal_group);
        EmbedTrace emb = embed(grid, s.u, s.v);
        Eigen::VectorXd e =
            (params.ln_gain.array() * emb.y.array() + params.ln_bias.array()).matrix();
        Eigen::Vector3d d_rgb = upstream.row(i).transpose();

        Eigen::VectorXd d_e = Eigen::VectorXd::Zero(params.dim());
        if (bucket == nullptr || bucket->uvs.empty()) {
            // fallback: the sample is its own single anchor
            Eigen::MatrixXd Ea = e.transpose();
            Eigen::MatrixXd K = Ea * params.w_k;
            Eigen::MatrixXd V = Ea * params.w_v;
            AttentionTrace t = attend(params, e, K, V);
            Eigen::MatrixXd d_K = Eigen::MatrixXd::Zero(1, params.dim());
            Eigen::MatrixXd d_V = Eigen::MatrixXd::Zero(1, params.dim());
            attend_backward(params, e, K, V, t, d_rgb, g, d_e, d_K, d_V);
            g.w_k += e * d_K.row(0);
            g.w_v += e * d_V.row(0);
            d_e += params.w_k * d_K.row(0).transpose() + params.w_v * d_V.row(0).transpose();
        } else {
            auto key = std::make_pair(s.instance, s.normal_group);
            auto it = buckets.find(key);
            if (it == buckets.end()) {
                BucketState st;
                st.trace = project_bucket(grid, params, *bucket);
                st.d_K = Eigen::MatrixXd::Zero(st.trace.K.rows(), st.trace.K.cols());
                st.d_V = Eigen::MatrixXd::Zero(st.trace.V.rows(), st.trace.V.cols());
                it = buckets.emplace(key, std::move(st)).first;
            }
            auto& st = it->second;
            AttentionTrace t = attend(params, e, st.trace.K, st.trace.V);
            attend_backward(params, e, st.trace.K, st.trace.V, t, d_rgb, g, d_e, st.d_K, st.d_V);
        }

        // affine + layer norm + bilinear for the query
        g.ln_gain += (emb.y.array() * d_e.array()).matrix();
        g.ln_bias += d_e;
        Eigen::VectorXd d_y = (params.ln_gain.array() * d_e.array()).matrix();
        scatter_embed(grid, emb, d_y, g.levels);
    }

    // anchor adjoints, once per bucket
    for (auto& [key, st] : buckets) {
        g.w_k += st.trace.Ea.transpose() * st.d_K;
        g.w_v += st.trace.Ea.transpose() * st.d_V;
        Eigen::MatrixXd d_Ea =
            st.d_K * params.w_k.transpose() + st.d_V * params.w_v.transpose();
        for (Eigen::Index i = 0; i < d_Ea.rows(); ++i) {
            Eigen::VectorXd d_e = d_Ea.row(i).transpose();
            const EmbedTrace& emb = st.trace.anchor_emb[i];
            g.ln_gain += (emb.y.array() * d_e.array()).matrix();
            g.ln_bias += d_e;
            Eigen::VectorXd d_y = (params.ln_gain.array() * d_e.array()).matrix();
            scatter_embed(grid, emb, d_y, g.levels);
        }
    }
    return g;
}

std::vector<double> fit_to_target(MultiResGrid& grid, DecoderParams& params,
                                  const std::vector<UvSample>& samples, const AnchorSet& anchors,
                                  const Eigen::MatrixXd& target, int steps, double lr) {
    if (target.rows() != static_cast<Eigen::Index>(samples.size()) || target.cols() != 3) {
        throw std::invalid_argument("fit_to_target: target must be n x 3");
    }
    if (!target.allFinite()) {
        throw std::invalid_argument("fit_to_target: target must be finite");
    }
    const double denom = static_cast<double>(target.size());
    std::vector<double> curve;
    curve.reserve(steps);
    for (int step = 0; step < steps; ++step) {
        Eigen::MatrixXd rendered = render_patch(grid, params, samples, anchors);
        Eigen::MatrixXd diff = rendered - target;
        double loss = diff.squaredNorm() / denom;
        curve.push_back(loss);
        if (!std::isfinite(loss) || loss > 1e12) {
            break;  // diverged; hand back the curve so far
        }
        Eigen::MatrixXd upstream = (2.0 / denom) * diff;
        TextureGrads g = texture_backward(grid, params, samples, anchors, upstream);
        for (int l = 0; l < grid.num_levels(); ++l) grid.levels[l] -= lr * g.levels[l];
        params.ln_gain -= lr * g.ln_gain;
        params.ln_bias -= lr * g.ln_bias;
        params.w_q -= lr * g.w_q;
        params.w_k -= lr * g.w_k;
        params.w_v -= lr * g.w_v;
        params.w_o -= lr * g.w_o;
        params.w_rgb -= lr * g.w_rgb;
        params.b_rgb -= lr * g.b_rgb;
    }
    return curve;
}

namespace {

void write_block(std::ofstream& out, const double* data, size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_block(std::ifstream& in, double* data, size_t count) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
    if (!in) {
        throw std::runtime_error("texture container: truncated payload");
    }
}

}  // namespace

void save_texture(const std::filesystem::path& path, const MultiResGrid& grid,
                  const DecoderParams& params) {
    nlohmann::json header{
        {"magic", "CTSTEX"},
        {"version", 1},
        {"feature_width", grid.feature_width},
        {"level_res", grid.level_res},
        {"heads", params.heads},
        {"dim", params.dim()},
    };
    std::string head = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open texture container for writing: " + path.string());
    }
    uint32_t len = static_cast<uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& level : grid.levels) write_block(out, level.data(), level.size());
    write_block(out, params.ln_gain.data(), params.ln_gain.size());
    write_block(out, params.ln_bias.data(), params.ln_bias.size());
    for (const auto* m : {&params.w_q, &params.w_k, &params.w_v, &params.w_o, &params.w_rgb}) {
        write_block(out, m->data(), m->size());
    }
    write_block(out, params.b_rgb.data(), 3);
}

std::pair<MultiResGrid, DecoderParams> load_texture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open texture container: " + path.string());
    }
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string head(len, '\0');
    in.read(head.data(), len);
    if (!in) {
        throw std::runtime_error("texture container: truncated header");
    }
    nlohmann::json header = nlohmann::json::parse(head);
    if (header.value("magic", "") != "CTSTEX") {
        throw std::runtime_error("texture container: bad magic");
    }
    MultiResGrid grid;
    grid.feature_width = header.at("feature_width").get<int>();
    grid.level_res = header.at("level_res").get<std::vector<int>>();
    for (int r : grid.level_res) {
        grid.levels.emplace_back(r * r, grid.feature_width);
        read_block(in, grid.levels.back().data(), grid.levels.back().size());
    }
    int dim = header.at("dim").get<int>();
    DecoderParams p;
    p.heads = header.at("heads").get<int>();
    p.ln_gain.resize(dim);
    p.ln_bias.resize(dim);
    p.w_q.resize(dim, dim);
    p.w_k.resize(dim, dim);
    p.w_v.resize(dim, dim);
    p.w_o.resize(dim, dim);
    p.w_rgb.resize(dim, 3);
    read_block(in, p.ln_gain.data(), p.ln_gain.size());
    read_block(in, p.ln_bias.data(), p.ln_bias.size());
    for (auto* m : {&p.w_q, &p.w_k, &p.w_v, &p.w_o, &p.w_rgb}) {
        read_block(in, m->data(), m->size());
    }
    read_block(in, p.b_rgb.data(), 3);
    return {std::move(grid), std::move(p)};
}

TextureRenderer::TextureRenderer(MultiResGrid grid_shape, DecoderParams param_shape,
                                 std::vector<UvSample> samples, AnchorSet anchors)
    : grid_shape_(std::move(grid_shape)),
      param_shape_(std::move(param_shape)),
      samples_(std::move(samples)),
      anchors_(std::move(anchors)) {
    if (samples_.empty()) {
        throw std::invalid_argument("TextureRenderer: need at least one sample");
    }
}

int TextureRenderer::theta_dim() const {
    int n = 0;
    for (const auto& level : grid_shape_.levels) n += static_cast<int>(level.size());
    int D = param_shape_.dim();
    n += 2 * D + 4 * D * D + 3 * D + 3;
    return n;
}

Vec TextureRenderer::flatten(const MultiResGrid& grid, const DecoderParams& params) const {
    Vec theta(theta_dim());
    int at = 0;
    auto put = [&](const double* data, int count) {
        theta.segment(at, count) = Eigen::Map<const Vec>(data, count);
        at += count;
    };
    for (const auto& level : grid.levels) put(level.data(), static_cast<int>(level.size()));
    put(params.ln_gain.data(), static_cast<int>(params.ln_gain.size()));
    put(params.ln_bias.data(), static_cast<int>(params.ln_bias.size()));
    for (const auto* m : {&params.w_q, &params.w_k, &params.w_v, &params.w_o, &params.w_rgb}) {
        put(m->data(), static_cast<int>(m->size()));
    }
    put(params.b_rgb.data(), 3);
    return theta;
}

std::pair<MultiResGrid, DecoderParams> TextureRenderer::unflatten(const Vec& theta) const {
    if (theta.size() != theta_dim()) {
        throw std::invalid_argument("TextureRenderer: theta dimension mismatch");
    }
    MultiResGrid grid = grid_shape_;
    DecoderParams params = param_shape_;
    int at = 0;
    auto take = [&](double* data, int count) {
        Eigen::Map<Vec>(data, count) = theta.segment(at, count);
        at += count;
    };
    for (auto& level : grid.levels) take(level.data(), static_cast<int>(level.size()));
    take(params.ln_gain.data(), static_cast<int>(params.ln_gain.size()));
    take(params.ln_bias.data(), static_cast<int>(params.ln_bias.size()));
    for (auto* m : {&params.w_q, &params.w_k, &params.w_v, &params.w_o, &params.w_rgb}) {
        take(m->data(), static_cast<int>(m->size()));
    }
    take(params.b_rgb.data(), 3);
    return {std::move(grid), std::move(params)};
}

Vec TextureRenderer::render(const Vec& theta, const Pose&) const {
    auto [grid, params] = unflatten(theta);
    Eigen::MatrixXd patch = render_patch(grid, params, samples_, anchors_);
    return Eigen::Map<Vec>(patch.data(), patch.size());
}

Vec TextureRenderer::vjp(const Vec& theta, const Pose&, const Vec& grad_image) const {
    if (grad_image.size() != image_dim()) {
        throw std::invalid_argument("TextureRenderer: image gradient dimension mismatch");
    }
    auto [grid, params] = unflatten(theta);
    Eigen::MatrixXd upstream =
        Eigen::Map<const Eigen::MatrixXd>(grad_image.data(), samples_.size(), 3);
    TextureGrads g = texture_backward(grid, params, samples_, anchors_, upstream);

    Vec flat(theta_dim());
    int at = 0;
    auto put = [&](const double* data, int count) {
        flat.segment(at, count) = Eigen::Map<const Vec>(data, count);
        at += count;
    };
    for (const auto& level : g.levels) put(level.data(), static_cast<int>(level.size()));
    put(g.ln_gain.data(), static_cast<int>(g.ln_gain.size()));
    put(g.ln_bias.data(), static_cast<int>(g.ln_bias.size()));
    for (const auto* m : {&g.w_q, &g.w_k, &g.w_v, &g.w_o, &g.w_rgb}) {
        put(m->data(), static_cast<int>(m->size()));
    }
    put(g.b_rgb.data(), 3);
    return flat;
}

}  // namespace ctscene
