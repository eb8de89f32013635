#include "evla/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "evla/rng.hpp"

namespace evla {

// ---------------------------------------------------------------------------
// config

void AdapterConfig::validate() const {
    if (patch_size < 1) throw InvalidConfig("patch_size must be >= 1");
    if (image_dim < 1 || event_dim < 1) throw InvalidConfig("dims must be >= 1");
    if (event_blocks < 0) throw InvalidConfig("event_blocks must be >= 0");
    if (image_branch_blocks < 1) throw InvalidConfig("image_branch_blocks must be >= 1");
    if (fusion_hidden < 1) throw InvalidConfig("fusion_hidden must be >= 1");
    if (mlp_ratio < 1) throw InvalidConfig("mlp_ratio must be >= 1");
    if (static_cast<int>(fusion_layers.size()) != event_blocks) {
        throw InvalidConfig("fusion_layers count must equal event_blocks");
    }
    for (std::size_t i = 0; i < fusion_layers.size(); ++i) {
        if (fusion_layers[i] < 1 || fusion_layers[i] > image_branch_blocks) {
            throw InvalidConfig("fusion layer index out of range");
        }
        if (i > 0 && fusion_layers[i] <= fusion_layers[i - 1]) {
            throw InvalidConfig("fusion_layers must be strictly increasing");
        }
    }
    if (event_blocks > 0 && image_branch_blocks % event_blocks != 0) {
        throw InvalidConfig("image_branch_blocks must be divisible by event_blocks");
    }
    if (image_dim % image_heads != 0) throw InvalidConfig("image_dim must divide by image_heads");
    if (event_dim % event_heads != 0) throw InvalidConfig("event_dim must divide by event_heads");
}

AdapterConfig AdapterConfig::toy(bool linear) {
    AdapterConfig c;
    c.patch_size = 16;
    c.image_dim = 16;
    c.event_dim = 8;
    c.event_blocks = 4;
    c.fusion_layers = {1, 2, 3, 4};
    c.fusion_hidden = 16;
    c.image_branch_blocks = 4;
    c.image_heads = 2;
    c.event_heads = 2;
    c.mlp_ratio = 4;
    c.linear_only = linear;
    return c;
}

// ---------------------------------------------------------------------------
// parameter registry

namespace {

void add_block_specs(std::vector<TensorSpec>& specs, const std::string& prefix, int dim,
                     int mlp_ratio) {
    const int m = dim * mlp_ratio;
    specs.push_back({prefix + ".ln1.gamma", {dim}, 0, 0});
    specs.push_back({prefix + ".ln1.beta", {dim}, 0, 0});
    specs.push_back({prefix + ".attn.qkv.weight", {3 * dim, dim}, 0, 0});
    specs.push_back({prefix + ".attn.qkv.bias", {3 * dim}, 0, 0});
    specs.push_back({prefix + ".attn.out.weight", {dim, dim}, 0, 0});
    specs.push_back({prefix + ".attn.out.bias", {dim}, 0, 0});
    specs.push_back({prefix + ".ln2.gamma", {dim}, 0, 0});
    specs.push_back({prefix + ".ln2.beta", {dim}, 0, 0});
    specs.push_back({prefix + ".mlp.fc1.weight", {m, dim}, 0, 0});
    specs.push_back({prefix + ".mlp.fc1.bias", {m}, 0, 0});
    specs.push_back({prefix + ".mlp.fc2.weight", {dim, m}, 0, 0});
    specs.push_back({prefix + ".mlp.fc2.bias", {dim}, 0, 0});
}

std::vector<TensorSpec> build_specs(const AdapterConfig& c) {
    std::vector<TensorSpec> specs;
    const int patch_in = 3 * c.patch_size * c.patch_size;
    specs.push_back({"patch_embed.weight", {c.image_dim, patch_in}, 0, 0});
    specs.push_back({"patch_embed.bias", {c.image_dim}, 0, 0});
    if (c.event_blocks > 0) {
        specs.push_back({"event_in.weight", {c.event_dim, c.image_dim}, 0, 0});
        specs.push_back({"event_in.bias", {c.event_dim}, 0, 0});
        for (int b = 0; b < c.event_blocks; ++b) {
            add_block_specs(specs, "event.block" + std::to_string(b), c.event_dim, c.mlp_ratio);
        }
        for (int s = 0; s < c.event_blocks; ++s) {
            specs.push_back({"fuse.proj" + std::to_string(s) + ".weight",
                             {c.image_dim, c.event_dim}, 0, 0});
            specs.push_back({"fuse.proj" + std::to_string(s) + ".bias", {c.image_dim}, 0, 0});
        }
        specs.push_back({"fuse.mlp.fc1.weight", {c.fusion_hidden, 2 * c.image_dim}, 0, 0});
        specs.push_back({"fuse.mlp.fc1.bias", {c.fusion_hidden}, 0, 0});
        specs.push_back({"fuse.mlp.fc2.weight", {c.image_dim, c.fusion_hidden}, 0, 0});
        specs.push_back({"fuse.mlp.fc2.bias", {c.image_dim}, 0, 0});
    }
    for (int b = 0; b < c.image_branch_blocks; ++b) {
        add_block_specs(specs, "image.block" + std::to_string(b), c.image_dim, c.mlp_ratio);
    }
    std::size_t offset = 0;
    for (auto& s : specs) {
        std::size_t n = 1;
        for (int d : s.shape) n *= static_cast<std::size_t>(d);
        s.offset = offset;
        s.size = n;
        offset += n;
    }
    return specs;
}

}  // namespace

AdapterParams::AdapterParams(const AdapterConfig& config) : config_(config) {
    config_.validate();
    specs_ = build_specs(config_);
    std::size_t total = 0;
    for (const auto& s : specs_) total += s.size;
    values_.assign(total, 0.0);
}

AdapterParams AdapterParams::initialized(const AdapterConfig& config, std::uint64_t seed,
                                         double init_std) {
    AdapterParams p(config);
    Rng rng(seed);
    for (const auto& s : p.specs_) {
        const bool is_weight = s.name.ends_with(".weight");
        const bool is_gain = s.name.ends_with(".gamma");
        double* dst = p.values_.data() + s.offset;
        if (is_weight) {
            for (std::size_t i = 0; i < s.size; ++i) dst[i] = rng.truncated_normal(init_std);
        } else if (is_gain) {
            std::fill(dst, dst + s.size, 1.0);
        }
        // biases and LayerNorm shifts stay zero
    }
    return p;
}

const TensorSpec& AdapterParams::spec(std::string_view name) const {
    for (const auto& s : specs_) {
        if (s.name == name) return s;
    }
    throw ShapeMismatch(std::string(name));
}

const TensorSpec& AdapterParams::spec_at(std::size_t flat_index) const {
    for (const auto& s : specs_) {
        if (flat_index >= s.offset && flat_index < s.offset + s.size) return s;
    }
    throw ShapeMismatch("flat index " + std::to_string(flat_index));
}

std::span<double> AdapterParams::tensor(std::string_view name) {
    const TensorSpec& s = spec(name);
    return {values_.data() + s.offset, s.size};
}

std::span<const double> AdapterParams::tensor(std::string_view name) const {
    const TensorSpec& s = spec(name);
    return {values_.data() + s.offset, s.size};
}

// ---------------------------------------------------------------------------
// forward/backward machinery

namespace {

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, 0.0) {}
    double* row(int r) { return v.data() + std::size_t(r) * cols; }
    const double* row(int r) const { return v.data() + std::size_t(r) * cols; }
};

// y = x W^T + b, W is [out, in] row-major
Mat linear(const Mat& x, std::span<const double> w, std::span<const double> b, int out_dim) {
    Mat y(x.rows, out_dim);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* yr = y.row(r);
        for (int o = 0; o < out_dim; ++o) {
            const double* wo = w.data() + std::size_t(o) * x.cols;
            double acc = b.empty() ? 0.0 : b[o];
            for (int i = 0; i < x.cols; ++i) acc += wo[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

// accumulates dW, dB and adds the input gradient into dx
void linear_bwd(const Mat& x, std::span<const double> w, const Mat& dy, Mat& dx,
                std::span<double> dw, std::span<double> db) {
    const int out_dim = dy.cols;
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        for (int o = 0; o < out_dim; ++o) {
            const double g = dyr[o];
            if (!db.empty()) db[o] += g;
            double* dwo = dw.data() + std::size_t(o) * x.cols;
            const double* wo = w.data() + std::size_t(o) * x.cols;
            for (int i = 0; i < x.cols; ++i) {
                dwo[i] += g * xr[i];
                dxr[i] += g * wo[i];
            }
        }
    }
}

struct LnCache {
    std::vector<double> mean;
    std::vector<double> rstd;
};

constexpr double kLnEps = 1e-6;

Mat layernorm(const Mat& x, std::span<const double> gamma, std::span<const double> beta,
              LnCache& cache) {
    Mat y(x.rows, x.cols);
    cache.mean.resize(x.rows);
    cache.rstd.resize(x.rows);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double mu = 0.0;
        for (int i = 0; i < x.cols; ++i) mu += xr[i];
        mu /= x.cols;
        double var = 0.0;
        for (int i = 0; i < x.cols; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= x.cols;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        cache.mean[r] = mu;
        cache.rstd[r] = rstd;
        double* yr = y.row(r);
        for (int i = 0; i < x.cols; ++i) yr[i] = gamma[i] * (xr[i] - mu) * rstd + beta[i];
    }
    return y;
}

void layernorm_bwd(const Mat& x, const LnCache& cache, std::span<const double> gamma,
                   const Mat& dy, Mat& dx, std::span<double> dgamma, std::span<double> dbeta) {
    const int n = x.cols;
    std::vector<double> xhat(n), dxhat(n);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        const double mu = cache.mean[r];
        const double rstd = cache.rstd[r];
        double m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < n; ++i) {
            xhat[i] = (xr[i] - mu) * rstd;
            dxhat[i] = dyr[i] * gamma[i];
            dgamma[i] += dyr[i] * xhat[i];
            dbeta[i] += dyr[i];
            m1 += dxhat[i];
            m2 += dxhat[i] * xhat[i];
        }
        m1 /= n;
        m2 /= n;
        for (int i = 0; i < n; ++i) dxr[i] += rstd * (dxhat[i] - m1 - xhat[i] * m2);
    }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Mat gelu(const Mat& x) {
    Mat y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = gelu(x.v[i]);
    return y;
}

void gelu_bwd(const Mat& x, const Mat& dy, Mat& dx) {
    for (std::size_t i = 0; i < x.v.size(); ++i) dx.v[i] += dy.v[i] * gelu_grad(x.v[i]);
}

// parameter handles for one transformer block
struct BlockRefs {
    std::span<const double> ln1_g, ln1_b, qkv_w, qkv_b, out_w, out_b;
    std::span<const double> ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
};

BlockRefs block_refs(const AdapterParams& p, const std::string& prefix) {
    return BlockRefs{
        p.tensor(prefix + ".ln1.gamma"),       p.tensor(prefix + ".ln1.beta"),
        p.tensor(prefix + ".attn.qkv.weight"), p.tensor(prefix + ".attn.qkv.bias"),
        p.tensor(prefix + ".attn.out.weight"), p.tensor(prefix + ".attn.out.bias"),
        p.tensor(prefix + ".ln2.gamma"),       p.tensor(prefix + ".ln2.beta"),
        p.tensor(prefix + ".mlp.fc1.weight"),  p.tensor(prefix + ".mlp.fc1.bias"),
        p.tensor(prefix + ".mlp.fc2.weight"),  p.tensor(prefix + ".mlp.fc2.bias"),
    };
}

struct BlockGrads {
    std::span<double> ln1_g, ln1_b, qkv_w, qkv_b, out_w, out_b;
    std::span<double> ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
};

BlockGrads block_grads(const AdapterParams& p, std::vector<double>& grad,
                       const std::string& prefix) {
    auto view = [&](const std::string& n) -> std::span<double> {
        const TensorSpec& s = p.spec(n);
        return {grad.data() + s.offset, s.size};
    };
    return BlockGrads{
        view(prefix + ".ln1.gamma"),       view(prefix + ".ln1.beta"),
        view(prefix + ".attn.qkv.weight"), view(prefix + ".attn.qkv.bias"),
        view(prefix + ".attn.out.weight"), view(prefix + ".attn.out.bias"),
        view(prefix + ".ln2.gamma"),       view(prefix + ".ln2.beta"),
        view(prefix + ".mlp.fc1.weight"),  view(prefix + ".mlp.fc1.bias"),
        view(prefix + ".mlp.fc2.weight"),  view(prefix + ".mlp.fc2.bias"),
    };
}

struct BlockCache {
    Mat x;        // block input
    LnCache ln1;
    Mat a;        // LN1 output (or unused in linear mode)
    Mat qkv;      // [N, 3d] (linear mode: value projection only, [N, d])
    std::vector<Mat> attn;  // per-head softmax weights
    Mat ocat;     // concatenated head outputs
    Mat h;        // post-attention residual
    LnCache ln2;
    Mat b2;       // LN2 output
    Mat f1;       // MLP pre-activation
    Mat g;        // MLP activation output
};

// multi-head self-attention over pre-normalized input `a`
Mat mhsa(const Mat& a, const BlockRefs& r, int heads, BlockCache& cache) {
    const int n = a.rows;
    const int d = a.cols;
    const int hd = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    cache.qkv = linear(a, r.qkv_w, r.qkv_b, 3 * d);
    cache.attn.assign(heads, Mat());
    cache.ocat = Mat(n, d);

    for (int h = 0; h < heads; ++h) {
        const int qo = h * hd;
        const int ko = d + h * hd;
        const int vo = 2 * d + h * hd;
        Mat& att = cache.attn[h];
        att = Mat(n, n);
        for (int i = 0; i < n; ++i) {
            const double* qi = cache.qkv.row(i) + qo;
            double* si = att.row(i);
            double mx = -1e300;
            for (int j = 0; j < n; ++j) {
                const double* kj = cache.qkv.row(j) + ko;
                double acc = 0.0;
                for (int k = 0; k < hd; ++k) acc += qi[k] * kj[k];
                si[j] = acc * scale;
                mx = std::max(mx, si[j]);
            }
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                si[j] = std::exp(si[j] - mx);
                sum += si[j];
            }
            for (int j = 0; j < n; ++j) si[j] /= sum;
        }
        for (int i = 0; i < n; ++i) {
            const double* ai = att.row(i);
            double* oi = cache.ocat.row(i) + qo;
            for (int k = 0; k < hd; ++k) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += ai[j] * (cache.qkv.row(j) + vo)[k];
                oi[k] = acc;
            }
        }
    }
    return linear(cache.ocat, r.out_w, r.out_b, d);
}

void mhsa_bwd(const BlockCache& cache, const BlockRefs& r, const BlockGrads& g, int heads,
              const Mat& dout, Mat& da) {
    const int n = cache.a.rows;
    const int d = cache.a.cols;
    const int hd = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Mat docat(n, d);
    linear_bwd(cache.ocat, r.out_w, dout, docat, g.out_w, g.out_b);

    Mat dqkv(n, 3 * d);
    for (int h = 0; h < heads; ++h) {
        const int qo = h * hd;
        const int ko = d + h * hd;
        const int vo = 2 * d + h * hd;
        const Mat& att = cache.attn[h];

        // dV and dA
        Mat datt(n, n);
        for (int i = 0; i < n; ++i) {
            const double* doi = docat.row(i) + qo;
            const double* ai = att.row(i);
            double* dai = datt.row(i);
            for (int j = 0; j < n; ++j) {
                const double* vj = cache.qkv.row(j) + vo;
                double* dvj = dqkv.row(j) + vo;
                double acc = 0.0;
                for (int k = 0; k < hd; ++k) {
                    acc += doi[k] * vj[k];
                    dvj[k] += ai[j] * doi[k];
                }
                dai[j] = acc;
            }
        }
        // softmax backward, then scores backward
        for (int i = 0; i < n; ++i) {
            const double* ai = att.row(i);
            double* dai = datt.row(i);
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += dai[j] * ai[j];
            for (int j = 0; j < n; ++j) dai[j] = ai[j] * (dai[j] - dot);
        }
        for (int i = 0; i < n; ++i) {
            const double* dsi = datt.row(i);
            const double* qi = cache.qkv.row(i) + qo;
            double* dqi = dqkv.row(i) + qo;
            for (int j = 0; j < n; ++j) {
                const double* kj = cache.qkv.row(j) + ko;
                double* dkj = dqkv.row(j) + ko;
                const double ds = dsi[j] * scale;
                for (int k = 0; k < hd; ++k) {
                    dqi[k] += ds * kj[k];
                    dkj[k] += ds * qi[k];
                }
            }
        }
    }
    linear_bwd(cache.a, r.qkv_w, dqkv, da, g.qkv_w, g.qkv_b);
}

Mat block_forward(const Mat& x, const AdapterParams& params, const std::string& prefix,
                  int heads, bool linear_only, BlockCache& cache) {
    const BlockRefs r = block_refs(params, prefix);
    const int d = x.cols;
    cache.x = x;
    Mat h;
    if (linear_only) {
        // value projection + output projection, no token mixing
        auto vw = r.qkv_w.subspan(std::size_t(2) * d * d, std::size_t(d) * d);
        auto vb = r.qkv_b.subspan(std::size_t(2) * d, d);
        cache.qkv = linear(x, vw, vb, d);
        Mat s = linear(cache.qkv, r.out_w, r.out_b, d);
        h = x;
        for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] += s.v[i];
    } else {
        cache.a = layernorm(x, r.ln1_g, r.ln1_b, cache.ln1);
        Mat s = mhsa(cache.a, r, heads, cache);
        h = x;
        for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] += s.v[i];
    }
    cache.h = h;

    const int m = static_cast<int>(r.fc1_b.size());
    Mat y;
    if (linear_only) {
        cache.f1 = linear(h, r.fc1_w, r.fc1_b, m);
        Mat u = linear(cache.f1, r.fc2_w, r.fc2_b, d);
        y = h;
        for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += u.v[i];
    } else {
        cache.b2 = layernorm(h, r.ln2_g, r.ln2_b, cache.ln2);
        cache.f1 = linear(cache.b2, r.fc1_w, r.fc1_b, m);
        cache.g = gelu(cache.f1);
        Mat u = linear(cache.g, r.fc2_w, r.fc2_b, d);
        y = h;
        for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += u.v[i];
    }
    return y;
}

Mat block_backward(const Mat& dy, const AdapterParams& params, std::vector<double>& grad,
                   const std::string& prefix, int heads, bool linear_only,
                   const BlockCache& cache) {
    const BlockRefs r = block_refs(params, prefix);
    const BlockGrads g = block_grads(params, grad, prefix);
    const int d = cache.x.cols;

    // y = h + fc2(act(fc1(LN2(h))))
    Mat dh = dy;  // residual path
    if (linear_only) {
        Mat df1(cache.f1.rows, cache.f1.cols);
        linear_bwd(cache.f1, r.fc2_w, dy, df1, g.fc2_w, g.fc2_b);
        linear_bwd(cache.h, r.fc1_w, df1, dh, g.fc1_w, g.fc1_b);
    } else {
        Mat dg_act(cache.g.rows, cache.g.cols);
        linear_bwd(cache.g, r.fc2_w, dy, dg_act, g.fc2_w, g.fc2_b);
        Mat df1(cache.f1.rows, cache.f1.cols);
        gelu_bwd(cache.f1, dg_act, df1);
        Mat db2(cache.b2.rows, cache.b2.cols);
        linear_bwd(cache.b2, r.fc1_w, df1, db2, g.fc1_w, g.fc1_b);
        layernorm_bwd(cache.h, cache.ln2, r.ln2_g, db2, dh, g.ln2_g, g.ln2_b);
    }

    // h = x + attn(LN1(x))
    Mat dx = dh;  // residual path
    if (linear_only) {
        auto vw = r.qkv_w.subspan(std::size_t(2) * d * d, std::size_t(d) * d);
        auto dvw = g.qkv_w.subspan(std::size_t(2) * d * d, std::size_t(d) * d);
        auto dvb = g.qkv_b.subspan(std::size_t(2) * d, d);
        Mat dv(cache.qkv.rows, cache.qkv.cols);
        linear_bwd(cache.qkv, r.out_w, dh, dv, g.out_w, g.out_b);
        linear_bwd(cache.x, vw, dv, dx, dvw, dvb);
    } else {
        Mat da(cache.a.rows, cache.a.cols);
        mhsa_bwd(cache, r, g, heads, dh, da);
        layernorm_bwd(cache.x, cache.ln1, r.ln1_g, da, dx, g.ln1_g, g.ln1_b);
    }
    return dx;
}

Mat patchify(const EventFrame& frame, int patch) {
    const int w = frame.geometry.width;
    const int h = frame.geometry.height;
    const int gw = (w + patch - 1) / patch;
    const int gh = (h + patch - 1) / patch;
    Mat x(gw * gh, 3 * patch * patch);
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            double* row = x.row(gy * gw + gx);
            for (int py = 0; py < patch; ++py) {
                const int yy = gy * patch + py;
                for (int px = 0; px < patch; ++px) {
                    const int xx = gx * patch + px;
                    double* dst = row + (std::size_t(py) * patch + px) * 3;
                    if (yy < h && xx < w) {
                        const float* src = frame.values.data() + (std::size_t(yy) * w + xx) * 3;
                        dst[0] = src[0];
                        dst[1] = src[1];
                        dst[2] = src[2];
                    }
                    // outside the frame stays zero (right/bottom padding)
                }
            }
        }
    }
    return x;
}

TokenGrid to_token_grid(Mat m) {
    return TokenGrid{m.rows, m.cols, std::move(m.v)};
}

struct ForwardCache {
    Mat ximg, xevt;
    Mat f0, e_pe, e0;
    std::vector<BlockCache> event_blocks;
    std::vector<Mat> proj_in;   // event block outputs feeding each stage's projection
    std::vector<Mat> ep;        // projected event features
    std::vector<Mat> z;         // concatenations
    std::vector<Mat> fuse_f1;   // fusion MLP pre-activations
    std::vector<Mat> fuse_g;    // fusion MLP activations
    std::vector<BlockCache> image_blocks;
};

Mat fused_forward(const EventFrame& image_frame, const EventFrame& event_frame,
                  const AdapterParams& params, ForwardCache& cache) {
    const AdapterConfig& c = params.config();
    if (!(image_frame.geometry.width == event_frame.geometry.width &&
          image_frame.geometry.height == event_frame.geometry.height)) {
        throw GeometryMismatch("image and event frame resolutions differ");
    }

    cache.ximg = patchify(image_frame, c.patch_size);
    Mat f = linear(cache.ximg, params.tensor("patch_embed.weight"),
                   params.tensor("patch_embed.bias"), c.image_dim);
    cache.f0 = f;

    cache.image_blocks.resize(c.image_branch_blocks);
    if (c.event_blocks == 0) {
        for (int b = 0; b < c.image_branch_blocks; ++b) {
            f = block_forward(f, params, "image.block" + std::to_string(b), c.image_heads,
                              c.linear_only, cache.image_blocks[b]);
        }
        return f;
    }

    cache.xevt = patchify(event_frame, c.patch_size);
    cache.e_pe = linear(cache.xevt, params.tensor("patch_embed.weight"),
                        params.tensor("patch_embed.bias"), c.image_dim);
    Mat e = linear(cache.e_pe, params.tensor("event_in.weight"), params.tensor("event_in.bias"),
                   c.event_dim);
    cache.e0 = e;

    cache.event_blocks.resize(c.event_blocks);
    cache.proj_in.resize(c.event_blocks);
    cache.ep.resize(c.event_blocks);
    cache.z.resize(c.event_blocks);
    cache.fuse_f1.resize(c.event_blocks);
    cache.fuse_g.resize(c.event_blocks);

    const auto fuse1_w = params.tensor("fuse.mlp.fc1.weight");
    const auto fuse1_b = params.tensor("fuse.mlp.fc1.bias");
    const auto fuse2_w = params.tensor("fuse.mlp.fc2.weight");
    const auto fuse2_b = params.tensor("fuse.mlp.fc2.bias");

    int image_block = 0;
    for (int s = 0; s < c.event_blocks; ++s) {
        e = block_forward(e, params, "event.block" + std::to_string(s), c.event_heads,
                          c.linear_only, cache.event_blocks[s]);
        cache.proj_in[s] = e;
        cache.ep[s] = linear(e, params.tensor("fuse.proj" + std::to_string(s) + ".weight"),
                             params.tensor("fuse.proj" + std::to_string(s) + ".bias"),
                             c.image_dim);

        Mat z(f.rows, 2 * c.image_dim);
        for (int rr = 0; rr < f.rows; ++rr) {
            std::memcpy(z.row(rr), f.row(rr), sizeof(double) * c.image_dim);
            std::memcpy(z.row(rr) + c.image_dim, cache.ep[s].row(rr),
                        sizeof(double) * c.image_dim);
        }
        cache.z[s] = z;
        cache.fuse_f1[s] = linear(z, fuse1_w, fuse1_b, c.fusion_hidden);
        cache.fuse_g[s] = c.linear_only ? cache.fuse_f1[s] : gelu(cache.fuse_f1[s]);
        f = linear(cache.fuse_g[s], fuse2_w, fuse2_b, c.image_dim);

        const int group_end = c.fusion_layers[s];  // 1-based, inclusive
        for (; image_block < group_end; ++image_block) {
            f = block_forward(f, params, "image.block" + std::to_string(image_block),
                              c.image_heads, c.linear_only, cache.image_blocks[image_block]);
        }
    }
    for (; image_block < c.image_branch_blocks; ++image_block) {
        f = block_forward(f, params, "image.block" + std::to_string(image_block), c.image_heads,
                          c.linear_only, cache.image_blocks[image_block]);
    }
    return f;
}

void fused_backward(const Mat& dout, const AdapterParams& params, const ForwardCache& cache,
                    std::vector<double>& grad) {
    const AdapterConfig& c = params.config();
    auto gview = [&](const std::string& n) -> std::span<double> {
        const TensorSpec& s = params.spec(n);
        return {grad.data() + s.offset, s.size};
    };

    Mat df = dout;
    int image_block = c.image_branch_blocks - 1;
    const int last_fused =
        c.event_blocks > 0 ? c.fusion_layers[c.event_blocks - 1] : 0;  // 1-based
    for (; image_block >= last_fused; --image_block) {
        df = block_backward(df, params, grad, "image.block" + std::to_string(image_block),
                            c.image_heads, c.linear_only, cache.image_blocks[image_block]);
    }

    if (c.event_blocks == 0) {
        Mat dximg(cache.ximg.rows, cache.ximg.cols);
        linear_bwd(cache.ximg, params.tensor("patch_embed.weight"), df, dximg,
                   gview("patch_embed.weight"), gview("patch_embed.bias"));
        return;
    }

    const auto fuse1_w = params.tensor("fuse.mlp.fc1.weight");
    const auto fuse2_w = params.tensor("fuse.mlp.fc2.weight");

    Mat de;  // gradient flowing down the event branch
    for (int s = c.event_blocks - 1; s >= 0; --s) {
        const int group_start = s == 0 ? 0 : c.fusion_layers[s - 1];  // 1-based boundary
        for (; image_block >= group_start; --image_block) {
            df = block_backward(df, params, grad, "image.block" + std::to_string(image_block),
                                c.image_heads, c.linear_only, cache.image_blocks[image_block]);
        }

        // fusion MLP backward
        Mat dgact(cache.fuse_g[s].rows, cache.fuse_g[s].cols);
        linear_bwd(cache.fuse_g[s], fuse2_w, df, dgact, gview("fuse.mlp.fc2.weight"),
                   gview("fuse.mlp.fc2.bias"));
        Mat df1(cache.fuse_f1[s].rows, cache.fuse_f1[s].cols);
        if (c.linear_only) {
            df1 = dgact;
        } else {
            gelu_bwd(cache.fuse_f1[s], dgact, df1);
        }
        Mat dz(cache.z[s].rows, cache.z[s].cols);
        linear_bwd(cache.z[s], fuse1_w, df1, dz, gview("fuse.mlp.fc1.weight"),
                   gview("fuse.mlp.fc1.bias"));

        // split concat gradient
        Mat dfprev(dz.rows, c.image_dim);
        Mat dep(dz.rows, c.image_dim);
        for (int rr = 0; rr < dz.rows; ++rr) {
            std::memcpy(dfprev.row(rr), dz.row(rr), sizeof(double) * c.image_dim);
            std::memcpy(dep.row(rr), dz.row(rr) + c.image_dim, sizeof(double) * c.image_dim);
        }
        df = dfprev;

        // projection backward into the event branch
        Mat de_stage(cache.proj_in[s].rows, cache.proj_in[s].cols);
        linear_bwd(cache.proj_in[s],
                   params.tensor("fuse.proj" + std::to_string(s) + ".weight"), dep, de_stage,
                   gview("fuse.proj" + std::to_string(s) + ".weight"),
                   gview("fuse.proj" + std::to_string(s) + ".bias"));
        if (de.v.empty()) {
            de = de_stage;
        } else {
            for (std::size_t i = 0; i < de.v.size(); ++i) de.v[i] += de_stage.v[i];
        }
        de = block_backward(de, params, grad, "event.block" + std::to_string(s), c.event_heads,
                            c.linear_only, cache.event_blocks[s]);
    }

    // event entry projection and both patch embedding invocations
    Mat depe(cache.e_pe.rows, cache.e_pe.cols);
    linear_bwd(cache.e_pe, params.tensor("event_in.weight"), de, depe, gview("event_in.weight"),
               gview("event_in.bias"));
    Mat dxevt(cache.xevt.rows, cache.xevt.cols);
    linear_bwd(cache.xevt, params.tensor("patch_embed.weight"), depe, dxevt,
               gview("patch_embed.weight"), gview("patch_embed.bias"));
    Mat dximg(cache.ximg.rows, cache.ximg.cols);
    linear_bwd(cache.ximg, params.tensor("patch_embed.weight"), df, dximg,
               gview("patch_embed.weight"), gview("patch_embed.bias"));
}

}  // namespace

// ---------------------------------------------------------------------------
// public surface

EventFrame to_float_frame(const RgbImage& image) {
    EventFrame frame{SensorGeometry{image.width, image.height, BayerOrigin::RGGB},
                     std::vector<float>(image.data.size())};
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        frame.values[i] = static_cast<float>(image.data[i]) / 255.0f;
    }
    return frame;
}

std::pair<int, int> token_grid_shape(const AdapterConfig& config, int height, int width) {
    const int gh = (height + config.patch_size - 1) / config.patch_size;
    const int gw = (width + config.patch_size - 1) / config.patch_size;
    return {gh, gw};
}

TokenGrid patch_embed_shared(const EventFrame& frame, const AdapterParams& params) {
    const AdapterConfig& c = params.config();
    Mat x = patchify(frame, c.patch_size);
    return to_token_grid(linear(x, params.tensor("patch_embed.weight"),
                                params.tensor("patch_embed.bias"), c.image_dim));
}

TokenGrid adapter_forward(const EventFrame& image_frame, const EventFrame& event_frame,
                          const AdapterParams& params) {
    ForwardCache cache;
    return to_token_grid(fused_forward(image_frame, event_frame, params, cache));
}

TokenGrid adapter_forward(const RgbImage& image, const EventFrame& event_frame,
                          const AdapterParams& params) {
    return adapter_forward(to_float_frame(image), event_frame, params);
}

TokenGrid image_only_forward(const EventFrame& image_frame, const AdapterParams& params) {
    const AdapterConfig& c = params.config();
    Mat x = patchify(image_frame, c.patch_size);
    Mat f = linear(x, params.tensor("patch_embed.weight"), params.tensor("patch_embed.bias"),
                   c.image_dim);
    BlockCache scratch;
    for (int b = 0; b < c.image_branch_blocks; ++b) {
        f = block_forward(f, params, "image.block" + std::to_string(b), c.image_heads,
                          c.linear_only, scratch);
    }
    return to_token_grid(std::move(f));
}

// ---------------------------------------------------------------------------
// accounting

namespace {

std::uint64_t block_param_count(std::uint64_t d, std::uint64_t mlp_ratio) {
    const std::uint64_t m = d * mlp_ratio;
    std::uint64_t n = 0;
    n += 2 * d;              // ln1
    n += 3 * d * d + 3 * d;  // qkv
    n += d * d + d;          // attn out
    n += 2 * d;              // ln2
    n += d * m + m;          // fc1
    n += m * d + d;          // fc2
    return n;
}

}  // namespace

std::uint64_t count_parameters(const AdapterConfig& config) {
    config.validate();
    if (config.event_blocks == 0) return 0;
    const std::uint64_t di = config.image_dim;
    const std::uint64_t de = config.event_dim;
    const std::uint64_t s = config.event_blocks;
    const std::uint64_t hf = config.fusion_hidden;

    std::uint64_t n = 0;
    n += di * de + de;                                   // event entry reduction
    n += s * block_param_count(de, config.mlp_ratio);    // event blocks
    n += s * (de * di + di);                             // per-stage projections
    n += (2 * di) * hf + hf + hf * di + di;              // shared fusion MLP
    return n;
}

double flops_estimate(const AdapterConfig& config, int height, int width) {
    config.validate();
    if (config.event_blocks == 0) return 0.0;
    const auto [gh, gw] = token_grid_shape(config, height, width);
    const double n = static_cast<double>(gh) * gw;
    const double di = config.image_dim;
    const double de = config.event_dim;
    const double me = de * config.mlp_ratio;
    const double hf = config.fusion_hidden;
    const double p = config.patch_size;
    const double s = config.event_blocks;

    double macs = 0.0;
    macs += n * (3.0 * p * p) * di;                       // patch embedding, event invocation
    macs += n * di * de;                                  // entry reduction
    double block = 0.0;
    block += n * de * (3.0 * de);                         // qkv
    block += 2.0 * n * n * de;                            // scores + weighted values
    block += n * de * de;                                 // attn out
    block += 2.0 * n * de * me;                           // mlp
    macs += s * block;
    macs += s * n * de * di;                              // stage projections
    macs += s * n * (2.0 * di * hf + hf * di);            // fusion MLP (run once per stage)
    return 2.0 * macs;
}

std::vector<std::string> shape_trace(const AdapterConfig& config, int height, int width) {
    config.validate();
    const auto [gh, gw] = token_grid_shape(config, height, width);
    const int n = gh * gw;
    std::vector<std::string> lines;
    auto add = [&](const std::string& s) { lines.push_back(s); };
    std::ostringstream os;
    os << "input " << height << "x" << width << "x3, padded to " << gh * config.patch_size << "x"
       << gw * config.patch_size << " (" << n << " tokens)";
    add(os.str());
    add("patch_embed (shared): " + std::to_string(n) + " x " + std::to_string(config.image_dim));
    if (config.event_blocks == 0) {
        add("image blocks 1-" + std::to_string(config.image_branch_blocks) + ": " +
            std::to_string(n) + " x " + std::to_string(config.image_dim));
        return lines;
    }
    add("event_in: " + std::to_string(n) + " x " + std::to_string(config.event_dim));
    int prev = 0;
    for (int s = 0; s < config.event_blocks; ++s) {
        std::ostringstream line;
        line << "stage " << (s + 1) << ": event.block" << s << " " << n << " x "
             << config.event_dim << " -> proj " << n << " x " << config.image_dim << " -> fuse ["
             << n << " x " << 2 * config.image_dim << " -> " << config.fusion_hidden << " -> "
             << config.image_dim << "] -> image blocks " << (prev + 1) << "-"
             << config.fusion_layers[s];
        add(line.str());
        prev = config.fusion_layers[s];
    }
    if (prev < config.image_branch_blocks) {
        add("image blocks " + std::to_string(prev + 1) + "-" +
            std::to_string(config.image_branch_blocks) + " (no fusion)");
    }
    add("output: " + std::to_string(n) + " x " + std::to_string(config.image_dim));
    return lines;
}

// ---------------------------------------------------------------------------
// gradient verification

double adapter_loss(const AdapterParams& params, const EventFrame& image_probe,
                    const EventFrame& event_probe) {
    ForwardCache cache;
    const Mat out = fused_forward(image_probe, event_probe, params, cache);
    double loss = 0.0;
    for (double v : out.v) loss += v;
    return loss;
}

std::vector<double> adapter_loss_gradients(const AdapterParams& params,
                                           const EventFrame& image_probe,
                                           const EventFrame& event_probe) {
    ForwardCache cache;
    const Mat out = fused_forward(image_probe, event_probe, params, cache);
    Mat dout(out.rows, out.cols);
    std::fill(dout.v.begin(), dout.v.end(), 1.0);
    std::vector<double> grad(params.total_size(), 0.0);
    fused_backward(dout, params, cache, grad);
    for (double g : grad) {
        if (!std::isfinite(g)) throw NonFiniteGradient();
    }
    return grad;
}

double numeric_loss_gradient(const AdapterParams& params, const EventFrame& image_probe,
                             const EventFrame& event_probe, std::size_t flat_index, double step) {
    AdapterParams perturbed = params;
    perturbed.flat()[flat_index] = params.flat()[flat_index] + step;
    const double up = adapter_loss(perturbed, image_probe, event_probe);
    perturbed.flat()[flat_index] = params.flat()[flat_index] - step;
    const double down = adapter_loss(perturbed, image_probe, event_probe);
    return (up - down) / (2.0 * step);
}

double gradient_rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / denom;
}

GradientCheckResult gradient_check(const AdapterParams& params, const EventFrame& image_probe,
                                   const EventFrame& event_probe, double step) {
    GradientCheckResult result;
    result.param_count = params.total_size();
    result.loss = adapter_loss(params, image_probe, event_probe);
    const std::vector<double> analytic = adapter_loss_gradients(params, image_probe, event_probe);

    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double numeric = numeric_loss_gradient(params, image_probe, event_probe, i, step);
        const double rel = gradient_rel_error(analytic[i], numeric);
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_index = i;
            result.worst_tensor = params.spec_at(i).name;
        }
    }
    return result;
}

std::pair<EventFrame, EventFrame> make_probe_frames(std::uint16_t width, std::uint16_t height,
                                                    std::uint64_t seed) {
    Rng rng(seed);
    const SensorGeometry geom{width, height, BayerOrigin::RGGB};
    EventFrame a{geom, std::vector<float>(std::size_t(width) * height * 3)};
    EventFrame b{geom, std::vector<float>(std::size_t(width) * height * 3)};
    for (auto& v : a.values) v = static_cast<float>(rng.uniform());
    for (auto& v : b.values) v = static_cast<float>(rng.uniform());
    return {std::move(a), std::move(b)};
}

}  // namespace evla
