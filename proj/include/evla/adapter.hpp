#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evla/image.hpp"
#include "evla/representation.hpp"

namespace evla {

/// Architecture of the hierarchical event adapter and its stand-in
/// ViT-style image branch.
///
/// The event branch is a 16x16 patch embedding shared with the image
/// branch, an input reduction to event_dim, and event_blocks Transformer
/// blocks. Each block's output is projected to image_dim (one projection
/// per stage) and concatenated with the current image tokens; a single
/// fusion MLP, shared across stages, maps the concatenation back to
/// image_dim before the next group of image blocks runs.
struct AdapterConfig {
    int patch_size = 16;
    int image_dim = 768;
    int event_dim = 384;
    int event_blocks = 4;
    std::vector<int> fusion_layers = {3, 6, 9, 12};  // 1-based image-block indices
    int fusion_hidden = 1536;
    int image_branch_blocks = 12;
    int image_heads = 12;
    int event_heads = 6;
    int mlp_ratio = 4;         // block MLP expansion, both branches
    bool linear_only = false;  // strip LN/softmax/GELU; every layer becomes linear

    /// Throws InvalidConfig on any violated invariant.
    void validate() const;

    /// Small config for finite-difference checks: 8/16 dims, 4 stages,
    /// exactly 5,000 adapter parameters.
    static AdapterConfig toy(bool linear = false);
};

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Flat parameter store with named views. Layout is fixed by the config;
/// the shared patch embedding appears exactly once.
class AdapterParams {
public:
    explicit AdapterParams(const AdapterConfig& config);

    /// Truncated-normal weights, zero biases, unit LayerNorm gains. Training
    /// uses the 0.02 default; gradient checks want init_std around 0.2 so
    /// step-1e-4 central differences stay inside their convergent regime.
    static AdapterParams initialized(const AdapterConfig& config, std::uint64_t seed,
                                     double init_std = 0.02);

    const AdapterConfig& config() const { return config_; }
    const std::vector<TensorSpec>& tensors() const { return specs_; }
    std::span<double> tensor(std::string_view name);
    std::span<const double> tensor(std::string_view name) const;
    const TensorSpec& spec(std::string_view name) const;
    const TensorSpec& spec_at(std::size_t flat_index) const;

    std::span<double> flat() { return values_; }
    std::span<const double> flat() const { return values_; }
    std::size_t total_size() const { return values_.size(); }

private:
    AdapterConfig config_;
    std::vector<TensorSpec> specs_;
    std::vector<double> values_;
};

/// Row-major tokens x dim activation matrix.
struct TokenGrid {
    int tokens = 0;
    int dim = 0;
    std::vector<double> data;

    double at(int tok, int d) const { return data[std::size_t(tok) * dim + d]; }
    friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

/// RgbImage intensities scaled to [0, 1] floats.
EventFrame to_float_frame(const RgbImage& image);

/// Token grid dimensions after zero-padding the resolution up to a
/// patch_size multiple.
std::pair<int, int> token_grid_shape(const AdapterConfig& config, int height, int width);

/// Shared patch embedding: non-overlapping patches, one linear projection.
/// Identical frames produce bit-identical token grids no matter which
/// branch calls it. Frames whose resolution is not a patch_size multiple
/// are zero-padded at the right/bottom edges first.
TokenGrid patch_embed_shared(const EventFrame& frame, const AdapterParams& params);

/// Full hierarchical forward pass; output token count and dim match the
/// image branch. Throws GeometryMismatch / ShapeMismatch.
TokenGrid adapter_forward(const RgbImage& image, const EventFrame& event_frame,
                          const AdapterParams& params);
TokenGrid adapter_forward(const EventFrame& image_frame, const EventFrame& event_frame,
                          const AdapterParams& params);

/// Image branch alone (patch embedding + image blocks, no fusion).
TokenGrid image_only_forward(const EventFrame& image_frame, const AdapterParams& params);

/// Parameters introduced beyond the image branch; the shared patch
/// embedding counts as zero additional.
std::uint64_t count_parameters(const AdapterConfig& config);

/// Analytic multiply-accumulate count x2 for the event branch plus fusion
/// stages at the given resolution (pad-to-multiple applied first).
/// Elementwise work (softmax, LayerNorm, GELU) is not counted.
double flops_estimate(const AdapterConfig& config, int height, int width);

/// One line per pipeline step with token/dim shapes, for diagnostics.
std::vector<std::string> shape_trace(const AdapterConfig& config, int height, int width);

// -- gradient verification ---------------------------------------------------

/// Scalar probe loss: sum over all output token coordinates.
double adapter_loss(const AdapterParams& params, const EventFrame& image_probe,
                    const EventFrame& event_probe);

/// Analytic gradient of adapter_loss w.r.t. every parameter (flat layout).
/// Throws NonFiniteGradient if any entry is non-finite.
std::vector<double> adapter_loss_gradients(const AdapterParams& params,
                                           const EventFrame& image_probe,
                                           const EventFrame& event_probe);

/// Central finite difference of adapter_loss along one flat parameter index.
double numeric_loss_gradient(const AdapterParams& params, const EventFrame& image_probe,
                             const EventFrame& event_probe, std::size_t flat_index,
                             double step = 1e-4);

/// |a - n| / max(|a|, |n|, 1e-4); the floor keeps unused parameters
/// (exact zero gradient on both sides) from turning into 0/0.
double gradient_rel_error(double analytic, double numeric);

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::string worst_tensor;
    double loss = 0.0;
    std::size_t param_count = 0;
};

/// Compares analytic gradients against central differences over every
/// parameter. Intended for toy configs (cost is two forwards per parameter).
GradientCheckResult gradient_check(const AdapterParams& params, const EventFrame& image_probe,
                                   const EventFrame& event_probe, double step = 1e-4);

/// Seeded random probe pair in [0, 1] at the given resolution.
std::pair<EventFrame, EventFrame> make_probe_frames(std::uint16_t width, std::uint16_t height,
                                                    std::uint64_t seed);

}  // namespace evla
