#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pointattn/geom.hpp"
#include "pointattn/ops.hpp"
#include "pointattn/pipeline.hpp"
#include "pointattn/rng.hpp"

namespace pointattn::model {

// Full architecture description. The paper-scale and desk-scale presets
// differ only in numbers; every ablation (point attention, group
// attention, multiscale grouping) is a flag here so trained checkpoints
// can record exactly what they were.
struct ModelConfig {
    std::vector<int> group_counts;                // centroids per abstraction level
    std::vector<std::vector<double>> radii;       // per level, one entry per scale
    std::vector<int> group_sizes;                 // points per group, per level
    std::vector<std::array<int, 3>> sa_kernels;   // conv widths per abstraction level
    std::vector<std::vector<int>> fp_kernels;     // conv widths per propagation level
    int classifier_width = 128;
    int attention_reduction = 64;                 // projection width inside point attention
    Eigen::Index attention_cap = 8192;            // max flattened attention size J
    SoftmaxMode softmax_mode = SoftmaxMode::kRow;
    bool enable_pam = true;
    bool enable_gam = true;
    bool enable_msg = true;
    int num_classes = 0;
    int feature_channels = 6;
    int idw_neighbors = 3;

    static ModelConfig desk(int num_classes);
    static ModelConfig paper(int num_classes);

    void validate() const;
    size_t levels() const { return group_counts.size(); }
    // Radii actually used at a level: all scales, or just the coarsest
    // one when multiscale grouping is off.
    std::vector<double> level_radii(size_t level) const;
    // Feature width T produced by a level (scale concat included).
    int level_width(size_t level) const;

    std::vector<std::pair<std::string, std::string>> to_entries() const;
    static ModelConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
};

// Output of one set-abstraction level: sampled centroids, the grouped
// per-point features (G x S x T) and their per-group max pool (G x T).
struct LayerState {
    geom::PointSet centroids;
    Tensor features;
    Tensor pooled;
};

// Hierarchical segmentation network: set abstraction down, point/group
// attention on the coarsest grouped features, inverse-distance feature
// propagation back up, shared per-point classifier head.
class Network {
public:
    Network(ModelConfig cfg, std::uint64_t seed);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;

    struct Trace {
        Tensor pam_matrix;  // J x J
        Tensor gam_matrix;  // G x G
    };

    // Per-point logits, n x num_classes. Columns 0..2 of `features9`
    // are positions, 3..8 the feature channels.
    Tensor forward(const Eigen::MatrixXd& features9, bool training, Trace* trace = nullptr);
    Tensor forward(const pipeline::Sample& sample, bool training, Trace* trace = nullptr);
    // Same pass with positions and feature tensor already split; lets
    // callers differentiate through the feature inputs.
    Tensor forward_features(const geom::PointSet& points, const Tensor& features, bool training,
                            Trace* trace = nullptr);

    LayerState set_abstraction(const geom::PointSet& points, const Tensor& features, size_t level,
                               bool training);

    // Residual attention ops on grouped features; *_branch returns only
    // the scaled attention term so the two modules can be fused without
    // double-counting the input.
    Tensor point_attention(const Tensor& grouped, Tensor* attention = nullptr);
    Tensor point_attention_branch(const Tensor& grouped, Tensor* attention = nullptr);
    Tensor group_attention(const Tensor& grouped, Tensor* attention = nullptr);
    Tensor group_attention_branch(const Tensor& grouped, Tensor* attention = nullptr);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    Tensor param(const std::string& name) const;
    const std::vector<std::pair<std::string, Eigen::ArrayXd*>>& buffers() { return buffers_; }
    void zero_grad();

private:
    struct ConvBlock {
        Tensor w, b;
        std::unique_ptr<BatchNormState> bn;
    };

    Tensor conv_stack(Tensor x, std::vector<ConvBlock>& blocks, bool training);
    Tensor register_param(const std::string& name, Shape shape, double init_limit, Rng& rng);
    ConvBlock make_conv(const std::string& name, int in, int out, Rng& rng);

    ModelConfig cfg_;
    std::vector<std::vector<std::vector<ConvBlock>>> sa_;  // [level][scale][stage]
    struct {
        Tensor wa, ba, wb, bb, wc, bc, wo, bo, alpha;
    } pam_;
    struct {
        Tensor beta;
    } gam_;
    std::vector<std::vector<ConvBlock>> fp_;
    ConvBlock head_;
    Tensor out_w_, out_b_;

    std::vector<Parameter> params_;
    std::vector<std::pair<std::string, Eigen::ArrayXd*>> buffers_;
};

}  // namespace pointattn::model
