#include "pointattn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pointattn::model {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        os << buf;
    }
    return os.str();
}

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    return os.str();
}

}  // namespace

ModelConfig ModelConfig::desk(int num_classes) {
    ModelConfig c;
    c.group_counts = {64, 16};
    c.radii = {{0.1, 0.2}, {0.2, 0.4}};
    c.group_sizes = {16, 16};
    c.sa_kernels = {{16, 16, 32}, {32, 32, 64}};
    c.fp_kernels = {{64, 64}, {64, 64, 64}};
    c.classifier_width = 64;
    c.attention_reduction = 8;
    c.num_classes = num_classes;
    return c;
}

ModelConfig ModelConfig::paper(int num_classes) {
    ModelConfig c;
    c.group_counts = {256, 128, 64, 32};
    c.radii = {{0.05, 0.1}, {0.1, 0.2}, {0.2, 0.4}, {0.4, 0.8}};
    c.group_sizes = {32, 32, 32, 32};
    c.sa_kernels = {{32, 32, 64}, {64, 64, 128}, {128, 128, 256}, {256, 256, 512}};
    c.fp_kernels = {{256, 256}, {256, 256}, {256, 128}, {128, 128, 128}};
    c.classifier_width = 128;
    c.attention_reduction = 64;
    c.num_classes = num_classes;
    return c;
}

void ModelConfig::validate() const {
    const size_t L = levels();
    if (L == 0) throw std::invalid_argument("model config: at least one abstraction level required");
    if (radii.size() != L || group_sizes.size() != L || sa_kernels.size() != L || fp_kernels.size() != L) {
        throw std::invalid_argument("model config: per-level lists must all have length " +
                                    std::to_string(L));
    }
    for (size_t l = 0; l < L; ++l) {
        if (group_counts[l] < 1) throw std::invalid_argument("model config: group count must be >= 1");
        if (group_sizes[l] < 1) throw std::invalid_argument("model config: group size must be >= 1");
        if (radii[l].empty()) throw std::invalid_argument("model config: each level needs a radius");
        for (double r : radii[l]) {
            if (r <= 0.0) throw std::invalid_argument("model config: radii must be positive");
        }
        if (l + 1 < L && group_counts[l + 1] > group_counts[l]) {
            throw std::invalid_argument("model config: group counts must not grow with depth");
        }
        for (int k : sa_kernels[l]) {
            if (k < 1) throw std::invalid_argument("model config: kernel widths must be >= 1");
        }
        if (fp_kernels[l].empty()) {
            throw std::invalid_argument("model config: propagation levels need at least one conv");
        }
    }
    if (num_classes < 2) throw std::invalid_argument("model config: at least two classes required");
    if (attention_reduction < 1) throw std::invalid_argument("model config: attention reduction >= 1");
    if (feature_channels < 1) throw std::invalid_argument("model config: feature channels >= 1");
    if (idw_neighbors < 1) throw std::invalid_argument("model config: idw neighbors >= 1");
}

std::vector<double> ModelConfig::level_radii(size_t level) const {
    if (enable_msg) return radii[level];
    return {radii[level].back()};
}

int ModelConfig::level_width(size_t level) const {
    return static_cast<int>(level_radii(level).size()) * sa_kernels[level][2];
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_entries() const {
    std::vector<std::pair<std::string, std::string>> e;
    e.emplace_back("group_counts", join_ints(group_counts));
    {
        std::string r;
        for (size_t l = 0; l < radii.size(); ++l) {
            if (l) r += ';';
            r += join_doubles(radii[l]);
        }
        e.emplace_back("radii", r);
    }
    e.emplace_back("group_sizes", join_ints(group_sizes));
    {
        std::string s;
        for (size_t l = 0; l < sa_kernels.size(); ++l) {
            if (l) s += ';';
            s += join_ints({sa_kernels[l][0], sa_kernels[l][1], sa_kernels[l][2]});
        }
        e.emplace_back("sa_kernels", s);
    }
    {
        std::string s;
        for (size_t l = 0; l < fp_kernels.size(); ++l) {
            if (l) s += ';';
            s += join_ints(fp_kernels[l]);
        }
        e.emplace_back("fp_kernels", s);
    }
    e.emplace_back("classifier_width", std::to_string(classifier_width));
    e.emplace_back("attention_reduction", std::to_string(attention_reduction));
    e.emplace_back("attention_cap", std::to_string(attention_cap));
    e.emplace_back("softmax_mode", softmax_mode == SoftmaxMode::kRow ? "row" : "global");
    e.emplace_back("enable_pam", enable_pam ? "1" : "0");
    e.emplace_back("enable_gam", enable_gam ? "1" : "0");
    e.emplace_back("enable_msg", enable_msg ? "1" : "0");
    e.emplace_back("num_classes", std::to_string(num_classes));
    e.emplace_back("feature_channels", std::to_string(feature_channels));
    e.emplace_back("idw_neighbors", std::to_string(idw_neighbors));
    return e;
}

ModelConfig ModelConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
    ModelConfig c;
    c.group_counts.clear();
    c.radii.clear();
    c.group_sizes.clear();
    c.sa_kernels.clear();
    c.fp_kernels.clear();
    for (const auto& [key, value] : entries) {
        if (key == "group_counts") {
            for (const auto& t : split(value, ',')) c.group_counts.push_back(std::stoi(t));
        } else if (key == "radii") {
            for (const auto& lvl : split(value, ';')) {
                std::vector<double> rs;
                for (const auto& t : split(lvl, ',')) rs.push_back(std::stod(t));
                c.radii.push_back(std::move(rs));
            }
        } else if (key == "group_sizes") {
            for (const auto& t : split(value, ',')) c.group_sizes.push_back(std::stoi(t));
        } else if (key == "sa_kernels") {
            for (const auto& lvl : split(value, ';')) {
                auto ts = split(lvl, ',');
                if (ts.size() != 3) throw std::invalid_argument("model config: sa_kernels needs 3 widths");
                c.sa_kernels.push_back({std::stoi(ts[0]), std::stoi(ts[1]), std::stoi(ts[2])});
            }
        } else if (key == "fp_kernels") {
            for (const auto& lvl : split(value, ';')) {
                std::vector<int> ks;
                for (const auto& t : split(lvl, ',')) ks.push_back(std::stoi(t));
                c.fp_kernels.push_back(std::move(ks));
            }
        } else if (key == "classifier_width") {
            c.classifier_width = std::stoi(value);
        } else if (key == "attention_reduction") {
            c.attention_reduction = std::stoi(value);
        } else if (key == "attention_cap") {
            c.attention_cap = std::stoll(value);
        } else if (key == "softmax_mode") {
            c.softmax_mode = value == "global" ? SoftmaxMode::kGlobal : SoftmaxMode::kRow;
        } else if (key == "enable_pam") {
            c.enable_pam = value == "1";
        } else if (key == "enable_gam") {
            c.enable_gam = value == "1";
        } else if (key == "enable_msg") {
            c.enable_msg = value == "1";
        } else if (key == "num_classes") {
            c.num_classes = std::stoi(value);
        } else if (key == "feature_channels") {
            c.feature_channels = std::stoi(value);
        } else if (key == "idw_neighbors") {
            c.idw_neighbors = std::stoi(value);
        } else {
            throw std::invalid_argument("model config: unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

Tensor Network::register_param(const std::string& name, Shape shape, double init_limit, Rng& rng) {
    for (const auto& p : params_) {
        if (p.name == name) throw std::logic_error("duplicate parameter name: " + name);
    }
    Eigen::ArrayXd data(shape_numel(shape));
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        data[i] = init_limit == 0.0 ? 0.0 : rng.uniform(-init_limit, init_limit);
    }
    Tensor t = Tensor::from(std::move(shape), std::move(data), true);
    params_.push_back({name, t});
    return t;
}

Network::ConvBlock Network::make_conv(const std::string& name, int in, int out, Rng& rng) {
    ConvBlock block;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    block.w = register_param(name + ".w", {in, out}, limit, rng);
    block.b = register_param(name + ".b", {out}, 0.0, rng);
    block.bn = std::make_unique<BatchNormState>(out);
    params_.push_back({name + ".bn.gamma", block.bn->gamma});
    params_.push_back({name + ".bn.beta", block.bn->beta});
    buffers_.emplace_back(name + ".bn.running_mean", &block.bn->running_mean);
    buffers_.emplace_back(name + ".bn.running_var", &block.bn->running_var);
    return block;
}

Network::Network(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(seed, 0xb0d7));

    const size_t L = cfg_.levels();
    sa_.resize(L);
    int in_width = cfg_.feature_channels;
    for (size_t l = 0; l < L; ++l) {
        const auto radii = cfg_.level_radii(l);
        sa_[l].resize(radii.size());
        for (size_t s = 0; s < radii.size(); ++s) {
            int cin = 3 + in_width;  // centroid-relative offsets + carried features
            for (int stage = 0; stage < 3; ++stage) {
                const int cout = cfg_.sa_kernels[l][static_cast<size_t>(stage)];
                std::ostringstream name;
                name << "sa" << l << ".s" << s << ".conv" << stage;
                sa_[l][s].push_back(make_conv(name.str(), cin, cout, rng));
                cin = cout;
            }
        }
        in_width = cfg_.level_width(l);
    }

    const int top = cfg_.level_width(L - 1);
    const int tr = cfg_.attention_reduction;
    {
        const double pl = std::sqrt(6.0 / static_cast<double>(top + tr));
        pam_.wa = register_param("pam.a.w", {top, tr}, pl, rng);
        pam_.ba = register_param("pam.a.b", {tr}, 0.0, rng);
        pam_.wb = register_param("pam.b.w", {top, tr}, pl, rng);
        pam_.bb = register_param("pam.b.b", {tr}, 0.0, rng);
        pam_.wc = register_param("pam.c.w", {top, tr}, pl, rng);
        pam_.bc = register_param("pam.c.b", {tr}, 0.0, rng);
        pam_.wo = register_param("pam.out.w", {tr, top}, pl, rng);
        pam_.bo = register_param("pam.out.b", {top}, 0.0, rng);
        pam_.alpha = register_param("pam.alpha", {1}, 0.0, rng);  // starts at 0: module is inert
        gam_.beta = register_param("gam.beta", {1}, 0.0, rng);
    }

    fp_.resize(L);
    int carry = top;
    for (size_t i = 0; i < L; ++i) {
        const size_t target = L - i - 1;  // abstraction level the features land on
        int cin = carry + (target > 0 ? cfg_.level_width(target - 1) : 0);
        for (size_t stage = 0; stage < cfg_.fp_kernels[i].size(); ++stage) {
            const int cout = cfg_.fp_kernels[i][stage];
            std::ostringstream name;
            name << "fp" << i << ".conv" << stage;
            fp_[i].push_back(make_conv(name.str(), cin, cout, rng));
            cin = cout;
        }
        carry = cin;
    }

    head_ = make_conv("head.conv", carry, cfg_.classifier_width, rng);
    const double ol = std::sqrt(6.0 / static_cast<double>(cfg_.classifier_width + cfg_.num_classes));
    out_w_ = register_param("head.out.w", {cfg_.classifier_width, cfg_.num_classes}, ol, rng);
    out_b_ = register_param("head.out.b", {cfg_.num_classes}, 0.0, rng);
}

Tensor Network::param(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw std::out_of_range("no parameter named '" + name + "'");
}

void Network::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

Tensor Network::conv_stack(Tensor x, std::vector<ConvBlock>& blocks, bool training) {
    for (auto& blk : blocks) {
        x = relu(batch_norm(pointwise_affine(x, blk.w, blk.b), *blk.bn, training));
    }
    return x;
}

LayerState Network::set_abstraction(const geom::PointSet& points, const Tensor& features,
                                    size_t level, bool training) {
    const Eigen::Index g = cfg_.group_counts[level];
    if (points.size() < g) {
        throw std::invalid_argument("set abstraction level " + std::to_string(level) + " needs >= " +
                                    std::to_string(g) + " points, got " + std::to_string(points.size()));
    }
    const Eigen::Index s = cfg_.group_sizes[level];
    const auto centroid_rows = geom::fps(points, g, geom::lexicographic_min_index(points));

    LayerState state;
    state.centroids = points.subset(centroid_rows);

    Tensor grouped;
    const auto radii = cfg_.level_radii(level);
    for (size_t scale = 0; scale < radii.size(); ++scale) {
        const auto gi = geom::ball_query(points, centroid_rows, radii[scale], s);

        Eigen::ArrayXd rel(g * s * 3);
        for (Eigen::Index gi_row = 0; gi_row < g; ++gi_row) {
            const auto center = points.coords.row(centroid_rows[static_cast<size_t>(gi_row)]);
            for (Eigen::Index m = 0; m < s; ++m) {
                const auto member = points.coords.row(gi.member(gi_row, m));
                const Eigen::Index base = (gi_row * s + m) * 3;
                rel[base + 0] = member.x() - center.x();
                rel[base + 1] = member.y() - center.y();
                rel[base + 2] = member.z() - center.z();
            }
        }
        Tensor offsets = Tensor::from({g, s, 3}, std::move(rel));
        Tensor gathered = gather_rows(features, gi.member_ids, {g, s});
        Tensor x = conv_stack(concat_channels(offsets, gathered), sa_[level][scale], training);
        grouped = grouped.defined() ? concat_channels(grouped, x) : x;
    }

    state.features = grouped;
    state.pooled = max_reduce(grouped, 1);
    return state;
}

Tensor Network::point_attention_branch(const Tensor& grouped, Tensor* attention) {
    if (grouped.rank() != 3) {
        throw std::invalid_argument("point attention expects G x S x T features");
    }
    const Eigen::Index g = grouped.extent(0), s = grouped.extent(1);
    const Eigen::Index t = grouped.extent(2);
    if (t != pam_.wa.extent(0)) {
        throw std::invalid_argument("point attention built for width " + std::to_string(pam_.wa.extent(0)) +
                                    ", got " + std::to_string(t));
    }
    const Eigen::Index tr = pam_.wa.extent(1);
    const Eigen::Index j = s * tr;
    if (j > cfg_.attention_cap) {
        throw std::invalid_argument("point attention size J = " + std::to_string(j) + " exceeds cap " +
                                    std::to_string(cfg_.attention_cap) +
                                    "; reduce attention_reduction or group size");
    }

    Tensor a = reshape(pointwise_affine(grouped, pam_.wa, pam_.ba), {g, j});
    Tensor b = reshape(pointwise_affine(grouped, pam_.wb, pam_.bb), {g, j});
    Tensor c = reshape(pointwise_affine(grouped, pam_.wc, pam_.bc), {g, j});
    Tensor u = softmax(matmul(transpose(a), b), cfg_.softmax_mode);  // J x J
    if (attention) *attention = u;
    Tensor attended = reshape(matmul(c, transpose(u)), {g, s, tr});
    Tensor lifted = pointwise_affine(attended, pam_.wo, pam_.bo);
    return scale(lifted, pam_.alpha);
}

Tensor Network::point_attention(const Tensor& grouped, Tensor* attention) {
    return add(grouped, point_attention_branch(grouped, attention));
}

Tensor Network::group_attention_branch(const Tensor& grouped, Tensor* attention) {
    if (grouped.rank() != 3) {
        throw std::invalid_argument("group attention expects G x S x T features");
    }
    const Eigen::Index g = grouped.extent(0), s = grouped.extent(1), t = grouped.extent(2);
    Tensor d = reshape(grouped, {g, s * t});
    Tensor v = softmax(matmul(d, transpose(d)), cfg_.softmax_mode);  // G x G
    if (attention) *attention = v;
    Tensor att = reshape(matmul(v, d), {g, s, t});
    return scale(att, gam_.beta);
}

Tensor Network::group_attention(const Tensor& grouped, Tensor* attention) {
    return add(grouped, group_attention_branch(grouped, attention));
}

Tensor Network::forward(const Eigen::MatrixXd& features9, bool training, Trace* trace) {
    if (features9.cols() != pipeline::kFeatureColumns) {
        throw std::invalid_argument("forward: expected " + std::to_string(pipeline::kFeatureColumns) +
                                    " feature columns, got " + std::to_string(features9.cols()));
    }
    const Eigen::Index n = features9.rows();

    geom::Coord coords = features9.leftCols<3>();
    geom::PointSet points = geom::PointSet::from_coords(std::move(coords));

    Eigen::ArrayXd feat_data(n * cfg_.feature_channels);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int c = 0; c < cfg_.feature_channels; ++c) {
            feat_data[i * cfg_.feature_channels + c] = features9(i, 3 + c);
        }
    }
    Tensor features = Tensor::from({n, cfg_.feature_channels}, std::move(feat_data));
    return forward_features(points, features, training, trace);
}

Tensor Network::forward_features(const geom::PointSet& points, const Tensor& features, bool training,
                                 Trace* trace) {
    if (features.rank() != 2 || features.extent(0) != points.size() ||
        features.extent(1) != cfg_.feature_channels) {
        throw std::invalid_argument("forward: features must be " + std::to_string(points.size()) + " x " +
                                    std::to_string(cfg_.feature_channels) + ", got " +
                                    shape_str(features.shape()));
    }
    const size_t L = cfg_.levels();
    std::vector<LayerState> states;
    states.reserve(L);
    {
        const geom::PointSet* pts = &points;
        Tensor feats = features;
        for (size_t l = 0; l < L; ++l) {
            states.push_back(set_abstraction(*pts, feats, l, training));
            pts = &states.back().centroids;
            feats = states.back().pooled;
        }
    }

    // Attention enhances the coarsest grouped features. Both branches see
    // the same input and their scaled outputs join a single residual sum,
    // so disabled or zero-scaled modules leave the features untouched.
    Tensor enhanced = states.back().features;
    if (cfg_.enable_pam) {
        enhanced = add(enhanced, point_attention_branch(states.back().features,
                                                        trace ? &trace->pam_matrix : nullptr));
    }
    if (cfg_.enable_gam) {
        enhanced = add(enhanced, group_attention_branch(states.back().features,
                                                        trace ? &trace->gam_matrix : nullptr));
    }
    Tensor current = max_reduce(enhanced, 1);

    for (size_t i = 0; i < L; ++i) {
        const size_t target = L - i - 1;
        const geom::PointSet& coarse = states[L - 1 - i].centroids;
        const geom::PointSet& fine = target > 0 ? states[target - 1].centroids : points;
        const Eigen::Index k = std::min<Eigen::Index>(cfg_.idw_neighbors, coarse.size());
        const InterpPlan plan = geom::idw_plan(coarse, fine, k);
        Tensor x = apply_interpolation(current, plan);
        if (target > 0) x = concat_channels(x, states[target - 1].pooled);
        current = conv_stack(x, fp_[i], training);
    }

    Tensor hidden = relu(batch_norm(pointwise_affine(current, head_.w, head_.b), *head_.bn, training));
    return pointwise_affine(hidden, out_w_, out_b_);
}

Tensor Network::forward(const pipeline::Sample& sample, bool training, Trace* trace) {
    return forward(sample.features, training, trace);
}

}  // namespace pointattn::model
