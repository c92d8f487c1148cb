#include "pointattn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pointattn::pipeline {

void PointRecord::validate(size_t line) const {
    const std::string where = line ? " (line " + std::to_string(line) + ")" : "";
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(intensity)) {
        throw std::invalid_argument("point record has non-finite values" + where);
    }
    if (return_number < 1 || num_returns < return_number) {
        throw std::invalid_argument("point record needs num_returns >= return_number >= 1" + where);
    }
}

std::vector<PointRecord> read_pts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open point file: " + path);

    std::vector<PointRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        PointRecord r;
        if (!(fields >> r.x >> r.y >> r.z >> r.intensity >> r.return_number >> r.num_returns)) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected x y z intensity return_number num_returns [label]");
        }
        int label;
        if (fields >> label) r.label = label;
        r.validate(lineno);
        out.push_back(r);
    }
    if (out.empty()) throw std::runtime_error("point file is empty: " + path);
    return out;
}

namespace {

void format_record(std::string& buf, const PointRecord& r) {
    char tmp[192];
    std::snprintf(tmp, sizeof(tmp), "%.17g %.17g %.17g %.17g %d %d", r.x, r.y, r.z, r.intensity,
                  r.return_number, r.num_returns);
    buf += tmp;
}

}  // namespace

void write_pts(const std::string& path, const std::vector<PointRecord>& records) {
    write_pts_with_columns(path, records, {});
}

void write_pts_with_columns(const std::string& path, const std::vector<PointRecord>& records,
                            const std::vector<std::vector<int>>& extra) {
    for (const auto& col : extra) {
        if (col.size() != records.size()) {
            throw std::invalid_argument("extra column length does not match record count");
        }
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write point file: " + path);
    std::string buf;
    for (size_t i = 0; i < records.size(); ++i) {
        buf.clear();
        format_record(buf, records[i]);
        if (records[i].has_label()) buf += ' ' + std::to_string(records[i].label);
        for (const auto& col : extra) buf += ' ' + std::to_string(col[i]);
        buf += '\n';
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Block> block_partition(const std::vector<PointRecord>& points, double block_size,
                                   double stride, size_t min_points, bool drop_sparse) {
    if (points.empty()) throw std::invalid_argument("block_partition: no points");
    if (block_size <= 0.0 || stride <= 0.0 || stride > block_size) {
        throw std::invalid_argument("block_partition: need 0 < stride <= block_size");
    }

    double xmin = points[0].x, xmax = points[0].x;
    double ymin = points[0].y, ymax = points[0].y;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }

    const auto anchor_count = [&](double extent) {
        const double overhang = extent - block_size;
        if (overhang <= 0.0) return Eigen::Index{1};
        return static_cast<Eigen::Index>(std::ceil(overhang / stride)) + 1;
    };
    const Eigen::Index nx = anchor_count(xmax - xmin);
    const Eigen::Index ny = anchor_count(ymax - ymin);

    std::vector<Block> blocks(static_cast<size_t>(nx * ny));
    for (Eigen::Index ix = 0; ix < nx; ++ix) {
        for (Eigen::Index iy = 0; iy < ny; ++iy) {
            Block& b = blocks[static_cast<size_t>(ix * ny + iy)];
            b.x0 = xmin + static_cast<double>(ix) * stride;
            b.y0 = ymin + static_cast<double>(iy) * stride;
            b.size = block_size;
        }
    }

    const bool tiling = stride == block_size;
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (tiling) {
            // unique assignment; the max edge folds into the last window
            const auto clampi = [](Eigen::Index v, Eigen::Index hi) {
                return std::min(std::max(v, Eigen::Index{0}), hi);
            };
            const Eigen::Index ix = clampi(static_cast<Eigen::Index>(std::floor((p.x - xmin) / stride)), nx - 1);
            const Eigen::Index iy = clampi(static_cast<Eigen::Index>(std::floor((p.y - ymin) / stride)), ny - 1);
            blocks[static_cast<size_t>(ix * ny + iy)].records.push_back(p);
            blocks[static_cast<size_t>(ix * ny + iy)].point_ids.push_back(i);
        } else {
            for (auto& b : blocks) {
                if (p.x >= b.x0 && p.x <= b.x0 + b.size && p.y >= b.y0 && p.y <= b.y0 + b.size) {
                    b.records.push_back(p);
                    b.point_ids.push_back(i);
                }
            }
        }
    }

    std::vector<Block> kept;
    for (auto& b : blocks) {
        if (b.records.empty()) continue;
        if (drop_sparse && b.records.size() < min_points) continue;
        kept.push_back(std::move(b));
    }
    return kept;
}

Block normalize_block(const Block& block) {
    if (block.records.empty()) throw std::invalid_argument("normalize_block: empty block");

    NormState st;
    const auto channel = [](const PointRecord& r, int c) -> double {
        switch (c) {
            case 0: return r.x;
            case 1: return r.y;
            case 2: return r.z;
            default: return r.intensity;
        }
    };
    for (int c = 0; c < 4; ++c) {
        st.min[c] = st.max[c] = channel(block.records[0], c);
    }
    for (const auto& r : block.records) {
        for (int c = 0; c < 4; ++c) {
            st.min[c] = std::min(st.min[c], channel(r, c));
            st.max[c] = std::max(st.max[c], channel(r, c));
        }
    }

    Block out = block;
    out.norm = st;
    const auto scale = [&](double v, int c) {
        const double range = st.max[c] - st.min[c];
        return range > 0.0 ? (v - st.min[c]) / range : 0.0;
    };
    for (auto& r : out.records) {
        r.x = scale(r.x, 0);
        r.y = scale(r.y, 1);
        r.z = scale(r.z, 2);
        r.intensity = scale(r.intensity, 3);
    }
    return out;
}

Block denormalize_block(const Block& block) {
    if (!block.norm) throw std::invalid_argument("denormalize_block: block carries no norm state");
    const NormState& st = *block.norm;
    Block out = block;
    out.norm.reset();
    const auto unscale = [&](double v, int c) {
        const double range = st.max[c] - st.min[c];
        return range > 0.0 ? st.min[c] + v * range : st.min[c];
    };
    for (auto& r : out.records) {
        r.x = unscale(r.x, 0);
        r.y = unscale(r.y, 1);
        r.z = unscale(r.z, 2);
        r.intensity = unscale(r.intensity, 3);
    }
    return out;
}

namespace {

Sample build_sample(const Block& block, const std::vector<size_t>& chosen) {
    Sample s;
    const Eigen::Index n = static_cast<Eigen::Index>(chosen.size());
    s.features.resize(n, kFeatureColumns);
    s.labels.resize(chosen.size());
    s.origin_ids = chosen;
    for (Eigen::Index i = 0; i < n; ++i) {
        const PointRecord& r = block.records[chosen[static_cast<size_t>(i)]];
        s.features(i, 0) = r.x;
        s.features(i, 1) = r.y;
        s.features(i, 2) = r.z;
        s.features(i, 3) = r.x;
        s.features(i, 4) = r.y;
        s.features(i, 5) = r.z;
        s.features(i, 6) = r.intensity;
        s.features(i, 7) = static_cast<double>(r.return_number);
        s.features(i, 8) = static_cast<double>(r.num_returns);
        s.labels[static_cast<size_t>(i)] = r.label;
    }
    return s;
}

std::vector<size_t> shuffled_indices(size_t m, Rng& rng) {
    std::vector<size_t> idx(m);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = m; i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.next_below(i)]);
    }
    return idx;
}

}  // namespace

Sample sample_fixed(const Block& block, size_t n, Rng& rng) {
    const size_t m = block.records.size();
    if (m == 0) throw std::invalid_argument("sample_fixed: empty block");
    if (n < 1) throw std::invalid_argument("sample_fixed: n must be >= 1");

    std::vector<size_t> chosen;
    chosen.reserve(n);
    if (m >= n) {
        auto idx = shuffled_indices(m, rng);
        chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        chosen.resize(m);
        std::iota(chosen.begin(), chosen.end(), size_t{0});
        for (size_t i = m; i < n; ++i) chosen.push_back(rng.next_below(m));
    }
    return build_sample(block, chosen);
}

std::vector<Sample> coverage_samples(const Block& block, size_t n, Rng& rng) {
    const size_t m = block.records.size();
    if (m == 0) throw std::invalid_argument("coverage_samples: empty block");

    std::vector<Sample> out;
    if (m <= n) {
        std::vector<size_t> chosen(m);
        std::iota(chosen.begin(), chosen.end(), size_t{0});
        for (size_t i = m; i < n; ++i) chosen.push_back(rng.next_below(m));
        out.push_back(build_sample(block, chosen));
        return out;
    }

    const auto perm = shuffled_indices(m, rng);
    size_t pos = 0;
    while (pos < m) {
        std::vector<size_t> chosen;
        chosen.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            // wrap around for the final partial pass; duplicates are
            // resolved by the later prediction
            chosen.push_back(perm[(pos + i) % m]);
        }
        out.push_back(build_sample(block, chosen));
        pos += n;
    }
    return out;
}

}  // namespace pointattn::pipeline
