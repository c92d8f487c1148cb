#include "pointattn/geom.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pointattn::geom {

namespace {

double sq_dist(const Coord& c, Eigen::Index a, Eigen::Index b) {
    return (c.row(a) - c.row(b)).squaredNorm();
}

}  // namespace

PointSet PointSet::from_coords(Coord c) {
    PointSet p;
    p.coords = std::move(c);
    p.ids.resize(static_cast<size_t>(p.coords.rows()));
    std::iota(p.ids.begin(), p.ids.end(), Eigen::Index{0});
    p.validate();
    return p;
}

PointSet PointSet::subset(const IndexList& rows) const {
    PointSet out;
    out.coords.resize(static_cast<Eigen::Index>(rows.size()), 3);
    out.ids.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        out.coords.row(static_cast<Eigen::Index>(i)) = coords.row(rows[i]);
        out.ids.push_back(ids[static_cast<size_t>(rows[i])]);
    }
    return out;
}

void PointSet::validate() const {
    if (coords.rows() < 1) throw std::invalid_argument("point set must hold at least one point");
    if (!coords.allFinite()) throw std::invalid_argument("point set contains non-finite coordinates");
}

Eigen::Index lexicographic_min_index(const PointSet& points) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < points.size(); ++i) {
        for (int d = 0; d < 3; ++d) {
            if (points.coords(i, d) < points.coords(best, d)) {
                best = i;
                break;
            }
            if (points.coords(i, d) > points.coords(best, d)) break;
        }
    }
    return best;
}

IndexList fps(const PointSet& points, Eigen::Index k, Eigen::Index seed) {
    const Eigen::Index n = points.size();
    if (k < 1 || k > n) {
        throw std::invalid_argument("fps: k = " + std::to_string(k) + " outside [1, " +
                                    std::to_string(n) + "]");
    }
    if (seed < 0 || seed >= n) throw std::invalid_argument("fps: seed index out of range");

    IndexList picked;
    picked.reserve(static_cast<size_t>(k));
    picked.push_back(seed);

    // min squared distance from each point to the picked set
    Eigen::ArrayXd best(n);
    for (Eigen::Index i = 0; i < n; ++i) best[i] = sq_dist(points.coords, i, seed);

    while (static_cast<Eigen::Index>(picked.size()) < k) {
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (best[i] > far_d) {  // strict > keeps the lowest index on ties
                far_d = best[i];
                far = i;
            }
        }
        picked.push_back(far);
        for (Eigen::Index i = 0; i < n; ++i) {
            best[i] = std::min(best[i], sq_dist(points.coords, i, far));
        }
    }
    return picked;
}

namespace {

GroupIndex build_groups(const PointSet& points, const IndexList& centroids, double radius,
                        Eigen::Index s, const std::function<IndexList(Eigen::Index)>& candidates) {
    if (radius <= 0.0) throw std::invalid_argument("ball_query: radius must be positive");
    if (s < 1) throw std::invalid_argument("ball_query: group size must be >= 1");

    GroupIndex out;
    out.centroid_ids = centroids;
    out.group_size = s;
    out.radius = radius;
    out.member_ids.resize(centroids.size() * static_cast<size_t>(s));
    out.padded.assign(centroids.size(), false);

    const double r2 = radius * radius;
    for (size_t g = 0; g < centroids.size(); ++g) {
        const Eigen::Index c = centroids[g];
        IndexList cand = candidates(c);
        std::sort(cand.begin(), cand.end());
        Eigen::Index filled = 0;
        for (Eigen::Index i : cand) {
            if (filled == s) break;
            if (sq_dist(points.coords, i, c) <= r2) {
                out.member_ids[g * static_cast<size_t>(s) + static_cast<size_t>(filled)] = i;
                ++filled;
            }
        }
        if (filled == 0) {
            // cannot happen: the centroid itself is at distance 0
            throw std::logic_error("ball_query: empty group");
        }
        if (filled < s) {
            out.padded[g] = true;
            const Eigen::Index first = out.member_ids[g * static_cast<size_t>(s)];
            for (; filled < s; ++filled) {
                out.member_ids[g * static_cast<size_t>(s) + static_cast<size_t>(filled)] = first;
            }
        }
    }
    return out;
}

}  // namespace

GroupIndex ball_query(const PointSet& points, const IndexList& centroids, double radius,
                      Eigen::Index s) {
    IndexList all(static_cast<size_t>(points.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    return build_groups(points, centroids, radius, s, [&](Eigen::Index) { return all; });
}

size_t UniformGrid::CellHash::operator()(const Cell& c) const {
    size_t h = static_cast<size_t>(c.x) * 73856093u;
    h ^= static_cast<size_t>(c.y) * 19349663u;
    h ^= static_cast<size_t>(c.z) * 83492791u;
    return h;
}

UniformGrid::UniformGrid(const PointSet& points, double cell_size) : points_(points), cell_(cell_size) {
    if (cell_size <= 0.0) throw std::invalid_argument("uniform grid: cell size must be positive");
    for (Eigen::Index i = 0; i < points.size(); ++i) {
        Cell c{static_cast<long>(std::floor(points.coords(i, 0) / cell_)),
               static_cast<long>(std::floor(points.coords(i, 1) / cell_)),
               static_cast<long>(std::floor(points.coords(i, 2) / cell_))};
        buckets_[c].push_back(i);
    }
}

IndexList UniformGrid::within_radius(const Eigen::RowVector3d& center, double radius) const {
    IndexList out;
    const double r2 = radius * radius;
    const long span = static_cast<long>(std::ceil(radius / cell_));
    const long cx = static_cast<long>(std::floor(center.x() / cell_));
    const long cy = static_cast<long>(std::floor(center.y() / cell_));
    const long cz = static_cast<long>(std::floor(center.z() / cell_));
    for (long dx = -span; dx <= span; ++dx) {
        for (long dy = -span; dy <= span; ++dy) {
            for (long dz = -span; dz <= span; ++dz) {
                auto it = buckets_.find(Cell{cx + dx, cy + dy, cz + dz});
                if (it == buckets_.end()) continue;
                for (Eigen::Index i : it->second) {
                    if ((points_.coords.row(i) - center).squaredNorm() <= r2) out.push_back(i);
                }
            }
        }
    }
    return out;
}

GroupIndex ball_query_grid(const PointSet& points, const IndexList& centroids, double radius,
                           Eigen::Index s) {
    UniformGrid grid(points, radius);
    return build_groups(points, centroids, radius, s, [&](Eigen::Index c) {
        return grid.within_radius(points.coords.row(c), radius);
    });
}

Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> knn(const PointSet& sources,
                                                                const PointSet& queries,
                                                                Eigen::Index k) {
    const Eigen::Index n = sources.size();
    if (k < 1 || k > n) {
        throw std::invalid_argument("knn: k = " + std::to_string(k) + " outside [1, " +
                                    std::to_string(n) + "]");
    }
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> out(queries.size(), k);
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<size_t>(n));
    for (Eigen::Index q = 0; q < queries.size(); ++q) {
        for (Eigen::Index i = 0; i < n; ++i) {
            dist[static_cast<size_t>(i)] = {(sources.coords.row(i) - queries.coords.row(q)).squaredNorm(), i};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        for (Eigen::Index j = 0; j < k; ++j) out(q, j) = dist[static_cast<size_t>(j)].second;
    }
    return out;
}

InterpPlan idw_plan(const PointSet& sources, const PointSet& queries, Eigen::Index k) {
    const auto neighbors = knn(sources, queries, k);
    InterpPlan plan;
    plan.indices = neighbors;
    plan.weights.resize(queries.size(), k);

    for (Eigen::Index q = 0; q < queries.size(); ++q) {
        Eigen::Index exact = -1;
        Eigen::ArrayXd w(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const double d2 = (sources.coords.row(neighbors(q, j)) - queries.coords.row(q)).squaredNorm();
            if (d2 == 0.0) {
                exact = j;
                break;
            }
            w[j] = 1.0 / d2;
        }
        if (exact >= 0) {
            plan.weights.row(q).setZero();
            plan.weights(q, exact) = 1.0;
        } else {
            plan.weights.row(q) = (w / w.sum()).matrix().transpose();
        }
    }
    return plan;
}

Eigen::MatrixXd idw_interpolate(const PointSet& sources, const Eigen::MatrixXd& features,
                                const PointSet& queries, Eigen::Index k) {
    if (features.rows() != sources.size()) {
        throw std::invalid_argument("idw_interpolate: one feature row per source required");
    }
    const InterpPlan plan = idw_plan(sources, queries, k);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(queries.size(), features.cols());
    for (Eigen::Index q = 0; q < queries.size(); ++q) {
        for (Eigen::Index j = 0; j < k; ++j) {
            out.row(q) += plan.weights(q, j) * features.row(plan.indices(q, j));
        }
    }
    return out;
}

}  // namespace pointattn::geom
