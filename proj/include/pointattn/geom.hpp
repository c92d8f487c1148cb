#pragma once

#include <Eigen/Dense>
#include <unordered_map>
#include <vector>

#include "pointattn/ops.hpp"

namespace pointattn::geom {

using Coord = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using IndexList = std::vector<Eigen::Index>;

// Raw coordinates plus the indices they had in whatever set they came
// from. All geometric kernels work on row positions (0..N-1); `ids` is
// bookkeeping for callers that subset repeatedly.
struct PointSet {
    Coord coords;
    IndexList ids;

    static PointSet from_coords(Coord c);
    PointSet subset(const IndexList& rows) const;
    Eigen::Index size() const { return coords.rows(); }
    void validate() const;  // N >= 1, all coordinates finite
};

// Fixed-size neighborhoods around sampled centroids. Rows of member_ids
// are ascending-original-index within the radius; under-full groups are
// padded by repeating the first member and flagged.
struct GroupIndex {
    IndexList centroid_ids;          // G entries, rows of the queried set
    IndexList member_ids;            // G*S entries, row-major
    Eigen::Index group_size = 0;     // S
    double radius = 0.0;
    std::vector<bool> padded;        // per group

    Eigen::Index groups() const { return static_cast<Eigen::Index>(centroid_ids.size()); }
    Eigen::Index member(Eigen::Index g, Eigen::Index s) const {
        return member_ids[static_cast<size_t>(g * group_size + s)];
    }
};

// Row index of the lexicographically smallest (x, y, z); the canonical
// farthest-point-sampling seed.
Eigen::Index lexicographic_min_index(const PointSet& points);

// Greedy max-min sampling under L2. First pick is `seed`; each next pick
// maximizes the distance to the picked set, ties to the lowest index.
IndexList fps(const PointSet& points, Eigen::Index k, Eigen::Index seed);

// Up to `s` points within `radius` of each centroid, ascending index;
// repeats the first hit when fewer than s qualify.
GroupIndex ball_query(const PointSet& points, const IndexList& centroids, double radius, Eigen::Index s);

// Bucketed variant with identical output contract; worthwhile when N is
// large relative to radius.
class UniformGrid {
public:
    UniformGrid(const PointSet& points, double cell_size);
    IndexList within_radius(const Eigen::RowVector3d& center, double radius) const;

private:
    struct Cell {
        long x, y, z;
        bool operator==(const Cell&) const = default;
    };
    struct CellHash {
        size_t operator()(const Cell& c) const;
    };
    const PointSet& points_;
    double cell_;
    std::unordered_map<Cell, IndexList, CellHash> buckets_;
};

GroupIndex ball_query_grid(const PointSet& points, const IndexList& centroids, double radius,
                           Eigen::Index s);

// k nearest source rows per query, ascending distance, ties to the lower
// index.
Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> knn(const PointSet& sources,
                                                                const PointSet& queries,
                                                                Eigen::Index k);

// Inverse-squared-distance weights over the k nearest sources, normalized
// to sum 1. A query coinciding with a source takes that source's value
// exactly (one-hot row).
InterpPlan idw_plan(const PointSet& sources, const PointSet& queries, Eigen::Index k);

// Plain-array interpolation of per-source features to query positions.
Eigen::MatrixXd idw_interpolate(const PointSet& sources, const Eigen::MatrixXd& features,
                                const PointSet& queries, Eigen::Index k);

}  // namespace pointattn::geom
