#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pointattn/rng.hpp"

namespace pointattn::pipeline {

// One laser return: position, backscatter intensity, return ordinals and
// an optional reference label (-1 when absent).
struct PointRecord {
    double x = 0.0, y = 0.0, z = 0.0;
    double intensity = 0.0;
    int return_number = 1;
    int num_returns = 1;
    int label = -1;

    bool has_label() const { return label >= 0; }
    void validate(size_t line = 0) const;
};

// Per-channel min/max captured during normalization so coordinates can be
// restored when predictions are scattered back.
struct NormState {
    double min[4] = {0, 0, 0, 0};  // x, y, z, intensity
    double max[4] = {0, 0, 0, 0};
};

// Fixed-footprint window over the survey area; the unit of normalization
// and batching. point_ids index into the source record list.
struct Block {
    double x0 = 0.0, y0 = 0.0;
    double size = 0.0;
    std::vector<PointRecord> records;
    std::vector<size_t> point_ids;
    std::optional<NormState> norm;
};

// Fixed-size network input drawn from one normalized block. Feature
// columns are [x y z | x y z intensity ret num]: the first three drive
// geometry, the remaining six are the learned-feature channels.
struct Sample {
    Eigen::MatrixXd features;        // n x 9
    std::vector<int> labels;         // n, -1 where unlabeled
    std::vector<size_t> origin_ids;  // n, indices into the block's records
};

constexpr int kFeatureColumns = 9;

std::vector<PointRecord> read_pts(const std::string& path);
void write_pts(const std::string& path, const std::vector<PointRecord>& records);
// Writes records with one extra integer column per entry of `extra`
// (predicted labels, mismatch flags, ...).
void write_pts_with_columns(const std::string& path, const std::vector<PointRecord>& records,
                            const std::vector<std::vector<int>>& extra);

// Slides a block_size window on a stride grid anchored at the area min
// corner. drop_sparse removes blocks under min_points (training); with
// stride == block_size membership partitions the points exactly.
std::vector<Block> block_partition(const std::vector<PointRecord>& points, double block_size,
                                   double stride, size_t min_points, bool drop_sparse);

// Min-max normalizes x, y, z, intensity into [0,1] per block; a
// degenerate channel (max == min) maps to 0. Return ordinals pass
// through.
Block normalize_block(const Block& block);
Block denormalize_block(const Block& block);

// n points from the block: without replacement when the block is large
// enough, otherwise every point plus bootstrap draws.
Sample sample_fixed(const Block& block, size_t n, Rng& rng);

// Enough fixed-size samples to cover every record at least once;
// prediction passes consume these in order, later passes win.
std::vector<Sample> coverage_samples(const Block& block, size_t n, Rng& rng);

}  // namespace pointattn::pipeline
