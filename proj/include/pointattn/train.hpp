#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pointattn/model.hpp"
#include "pointattn/pipeline.hpp"

namespace pointattn::train {

// Polynomial learning-rate decay between a fixed start and end rate.
struct Schedule {
    double lr_initial = 1e-3;
    double lr_final = 1e-5;
    long total_iterations = 1;
    double exponent = 0.7;
};

// lr(i) = (lr_initial - lr_final) * (1 - i/I)^exponent + lr_final.
// Valid for 0 <= i <= I; i = 0 is the pre-training rate, i = I lands on
// lr_final exactly.
double poly_lr(const Schedule& sched, long iteration);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;  // applied as L2 on the gradient
};

// Bias-corrected Adam over a parameter registry. Moments live here, one
// slot per parameter, in registry order.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Parameter>& params, AdamConfig cfg = {});

    void step(double lr);
    void zero_grad();
    long step_count() const { return step_; }

private:
    std::vector<Parameter>& params_;
    AdamConfig cfg_;
    std::vector<Eigen::ArrayXd> m_, v_;
    long step_ = 0;
};

struct TrainOptions {
    int epochs = 200;
    int batch_size = 16;
    size_t sample_points = 1024;
    std::uint64_t seed = 1;
    double lr_initial = 1e-3;
    double lr_final = 1e-5;
    double lr_exponent = 0.7;
    AdamConfig adam;
    std::string run_dir;  // when set: log.csv, best.ckpt, last.ckpt
    std::vector<std::pair<std::string, std::string>> checkpoint_meta;
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double train_oa = 0.0;
};

// Shuffle blocks, draw fixed-size samples, descend the cross-entropy
// loss with Adam under the polynomial schedule. Blocks must be
// normalized and labeled. Deterministic for a fixed seed.
std::vector<EpochStats> train_loop(const std::vector<pipeline::Block>& blocks, model::Network& net,
                                   const TrainOptions& opt);

std::string format_log_csv(const std::vector<EpochStats>& log);

}  // namespace pointattn::train
