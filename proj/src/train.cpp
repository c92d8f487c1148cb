#include "pointattn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "pointattn/checkpoint.hpp"
#include "pointattn/rng.hpp"

namespace pointattn::train {

double poly_lr(const Schedule& sched, long iteration) {
    if (sched.total_iterations < 1) throw std::invalid_argument("poly_lr: total iterations >= 1 required");
    if (!(sched.lr_initial > sched.lr_final) || !(sched.lr_final > 0.0)) {
        throw std::invalid_argument("poly_lr: need lr_initial > lr_final > 0");
    }
    if (iteration < 0 || iteration > sched.total_iterations) {
        throw std::out_of_range("poly_lr: iteration " + std::to_string(iteration) + " outside [0, " +
                                std::to_string(sched.total_iterations) + "]");
    }
    const double frac = static_cast<double>(iteration) / static_cast<double>(sched.total_iterations);
    return (sched.lr_initial - sched.lr_final) * std::pow(1.0 - frac, sched.exponent) + sched.lr_final;
}

AdamOptimizer::AdamOptimizer(std::vector<Parameter>& params, AdamConfig cfg)
    : params_(params), cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params_) {
        m_.push_back(Eigen::ArrayXd::Zero(p.tensor.numel()));
        v_.push_back(Eigen::ArrayXd::Zero(p.tensor.numel()));
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

void AdamOptimizer::step(double lr) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& theta = params_[i].tensor.values();
        // parameters on disabled branches receive no grad; only decay acts
        Eigen::ArrayXd g = params_[i].tensor.has_grad()
                               ? (params_[i].tensor.grad() + cfg_.weight_decay * theta).eval()
                               : (cfg_.weight_decay * theta).eval();
        if (!g.allFinite()) {
            throw std::runtime_error("adam: non-finite gradient for parameter " + params_[i].name);
        }
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.square();
        theta -= lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + cfg_.eps);
    }
}

std::string format_log_csv(const std::vector<EpochStats>& log) {
    std::string out = "epoch,lr,loss,train_oa\n";
    char buf[160];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.loss, e.train_oa);
        out += buf;
    }
    return out;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

}  // namespace

std::vector<EpochStats> train_loop(const std::vector<pipeline::Block>& blocks, model::Network& net,
                                   const TrainOptions& opt) {
    if (blocks.empty()) throw std::invalid_argument("train_loop: no blocks");
    for (const auto& b : blocks) {
        if (!b.norm) throw std::invalid_argument("train_loop: blocks must be normalized");
        for (const auto& r : b.records) {
            if (!r.has_label()) throw std::invalid_argument("train_loop: unlabeled point in training data");
            if (r.label >= net.config().num_classes) {
                throw std::invalid_argument("train_loop: label " + std::to_string(r.label) +
                                            " outside the configured " +
                                            std::to_string(net.config().num_classes) + " classes");
            }
        }
    }
    if (opt.epochs < 0 || opt.batch_size < 1) {
        throw std::invalid_argument("train_loop: epochs >= 0 and batch_size >= 1 required");
    }

    const bool persist = !opt.run_dir.empty();
    if (persist) std::filesystem::create_directories(opt.run_dir);

    const long batches_per_epoch =
        static_cast<long>((blocks.size() + static_cast<size_t>(opt.batch_size) - 1) /
                          static_cast<size_t>(opt.batch_size));
    Schedule sched{opt.lr_initial, opt.lr_final,
                   std::max<long>(1, static_cast<long>(opt.epochs) * batches_per_epoch),
                   opt.lr_exponent};

    AdamOptimizer adam(net.parameters(), opt.adam);
    std::vector<EpochStats> log;
    double best_oa = -1.0;
    long iter = 0;

    if (persist && opt.epochs == 0) {
        model::save_checkpoint(opt.run_dir + "/best.ckpt", net, opt.checkpoint_meta);
    }

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(opt.seed, 0x100000 + static_cast<std::uint64_t>(epoch)));
        Rng sample_rng(derive_seed(opt.seed, 0x200000 + static_cast<std::uint64_t>(epoch)));

        std::vector<size_t> order(blocks.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        }

        double loss_sum = 0.0;
        size_t loss_count = 0;
        size_t correct = 0, total = 0;
        double lr = opt.lr_initial;

        for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(opt.batch_size)) {
            const size_t end = std::min(order.size(), pos + static_cast<size_t>(opt.batch_size));
            adam.zero_grad();

            Tensor batch_loss;
            for (size_t b = pos; b < end; ++b) {
                const pipeline::Block& block = blocks[order[b]];
                pipeline::Sample sample = pipeline::sample_fixed(block, opt.sample_points, sample_rng);
                Tensor logits = net.forward(sample, /*training=*/true);
                Tensor loss = cross_entropy(logits, sample.labels);
                batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;

                const auto pred = argmax_rows(logits);
                for (size_t i = 0; i < pred.size(); ++i) {
                    if (pred[i] == sample.labels[i]) ++correct;
                }
                total += pred.size();
                loss_sum += loss.value();
                ++loss_count;
            }
            batch_loss = scale(batch_loss, Tensor::scalar(1.0 / static_cast<double>(end - pos)));
            batch_loss.backward();

            ++iter;
            lr = poly_lr(sched, iter);
            adam.step(lr);
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.lr = lr;
        stats.loss = loss_sum / static_cast<double>(loss_count);
        stats.train_oa = static_cast<double>(correct) / static_cast<double>(total);
        log.push_back(stats);

        if (persist && stats.train_oa > best_oa) {
            best_oa = stats.train_oa;
            model::save_checkpoint(opt.run_dir + "/best.ckpt", net, opt.checkpoint_meta);
        }
    }

    if (persist) {
        model::save_checkpoint(opt.run_dir + "/last.ckpt", net, opt.checkpoint_meta);
        write_file(opt.run_dir + "/log.csv", format_log_csv(log));
    }
    return log;
}

}  // namespace pointattn::train
