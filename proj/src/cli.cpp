#include "pointattn/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pointattn/checkpoint.hpp"
#include "pointattn/eval.hpp"
#include "pointattn/model.hpp"
#include "pointattn/pipeline.hpp"
#include "pointattn/rng.hpp"
#include "pointattn/selfcheck.hpp"
#include "pointattn/synth.hpp"
#include "pointattn/train.hpp"

namespace pointattn::cli {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

std::string default_run_dir() {
    const char* root = std::getenv("POINTATTN_RUN_ROOT");
    return std::string(root ? root : ".") + "/run";
}

struct SynthArgs {
    std::string out;
    double extent = 20.0;
    double density = 16.0;
    double noise = 0.02;
    std::uint64_t seed = 1;
    std::string classes = "ground,roof,facade,tree";
};

int run_synth(const SynthArgs& a) {
    synth::SceneSpec spec;
    spec.extent = a.extent;
    spec.density = a.density;
    spec.noise_sigma = a.noise;
    spec.seed = a.seed;
    spec.classes.clear();
    for (const auto& name : split_csv(a.classes)) {
        spec.classes.push_back(synth::scene_class_from_name(name));
    }
    const auto points = synth::generate(spec);
    pipeline::write_pts(a.out, points);
    std::cout << "wrote " << points.size() << " points (" << a.classes << ") to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string run_dir = default_run_dir();
    int epochs = 200;
    int batch_size = 16;
    std::uint64_t points = 1024;
    double block_size = 30.0;
    double stride = 10.0;
    std::uint64_t min_points = 250;
    double lr = 1e-3;
    double lr_final = 1e-5;
    double lr_exponent = 0.7;
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    int classes = 0;  // 0 = infer from the data
    std::string scale = "desk";
    bool no_pam = false, no_gam = false, no_msg = false;
    std::string softmax_mode = "row";
    int reduction = 0;  // 0 = preset default
    std::string class_names;
};

std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainArgs& a) {
    std::vector<std::pair<std::string, std::string>> kv;
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    kv.emplace_back("data", a.data);
    kv.emplace_back("epochs", std::to_string(a.epochs));
    kv.emplace_back("batch-size", std::to_string(a.batch_size));
    kv.emplace_back("points", std::to_string(a.points));
    kv.emplace_back("block-size", num(a.block_size));
    kv.emplace_back("stride", num(a.stride));
    kv.emplace_back("min-points", std::to_string(a.min_points));
    kv.emplace_back("lr", num(a.lr));
    kv.emplace_back("lr-final", num(a.lr_final));
    kv.emplace_back("lr-exponent", num(a.lr_exponent));
    kv.emplace_back("weight-decay", num(a.weight_decay));
    kv.emplace_back("seed", std::to_string(a.seed));
    kv.emplace_back("classes", std::to_string(a.classes));
    kv.emplace_back("scale", a.scale);
    kv.emplace_back("no-pam", a.no_pam ? "true" : "false");
    kv.emplace_back("no-gam", a.no_gam ? "true" : "false");
    kv.emplace_back("no-msg", a.no_msg ? "true" : "false");
    kv.emplace_back("softmax", a.softmax_mode);
    kv.emplace_back("reduction", std::to_string(a.reduction));
    if (!a.class_names.empty()) kv.emplace_back("class-names", a.class_names);
    return kv;
}

model::ModelConfig build_model_config(const TrainArgs& a, int num_classes) {
    model::ModelConfig cfg = a.scale == "paper" ? model::ModelConfig::paper(num_classes)
                                                : model::ModelConfig::desk(num_classes);
    cfg.enable_pam = !a.no_pam;
    cfg.enable_gam = !a.no_gam;
    cfg.enable_msg = !a.no_msg;
    cfg.softmax_mode = a.softmax_mode == "global" ? SoftmaxMode::kGlobal : SoftmaxMode::kRow;
    if (a.reduction > 0) cfg.attention_reduction = a.reduction;
    return cfg;
}

int run_train(const TrainArgs& a) {
    const auto points = pipeline::read_pts(a.data);
    int max_label = -1;
    for (const auto& p : points) {
        if (!p.has_label()) {
            throw std::runtime_error("training data has unlabeled points: " + a.data);
        }
        max_label = std::max(max_label, p.label);
    }
    const int num_classes = a.classes > 0 ? a.classes : max_label + 1;
    if (max_label >= num_classes) {
        throw std::runtime_error("label " + std::to_string(max_label) + " exceeds --classes " +
                                 std::to_string(num_classes));
    }

    auto blocks = pipeline::block_partition(points, a.block_size, a.stride, a.min_points, true);
    if (blocks.empty()) {
        throw std::runtime_error("no block kept at least " + std::to_string(a.min_points) +
                                 " points; lower --min-points or enlarge --block-size");
    }
    for (auto& b : blocks) b = pipeline::normalize_block(b);

    model::Network net(build_model_config(a, num_classes), a.seed);

    train::TrainOptions opt;
    opt.epochs = a.epochs;
    opt.batch_size = a.batch_size;
    opt.sample_points = a.points;
    opt.seed = a.seed;
    opt.lr_initial = a.lr;
    opt.lr_final = a.lr_final;
    opt.lr_exponent = a.lr_exponent;
    opt.adam.weight_decay = a.weight_decay;
    opt.run_dir = a.run_dir;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", a.block_size);
    opt.checkpoint_meta.emplace_back("block_size", buf);
    opt.checkpoint_meta.emplace_back("sample_points", std::to_string(a.points));
    opt.checkpoint_meta.emplace_back("min_points", std::to_string(a.min_points));
    if (!a.class_names.empty()) opt.checkpoint_meta.emplace_back("class_names", a.class_names);

    std::filesystem::create_directories(a.run_dir);
    {
        std::ofstream cfg_out(a.run_dir + "/config.txt");
        if (!cfg_out) throw std::runtime_error("cannot write " + a.run_dir + "/config.txt");
        for (const auto& [k, v] : train_config_entries(a)) cfg_out << k << '=' << v << '\n';
    }

    const auto log = train::train_loop(blocks, net, opt);
    if (log.empty()) {
        std::cout << "0 epochs requested; wrote initial checkpoint to " << a.run_dir << "\n";
    } else {
        std::cout << "trained " << log.size() << " epochs on " << blocks.size() << " blocks; final loss "
                  << log.back().loss << ", train OA " << 100.0 * log.back().train_oa << "%\n"
                  << "run directory: " << a.run_dir << "\n";
    }
    return 0;
}

struct PredictArgs {
    std::string data;
    std::string checkpoint;
    std::string out;
    double block_size = 0.0;  // 0 = from checkpoint
    std::uint64_t points = 0;
    std::uint64_t seed = 1;
    int classes = 0;
};

int run_predict(const PredictArgs& a) {
    std::vector<std::pair<std::string, std::string>> meta;
    model::Network net = model::load_checkpoint(a.checkpoint, &meta);
    if (a.classes > 0 && a.classes != net.config().num_classes) {
        throw std::runtime_error("config mismatch: checkpoint was trained with " +
                                 std::to_string(net.config().num_classes) + " classes, --classes says " +
                                 std::to_string(a.classes));
    }
    const auto meta_value = [&](const std::string& key, const std::string& fallback) {
        for (const auto& [k, v] : meta) {
            if (k == key) return v;
        }
        return fallback;
    };
    const double block_size = a.block_size > 0.0 ? a.block_size : std::stod(meta_value("block_size", "30"));
    const size_t sample_points =
        a.points > 0 ? a.points : static_cast<size_t>(std::stoul(meta_value("sample_points", "1024")));

    const auto points = pipeline::read_pts(a.data);
    // test mode: non-overlapping tiling, keep every block
    auto blocks = pipeline::block_partition(points, block_size, block_size, 0, false);

    std::vector<int> predictions(points.size(), -1);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
        const pipeline::Block normalized = pipeline::normalize_block(blocks[bi]);
        Rng rng(derive_seed(a.seed, 0x9000 + bi));
        for (const auto& sample : pipeline::coverage_samples(normalized, sample_points, rng)) {
            const Tensor logits = net.forward(sample, /*training=*/false);
            const auto pred = argmax_rows(logits);
            for (size_t i = 0; i < pred.size(); ++i) {
                // later samples overwrite: the last prediction wins
                predictions[normalized.point_ids[sample.origin_ids[i]]] = pred[i];
            }
        }
    }
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] < 0) {
            throw std::logic_error("point " + std::to_string(i) + " received no prediction");
        }
    }

    pipeline::write_pts_with_columns(a.out, points, {predictions});
    std::cout << "predicted " << points.size() << " points into " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string ref;
    std::string pred;
    std::string csv;
    std::string error_map;
    std::string class_names;
};

// Last whitespace-separated column of each line, which is where predict
// writes its labels.
std::vector<int> read_last_column(const std::string& path, size_t expected) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prediction file: " + path);
    std::vector<int> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string tok, last;
        size_t count = 0;
        while (fields >> tok) {
            last = tok;
            ++count;
        }
        if (count < 7) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": no prediction column found");
        }
        out.push_back(std::stoi(last));
    }
    if (out.size() != expected) {
        throw std::runtime_error(path + ": " + std::to_string(out.size()) + " predictions for " +
                                 std::to_string(expected) + " reference points");
    }
    return out;
}

int run_eval(const EvalArgs& a) {
    const auto ref_points = pipeline::read_pts(a.ref);
    std::vector<int> ref_labels;
    ref_labels.reserve(ref_points.size());
    for (size_t i = 0; i < ref_points.size(); ++i) {
        if (!ref_points[i].has_label()) {
            throw std::runtime_error(a.ref + ": point " + std::to_string(i) + " has no reference label");
        }
        ref_labels.push_back(ref_points[i].label);
    }
    const auto pred_labels = read_last_column(a.pred, ref_points.size());

    int max_label = 0;
    for (int l : ref_labels) max_label = std::max(max_label, l);
    for (int l : pred_labels) max_label = std::max(max_label, l);

    std::vector<std::string> names = split_csv(a.class_names);
    if (names.empty() || (names.size() == 1 && names[0].empty())) {
        names.clear();
        for (int i = 0; i <= max_label; ++i) names.push_back("class" + std::to_string(i));
    } else if (static_cast<int>(names.size()) <= max_label) {
        throw std::runtime_error("--class-names lists " + std::to_string(names.size()) +
                                 " names but labels reach " + std::to_string(max_label));
    }

    eval::ConfusionMatrix cm(names);
    cm.accumulate(ref_labels, pred_labels);
    const auto report = eval::metrics(cm);
    std::cout << eval::format_report(cm, report);

    if (!a.csv.empty()) {
        std::ofstream out(a.csv);
        if (!out) throw std::runtime_error("cannot write " + a.csv);
        out << eval::report_csv(cm, report);
    }
    if (!a.error_map.empty()) {
        std::vector<int> mismatch(ref_labels.size());
        for (size_t i = 0; i < ref_labels.size(); ++i) {
            mismatch[i] = ref_labels[i] == pred_labels[i] ? 0 : 1;
        }
        pipeline::write_pts_with_columns(a.error_map, ref_points, {pred_labels, mismatch});
    }
    return 0;
}

int run_gradcheck(std::uint64_t seed) {
    const auto results = selfcheck::gradient_checks(seed);
    size_t failures = 0;
    for (const auto& r : results) {
        std::printf("%-22s max rel err %.3e  (tol %.0e)  %s\n", r.name.c_str(), r.max_rel_err,
                    r.tolerance, r.pass ? "ok" : "FAIL");
        if (!r.pass) ++failures;
    }
    if (failures) {
        std::cerr << failures << " gradient check(s) failed\n";
        return 1;
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"point-cloud semantic labeling with point/group self-attention"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic scene (.pts)");
    synth_cmd->set_config("--config");
    synth_cmd->add_option("--out", synth_args.out, "output .pts path")->required();
    synth_cmd->add_option("--extent", synth_args.extent, "square scene side, meters");
    synth_cmd->add_option("--density", synth_args.density, "points per square meter");
    synth_cmd->add_option("--noise", synth_args.noise, "surface noise sigma, meters");
    synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
    synth_cmd->add_option("--classes", synth_args.classes,
                          "comma list from ground,roof,facade,tree,car,powerline");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train on a labeled .pts file");
    train_cmd->set_config("--config");
    train_cmd->add_option("--data", train_args.data, "labeled .pts input")->required();
    train_cmd->add_option("--run-dir", train_args.run_dir,
                          "output directory (default $POINTATTN_RUN_ROOT/run)");
    train_cmd->add_option("--epochs", train_args.epochs);
    train_cmd->add_option("--batch-size", train_args.batch_size);
    train_cmd->add_option("--points", train_args.points, "points sampled per block");
    train_cmd->add_option("--block-size", train_args.block_size, "block side, meters");
    train_cmd->add_option("--stride", train_args.stride, "block stride, meters");
    train_cmd->add_option("--min-points", train_args.min_points, "drop sparser training blocks");
    train_cmd->add_option("--lr", train_args.lr, "initial learning rate");
    train_cmd->add_option("--lr-final", train_args.lr_final, "learning rate at the last iteration");
    train_cmd->add_option("--lr-exponent", train_args.lr_exponent, "polynomial decay exponent");
    train_cmd->add_option("--weight-decay", train_args.weight_decay);
    train_cmd->add_option("--seed", train_args.seed);
    train_cmd->add_option("--classes", train_args.classes, "class count (0 = infer from labels)");
    train_cmd->add_option("--scale", train_args.scale, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    train_cmd->add_flag("--no-pam", train_args.no_pam, "disable point attention");
    train_cmd->add_flag("--no-gam", train_args.no_gam, "disable group attention");
    train_cmd->add_flag("--no-msg", train_args.no_msg, "disable multiscale grouping");
    train_cmd->add_option("--softmax", train_args.softmax_mode, "attention normalization: row or global")
        ->check(CLI::IsMember({"row", "global"}));
    train_cmd->add_option("--reduction", train_args.reduction,
                          "point-attention projection width (0 = preset)");
    train_cmd->add_option("--class-names", train_args.class_names, "comma list stored with the model");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "label a .pts file with a trained checkpoint");
    predict_cmd->set_config("--config");
    predict_cmd->add_option("--data", predict_args.data, ".pts input")->required();
    predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "trained checkpoint")->required();
    predict_cmd->add_option("--out", predict_args.out, "output .pts with predicted labels")->required();
    predict_cmd->add_option("--block-size", predict_args.block_size, "override stored block size");
    predict_cmd->add_option("--points", predict_args.points, "override stored sample size");
    predict_cmd->add_option("--seed", predict_args.seed, "coverage sampling seed");
    predict_cmd->add_option("--classes", predict_args.classes,
                            "expected class count; must match the checkpoint");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against reference labels");
    eval_cmd->set_config("--config");
    eval_cmd->add_option("--ref", eval_args.ref, "reference .pts with labels")->required();
    eval_cmd->add_option("--pred", eval_args.pred, "prediction file (last column)")->required();
    eval_cmd->add_option("--csv", eval_args.csv, "also write metrics as CSV");
    eval_cmd->add_option("--error-map", eval_args.error_map,
                         "write per-point predictions plus 0/1 mismatch column");
    eval_cmd->add_option("--class-names", eval_args.class_names, "comma list for the report");

    std::uint64_t gradcheck_seed = 7;
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck_cmd->add_option("--seed", gradcheck_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (predict_cmd->parsed()) return run_predict(predict_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (gradcheck_cmd->parsed()) return run_gradcheck(gradcheck_seed);
        std::cerr << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace pointattn::cli
