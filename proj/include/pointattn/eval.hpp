#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pointattn::eval {

// Reference classes on rows, predicted classes on columns.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<std::string> class_names);
    explicit ConfusionMatrix(size_t num_classes);

    void add(int ref, int pred, std::uint64_t count = 1);
    void accumulate(const std::vector<int>& ref, const std::vector<int>& pred);
    ConfusionMatrix& merge(const ConfusionMatrix& other);

    size_t classes() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::uint64_t count(size_t ref, size_t pred) const;
    std::uint64_t row_sum(size_t ref) const;
    std::uint64_t col_sum(size_t pred) const;
    std::uint64_t total() const;

private:
    std::vector<std::string> names_;
    std::vector<std::uint64_t> counts_;  // row-major C x C
};

struct ClassMetrics {
    double precision = 0.0;  // diagonal over column sum
    double recall = 0.0;     // diagonal over row sum
    double f1 = 0.0;
    std::uint64_t support = 0;
    bool absent = false;  // no reference and no predicted points
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double avg_f1 = 0.0;  // unweighted over all classes, absent ones score 0
    double oa = 0.0;      // trace over total
};

MetricsReport metrics(const ConfusionMatrix& cm);

// Fixed-width text table: count matrix with row percentages, then
// per-class precision/recall/F1 and the summary line.
std::string format_report(const ConfusionMatrix& cm, const MetricsReport& m);
std::string report_csv(const ConfusionMatrix& cm, const MetricsReport& m);

}  // namespace pointattn::eval
