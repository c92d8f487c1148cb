#include "pointattn/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pointattn::eval {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {
    if (names_.empty()) throw std::invalid_argument("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(size_t num_classes)
    : ConfusionMatrix([num_classes] {
          std::vector<std::string> names;
          for (size_t i = 0; i < num_classes; ++i) names.push_back("class" + std::to_string(i));
          return names;
      }()) {}

void ConfusionMatrix::add(int ref, int pred, std::uint64_t count) {
    const int c = static_cast<int>(classes());
    if (ref < 0 || ref >= c || pred < 0 || pred >= c) {
        throw std::out_of_range("confusion matrix: label pair (" + std::to_string(ref) + ", " +
                                std::to_string(pred) + ") outside [0," + std::to_string(c) + ")");
    }
    counts_[static_cast<size_t>(ref) * classes() + static_cast<size_t>(pred)] += count;
}

void ConfusionMatrix::accumulate(const std::vector<int>& ref, const std::vector<int>& pred) {
    if (ref.size() != pred.size()) {
        throw std::invalid_argument("confusion matrix: " + std::to_string(ref.size()) +
                                    " reference labels vs " + std::to_string(pred.size()) + " predictions");
    }
    const int c = static_cast<int>(classes());
    for (size_t i = 0; i < ref.size(); ++i) {
        if (ref[i] < 0 || ref[i] >= c || pred[i] < 0 || pred[i] >= c) {
            throw std::out_of_range("confusion matrix: label out of range at position " +
                                    std::to_string(i));
        }
        counts_[static_cast<size_t>(ref[i]) * classes() + static_cast<size_t>(pred[i])] += 1;
    }
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes() != classes()) {
        throw std::invalid_argument("confusion matrix: merge width mismatch");
    }
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

std::uint64_t ConfusionMatrix::count(size_t ref, size_t pred) const {
    return counts_.at(ref * classes() + pred);
}

std::uint64_t ConfusionMatrix::row_sum(size_t ref) const {
    std::uint64_t s = 0;
    for (size_t j = 0; j < classes(); ++j) s += count(ref, j);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(size_t pred) const {
    std::uint64_t s = 0;
    for (size_t i = 0; i < classes(); ++i) s += count(i, pred);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (std::uint64_t v : counts_) s += v;
    return s;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");

    MetricsReport rep;
    std::uint64_t diag_total = 0;
    double f1_sum = 0.0;
    for (size_t c = 0; c < cm.classes(); ++c) {
        ClassMetrics m;
        const std::uint64_t diag = cm.count(c, c);
        const std::uint64_t rs = cm.row_sum(c);
        const std::uint64_t cs = cm.col_sum(c);
        m.support = rs;
        m.absent = rs == 0 && cs == 0;
        m.precision = cs > 0 ? static_cast<double>(diag) / static_cast<double>(cs) : 0.0;
        m.recall = rs > 0 ? static_cast<double>(diag) / static_cast<double>(rs) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        diag_total += diag;
        f1_sum += m.f1;
        rep.per_class.push_back(m);
    }
    rep.oa = static_cast<double>(diag_total) / static_cast<double>(cm.total());
    rep.avg_f1 = f1_sum / static_cast<double>(cm.classes());
    return rep;
}

namespace {

std::string pct(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
    return buf;
}

}  // namespace

std::string format_report(const ConfusionMatrix& cm, const MetricsReport& m) {
    std::ostringstream os;
    const size_t c = cm.classes();

    size_t w = 9;
    for (const auto& n : cm.names()) w = std::max(w, n.size() + 1);

    const auto cell = [&](const std::string& s) {
        os << s;
        for (size_t i = s.size(); i < w + 2; ++i) os << ' ';
    };

    cell("ref\\pred");
    for (size_t j = 0; j < c; ++j) cell(cm.names()[j]);
    os << '\n';
    for (size_t i = 0; i < c; ++i) {
        cell(cm.names()[i]);
        const std::uint64_t rs = cm.row_sum(i);
        for (size_t j = 0; j < c; ++j) {
            const double frac = rs > 0 ? static_cast<double>(cm.count(i, j)) / static_cast<double>(rs) : 0.0;
            cell(pct(frac) + " (" + std::to_string(cm.count(i, j)) + ")");
        }
        os << '\n';
    }

    cell("precision");
    for (size_t j = 0; j < c; ++j) cell(pct(m.per_class[j].precision));
    os << '\n';
    cell("recall");
    for (size_t j = 0; j < c; ++j) cell(pct(m.per_class[j].recall));
    os << '\n';
    cell("f1");
    for (size_t j = 0; j < c; ++j) {
        cell(m.per_class[j].absent ? "absent" : pct(m.per_class[j].f1));
    }
    os << '\n';
    os << "overall accuracy " << pct(m.oa) << "%, average F1 " << pct(m.avg_f1) << "%, "
       << cm.total() << " points\n";
    return os.str();
}

std::string report_csv(const ConfusionMatrix& cm, const MetricsReport& m) {
    std::ostringstream os;
    os << "class,precision,recall,f1,support,absent\n";
    char buf[160];
    for (size_t i = 0; i < cm.classes(); ++i) {
        const auto& pm = m.per_class[i];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%llu,%d\n", cm.names()[i].c_str(),
                      pm.precision, pm.recall, pm.f1,
                      static_cast<unsigned long long>(pm.support), pm.absent ? 1 : 0);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "overall,%.6f,,%.6f,%llu,\n", m.oa, m.avg_f1,
                  static_cast<unsigned long long>(cm.total()));
    os << buf;
    return os.str();
}

}  // namespace pointattn::eval
