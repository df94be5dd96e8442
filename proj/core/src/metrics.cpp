#include "sdcf/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sdcf {

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          std::size_t num_classes) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("confusion: length mismatch");
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || static_cast<std::size_t>(y_true[i]) >= num_classes ||
            y_pred[i] < 0 || static_cast<std::size_t>(y_pred[i]) >= num_classes)
            throw std::invalid_argument("confusion: class index out of range");
        ++cm.at(static_cast<std::size_t>(y_true[i]), static_cast<std::size_t>(y_pred[i]));
    }
    return cm;
}

ClassReport class_report(const ConfusionMatrix& cm) {
    ClassReport report;
    const std::size_t v = cm.num_classes;
    report.per_class.resize(v);
    double total_support = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
        std::size_t tp = cm.at(c, c);
        std::size_t fp = 0;
        std::size_t fn = 0;
        for (std::size_t o = 0; o < v; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        ClassMetrics& m = report.per_class[c];
        m.support = tp + fn;
        m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall > 0.0)
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        total_support += static_cast<double>(m.support);
        report.weighted_precision += static_cast<double>(m.support) * m.precision;
        report.weighted_recall += static_cast<double>(m.support) * m.recall;
        report.weighted_f1 += static_cast<double>(m.support) * m.f1;
    }
    if (total_support > 0.0) {
        report.weighted_precision /= total_support;
        report.weighted_recall /= total_support;
        report.weighted_f1 /= total_support;
    }
    return report;
}

FinanceReport finance_report(const std::vector<ArPair>& per_symbol) {
    if (per_symbol.empty())
        throw std::invalid_argument("finance_report: no symbols");
    FinanceReport report;
    double sum = 0.0;
    for (const ArPair& p : per_symbol) {
        SymbolFinance row;
        row.symbol = p.symbol;
        row.true_ar = p.true_ar;
        row.predicted_ar = p.predicted_ar;
        row.abs_diff = std::abs(p.true_ar - p.predicted_ar);
        sum += row.abs_diff;
        report.rows.push_back(std::move(row));
    }
    report.mae = sum / static_cast<double>(per_symbol.size());
    return report;
}

} // namespace sdcf
