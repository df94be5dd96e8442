#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sdcf {

/// Row = true class, column = predicted class.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::size_t> counts;

    explicit ConfusionMatrix(std::size_t v = 0) : num_classes(v), counts(v * v, 0) {}
    std::size_t& at(std::size_t t, std::size_t p) { return counts[t * num_classes + p]; }
    std::size_t at(std::size_t t, std::size_t p) const { return counts[t * num_classes + p]; }
    std::size_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          std::size_t num_classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

/// Per-class precision/recall/F1 plus their support-weighted averages.
/// Zero-denominator metrics are 0 by convention.
struct ClassReport {
    std::vector<ClassMetrics> per_class;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
};

ClassReport class_report(const ConfusionMatrix& cm);

struct SymbolFinance {
    std::string symbol;
    double true_ar = 0.0;
    double predicted_ar = 0.0;
    double abs_diff = 0.0;
};

struct FinanceReport {
    std::vector<SymbolFinance> rows;
    double mae = 0.0;
};

struct ArPair {
    std::string symbol;
    double true_ar = 0.0;
    double predicted_ar = 0.0;
};

/// Absolute AR differences per symbol and their mean across symbols.
FinanceReport finance_report(const std::vector<ArPair>& per_symbol);

} // namespace sdcf
