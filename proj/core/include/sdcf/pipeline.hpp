#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdcf/marketdata.hpp"
#include "sdcf/metrics.hpp"
#include "sdcf/model.hpp"
#include "sdcf/trainer.hpp"

namespace sdcf {

/// Everything a run needs: data locations, windowing, the architecture
/// preset and the optimizer settings. Loaded from a JSON file; a handful of
/// CLI flags override individual fields.
struct RunConfig {
    std::string data_path;                    // raw input CSV (label command)
    std::string labeled_path;                 // labeled CSV (defaults under output_dir)
    std::string output_dir = "out";
    std::vector<std::string> symbols;         // empty = every symbol in the file
    std::size_t window_size = 10;             // W in {5, 10, 20}
    std::string preset = "sdcf3l";
    bool invert_labels = false;
    std::uint64_t seed = 0;
    std::vector<double> hold_grid = {0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0};
    double fusion_ratio = 0.5;                // O = max(1, round(I*C*ratio))
    int train_span_years = 10;
    int step_years = 1;
    double trading_days = 252.0;
    bool prox_inference = true;
    OptimConfig optim;

    std::string labeled_file() const {
        return labeled_path.empty() ? output_dir + "/labeled.csv" : labeled_path;
    }
};

RunConfig load_run_config(const std::string& path); // throws config_error

/// Maps a preset name onto its layer stack and validates feasibility for
/// the requested window size. Presets: sdcf1l, sdcf2l, sdcf3l, sdcf4l,
/// cnn-baseline.
ArchConfig make_arch(const RunConfig& cfg, std::size_t num_channels,
                     std::size_t num_classes);
bool preset_is_baseline(const std::string& preset);

/// Deterministic per-(symbol, fold) seed mixing.
std::uint64_t fold_seed(std::uint64_t base, const std::string& symbol, std::size_t fold);

/// C-channel training matrices from a list of window samples.
Dataset dataset_from_windows(const std::vector<WindowSample>& samples);

struct LabelSummary {
    std::string symbol;
    double hold_percentage = 0.0;
    double best_ar = 0.0;
    std::size_t days = 0;
};

/// Labels every requested symbol of the raw CSV, writes the labeled dataset
/// and a per-symbol threshold summary under output_dir.
std::vector<LabelSummary> cmd_label(const RunConfig& cfg);

/// Trains one fold of one symbol and writes {symbol}_{fold}_{preset}
/// model/loss artifacts. Returns the training report.
TrainReport cmd_train(const RunConfig& cfg, const std::string& symbol, std::size_t fold);

/// Per-fold evaluation output.
struct FoldReport {
    FoldSpec spec;
    std::vector<Date> dates;
    std::vector<int> y_true;
    std::vector<int> y_pred;
    ConfusionMatrix cm;
    ClassReport classes;
    double true_ar = 0.0;
    double predicted_ar = 0.0;
};

/// Evaluates a trained fold model on its test year; writes the fold's
/// prediction CSV. `model_path` defaults to the cmd_train artifact.
FoldReport cmd_evaluate(const RunConfig& cfg, const std::string& symbol, std::size_t fold,
                        const std::optional<std::string>& model_path = std::nullopt);

struct BenchmarkSymbolResult {
    std::string symbol;
    ClassReport classes;
    ConfusionMatrix cm;
    double true_ar = 0.0;
    double predicted_ar = 0.0;
};

struct BenchmarkResult {
    std::vector<BenchmarkSymbolResult> symbols;
    FinanceReport finance;
    std::vector<std::pair<std::string, std::string>> failures; // symbol, reason
};

/// The full walk-forward experiment: per symbol, trains and evaluates every
/// fold, pools the 11 test years of predictions, and writes the
/// classification/finance/confusion report CSVs.
BenchmarkResult cmd_benchmark(const RunConfig& cfg);

} // namespace sdcf
