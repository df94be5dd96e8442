#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "sdcf/errors.hpp"
#include "sdcf/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CliOverrides {
    std::string config_path;
    std::optional<std::string> preset;
    std::optional<std::size_t> window;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> data_path;
    std::optional<std::string> labeled_path;
    bool invert_labels = false;
};

sdcf::RunConfig resolve_config(const CliOverrides& ov) {
    sdcf::RunConfig cfg;
    if (!ov.config_path.empty()) cfg = sdcf::load_run_config(ov.config_path);
    if (ov.preset) cfg.preset = *ov.preset;
    if (ov.window) cfg.window_size = *ov.window;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.data_path) cfg.data_path = *ov.data_path;
    if (ov.labeled_path) cfg.labeled_path = *ov.labeled_path;
    if (ov.invert_labels) cfg.invert_labels = true;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SuperDeConFuse (SDCF): supervised convolutional transform learning "
                 "for multi-channel stock trading"};
    app.require_subcommand(1);
    app.fallthrough();

    CliOverrides ov;
    app.add_option("--config", ov.config_path, "JSON run configuration file");
    app.add_option("--preset", ov.preset,
                   "architecture preset (sdcf1l|sdcf2l|sdcf3l|sdcf4l|cnn-baseline)");
    app.add_option("--window", ov.window, "window size W (5, 10 or 20)");
    app.add_option("--seed", ov.seed, "base RNG seed");
    app.add_option("--out", ov.out_dir, "output directory");
    app.add_option("--data", ov.data_path, "raw input CSV");
    app.add_option("--labeled", ov.labeled_path, "labeled CSV path");
    app.add_flag("--invert-labels", ov.invert_labels,
                 "swap Buy/Sell at labeling time (prose interpretation)");

    CLI::App* cmd_label = app.add_subcommand("label", "grid-search labeling of a raw CSV");
    CLI::App* cmd_train = app.add_subcommand("train", "train one fold of one symbol");
    CLI::App* cmd_eval = app.add_subcommand("evaluate", "evaluate one trained fold");
    CLI::App* cmd_bench =
        app.add_subcommand("benchmark", "full walk-forward experiment over all symbols");

    std::string symbol;
    std::size_t fold = 0;
    std::optional<std::string> model_path;
    cmd_train->add_option("--symbol", symbol, "stock symbol")->required();
    cmd_train->add_option("--fold", fold, "fold index (0-based)")->required();
    cmd_eval->add_option("--symbol", symbol, "stock symbol")->required();
    cmd_eval->add_option("--fold", fold, "fold index (0-based)")->required();
    cmd_eval->add_option("--model", model_path, "model JSON (defaults to the train artifact)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        sdcf::RunConfig cfg = resolve_config(ov);
        if (cmd_label->parsed()) {
            auto summaries = sdcf::cmd_label(cfg);
            for (const sdcf::LabelSummary& s : summaries)
                std::printf("%s: hold%%=%g best_ar=%.4f days=%zu\n", s.symbol.c_str(),
                            s.hold_percentage, s.best_ar, s.days);
            std::printf("labeled data -> %s\n", cfg.labeled_file().c_str());
        } else if (cmd_train->parsed()) {
            sdcf::TrainReport report = sdcf::cmd_train(cfg, symbol, fold);
            std::printf("%s fold %zu: initial=%.6f final=%.6f epochs=%zu (%.1fs)\n",
                        symbol.c_str(), fold, report.initial_objective,
                        report.loss_curve.empty() ? report.initial_objective
                                                  : report.loss_curve.back(),
                        report.loss_curve.size(), report.wall_time_seconds);
        } else if (cmd_eval->parsed()) {
            sdcf::FoldReport report = sdcf::cmd_evaluate(cfg, symbol, fold, model_path);
            std::printf("%s fold %zu (test %d): weighted_f1=%.4f true_ar=%.4f "
                        "pred_ar=%.4f samples=%zu\n",
                        symbol.c_str(), fold, report.spec.test_year,
                        report.classes.weighted_f1, report.true_ar, report.predicted_ar,
                        report.y_true.size());
        } else if (cmd_bench->parsed()) {
            sdcf::BenchmarkResult result = sdcf::cmd_benchmark(cfg);
            for (const sdcf::BenchmarkSymbolResult& s : result.symbols)
                std::printf("%s: weighted_f1=%.4f true_ar=%.4f pred_ar=%.4f\n",
                            s.symbol.c_str(), s.classes.weighted_f1, s.true_ar,
                            s.predicted_ar);
            if (!result.symbols.empty())
                std::printf("MAE AR over %zu symbols: %.4f\n", result.symbols.size(),
                            result.finance.mae);
            for (const auto& [sym, reason] : result.failures)
                std::fprintf(stderr, "failed %s: %s\n", sym.c_str(), reason.c_str());
            std::printf("reports -> %s\n", cfg.output_dir.c_str());
            if (result.symbols.empty()) return kExitNumerical;
        }
        return kExitOk;
    } catch (const sdcf::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const sdcf::format_error& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitConfig;
    } catch (const sdcf::singular_transform_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const sdcf::divergence_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
