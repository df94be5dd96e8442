#include "sdcf/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdcf/errors.hpp"

namespace sdcf {

namespace {

using nlohmann::json;

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw config_error("cannot create output directory " + dir);
}

std::string artifact_stem(const RunConfig& cfg, const std::string& symbol,
                          std::size_t fold) {
    return cfg.output_dir + "/" + symbol + "_" + std::to_string(fold) + "_" + cfg.preset;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

LabeledSeries find_symbol(std::vector<LabeledSeries>& all, const std::string& symbol) {
    for (LabeledSeries& s : all)
        if (s.symbol == symbol) return std::move(s);
    throw config_error("symbol not found in labeled data: " + symbol);
}

std::vector<LabeledSeries> load_labeled(const RunConfig& cfg) {
    std::vector<LabeledSeries> all = read_labeled_csv(cfg.labeled_file());
    if (!cfg.symbols.empty()) {
        std::vector<LabeledSeries> filtered;
        for (LabeledSeries& s : all)
            if (std::find(cfg.symbols.begin(), cfg.symbols.end(), s.symbol) !=
                cfg.symbols.end())
                filtered.push_back(std::move(s));
        if (filtered.empty())
            throw config_error("no requested symbol present in " + cfg.labeled_file());
        all = std::move(filtered);
    }
    std::sort(all.begin(), all.end(),
              [](const LabeledSeries& a, const LabeledSeries& b) {
                  return a.symbol < b.symbol;
              });
    return all;
}

TrainReport train_fold(const RunConfig& cfg, const LabeledSeries& series,
                       const Fold& fold, std::size_t fold_index) {
    Dataset data = dataset_from_windows(fold.train);
    if (data.num_samples() == 0)
        throw config_error(series.symbol + ": fold " + std::to_string(fold_index) +
                           " has no training samples");
    ArchConfig arch = make_arch(cfg, kNumChannels, kNumSignalClasses);
    OptimConfig optim = cfg.optim;
    optim.seed = fold_seed(cfg.seed, series.symbol, fold_index);
    return preset_is_baseline(cfg.preset) ? train_cnn_baseline(data, arch, optim)
                                          : train(data, arch, optim);
}

std::vector<int> predict(const SdcfModel& model, const std::vector<WindowSample>& samples) {
    Dataset data = dataset_from_windows(samples);
    Mat probs = infer(model, data.channels);
    std::vector<int> pred(probs.rows());
    for (std::size_t k = 0; k < probs.rows(); ++k) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < probs.cols(); ++v)
            if (probs(k, v) > probs(k, best)) best = v;
        pred[k] = static_cast<int>(best);
    }
    return pred;
}

void write_predictions_csv(const std::string& path, const std::vector<Date>& dates,
                           const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "date,true,pred\n";
    for (std::size_t i = 0; i < dates.size(); ++i)
        out << format_date(dates[i]) << ',' << y_true[i] << ',' << y_pred[i] << '\n';
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw config_error("config parse error: " + std::string(e.what()));
    }

    static const std::vector<std::string> known = {
        "data_path",  "labeled_path",     "output_dir", "symbols",
        "window_size", "preset",          "invert_labels", "seed",
        "hold_grid",  "fusion_ratio",     "train_span_years", "step_years",
        "trading_days", "prox_inference", "optim"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw config_error("unknown config key: " + key);

    RunConfig cfg;
    try {
        read_field(j, "data_path", cfg.data_path);
        read_field(j, "labeled_path", cfg.labeled_path);
        read_field(j, "output_dir", cfg.output_dir);
        read_field(j, "symbols", cfg.symbols);
        read_field(j, "window_size", cfg.window_size);
        read_field(j, "preset", cfg.preset);
        read_field(j, "invert_labels", cfg.invert_labels);
        read_field(j, "seed", cfg.seed);
        read_field(j, "hold_grid", cfg.hold_grid);
        read_field(j, "fusion_ratio", cfg.fusion_ratio);
        read_field(j, "train_span_years", cfg.train_span_years);
        read_field(j, "step_years", cfg.step_years);
        read_field(j, "trading_days", cfg.trading_days);
        read_field(j, "prox_inference", cfg.prox_inference);
        if (j.contains("optim")) {
            const json& o = j.at("optim");
            static const std::vector<std::string> known_optim = {
                "learning_rate", "beta1", "beta2",      "epsilon", "weight_decay",
                "epochs",        "batch_size", "mu",    "lambda"};
            for (const auto& [key, _] : o.items())
                if (std::find(known_optim.begin(), known_optim.end(), key) ==
                    known_optim.end())
                    throw config_error("unknown optim key: " + key);
            read_field(o, "learning_rate", cfg.optim.learning_rate);
            read_field(o, "beta1", cfg.optim.beta1);
            read_field(o, "beta2", cfg.optim.beta2);
            read_field(o, "epsilon", cfg.optim.epsilon);
            read_field(o, "weight_decay", cfg.optim.weight_decay);
            read_field(o, "epochs", cfg.optim.epochs);
            read_field(o, "batch_size", cfg.optim.batch_size);
            read_field(o, "mu", cfg.optim.mu);
            read_field(o, "lambda", cfg.optim.lambda);
        }
    } catch (const json::exception& e) {
        throw config_error("config field error: " + std::string(e.what()));
    }
    return cfg;
}

bool preset_is_baseline(const std::string& preset) { return preset == "cnn-baseline"; }

ArchConfig make_arch(const RunConfig& cfg, std::size_t num_channels,
                     std::size_t num_classes) {
    if (cfg.window_size != 5 && cfg.window_size != 10 && cfg.window_size != 20)
        throw config_error("window_size must be one of {5, 10, 20}");
    auto layer = [](std::size_t in, std::size_t out, std::size_t kernel,
                    ActivationKind act, bool pool) {
        return LayerSpec{ConvSpec{in, out, kernel}, act, pool};
    };
    const ActivationKind selu = ActivationKind::Selu;
    const ActivationKind id = ActivationKind::Identity;

    ArchConfig arch;
    if (cfg.preset == "sdcf1l") {
        arch.layers = {layer(1, 16, 3, id, true)};
    } else if (cfg.preset == "sdcf2l") {
        arch.layers = {layer(1, 8, 3, selu, true), layer(8, 16, 3, id, true)};
    } else if (cfg.preset == "sdcf3l") {
        arch.layers = {layer(1, 4, 11, selu, true), layer(4, 8, 7, selu, true),
                       layer(8, 16, 3, id, true)};
    } else if (cfg.preset == "sdcf4l") {
        arch.layers = {layer(1, 4, 13, selu, true), layer(4, 8, 11, selu, true),
                       layer(8, 16, 9, selu, true), layer(16, 32, 5, id, false)};
    } else if (cfg.preset == "cnn-baseline") {
        arch.layers = {layer(1, 4, 11, selu, true), layer(4, 8, 9, selu, true),
                       layer(8, 16, 7, id, true)};
    } else {
        throw config_error("unknown preset: " + cfg.preset);
    }
    arch.num_channels = num_channels;
    arch.window_size = cfg.window_size;
    arch.num_classes = num_classes;
    arch.mu = cfg.optim.mu;
    arch.lambda = cfg.optim.lambda;
    arch.prox_inference = cfg.prox_inference;

    const std::size_t feat = arch.feature_dim();
    const double raw = static_cast<double>(feat * num_channels) * cfg.fusion_ratio;
    arch.fusion_out = std::max<std::size_t>(1, static_cast<std::size_t>(raw + 0.5));
    arch.validate();
    return arch;
}

std::uint64_t fold_seed(std::uint64_t base, const std::string& symbol, std::size_t fold) {
    // FNV-1a over the symbol bytes and the fold number.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](unsigned char b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    for (char c : symbol) mix(static_cast<unsigned char>(c));
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((fold >> (8 * i)) & 0xff));
    return base ^ h;
}

Dataset dataset_from_windows(const std::vector<WindowSample>& samples) {
    Dataset data;
    if (samples.empty()) return data;
    const std::size_t window = samples[0].channels[0].size();
    data.channels.assign(kNumChannels, Mat(samples.size(), window));
    data.labels.resize(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].channels.size() != kNumChannels)
            throw std::invalid_argument("dataset_from_windows: channel count mismatch");
        for (std::size_t c = 0; c < kNumChannels; ++c)
            for (std::size_t i = 0; i < window; ++i)
                data.channels[c](k, i) = samples[k].channels[c][i];
        data.labels[k] = samples[k].label;
    }
    return data;
}

std::vector<LabelSummary> cmd_label(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw config_error("label: data_path not set");
    ensure_dir(cfg.output_dir);
    ParseResult parsed = parse_csv(cfg.data_path);
    if (parsed.dropped_rows > 0)
        std::fprintf(stderr, "warning: dropped %zu malformed rows\n", parsed.dropped_rows);

    std::vector<LabelSummary> summaries;
    std::vector<LabeledSeries> labeled;
    for (auto& [symbol, bars] : parsed.series) {
        if (!cfg.symbols.empty() &&
            std::find(cfg.symbols.begin(), cfg.symbols.end(), symbol) == cfg.symbols.end())
            continue;
        std::vector<double> close(bars.size());
        for (std::size_t i = 0; i < bars.size(); ++i) close[i] = bars[i].close;
        LabelResult res = label_series(close, cfg.hold_grid, cfg.invert_labels);
        LabeledSeries s;
        s.symbol = symbol;
        s.bars = std::move(bars);
        s.labels = std::move(res.labels);
        s.hold_percentage = res.hold_percentage;
        summaries.push_back({symbol, res.hold_percentage, res.best_ar, s.bars.size()});
        labeled.push_back(std::move(s));
    }
    if (labeled.empty()) throw config_error("label: no symbols matched");

    write_labeled_csv(cfg.labeled_file(), labeled);
    std::ofstream out(cfg.output_dir + "/label_summary.csv");
    out << "symbol,hold_percentage,best_ar,days\n";
    for (const LabelSummary& s : summaries)
        out << s.symbol << ',' << fmt17(s.hold_percentage) << ',' << fmt6(s.best_ar) << ','
            << s.days << '\n';
    return summaries;
}

TrainReport cmd_train(const RunConfig& cfg, const std::string& symbol, std::size_t fold) {
    ensure_dir(cfg.output_dir);
    std::vector<LabeledSeries> all = read_labeled_csv(cfg.labeled_file());
    LabeledSeries series = find_symbol(all, symbol);
    std::vector<Fold> folds =
        walk_forward_splits(series, cfg.window_size, cfg.train_span_years, cfg.step_years);
    if (fold >= folds.size())
        throw config_error("fold index " + std::to_string(fold) + " out of range (have " +
                           std::to_string(folds.size()) + " folds)");

    TrainReport report = train_fold(cfg, series, folds[fold], fold);
    const std::string stem = artifact_stem(cfg, symbol, fold);
    {
        std::ofstream out(stem + ".model.json");
        if (!out) throw std::runtime_error("cannot write " + stem + ".model.json");
        out << model_to_json(report.model);
    }
    write_loss_csv(stem + ".loss.csv", report.loss_curve);
    return report;
}

FoldReport cmd_evaluate(const RunConfig& cfg, const std::string& symbol, std::size_t fold,
                        const std::optional<std::string>& model_path) {
    ensure_dir(cfg.output_dir);
    std::vector<LabeledSeries> all = read_labeled_csv(cfg.labeled_file());
    LabeledSeries series = find_symbol(all, symbol);
    std::vector<Fold> folds =
        walk_forward_splits(series, cfg.window_size, cfg.train_span_years, cfg.step_years);
    if (fold >= folds.size())
        throw config_error("fold index " + std::to_string(fold) + " out of range (have " +
                           std::to_string(folds.size()) + " folds)");

    const std::string stem = artifact_stem(cfg, symbol, fold);
    const std::string path = model_path.value_or(stem + ".model.json");
    std::ifstream in(path);
    if (!in) throw config_error("cannot open model file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    SdcfModel model = model_from_json(buf.str());

    const Fold& f = folds[fold];
    FoldReport report;
    report.spec = f.spec;
    report.y_pred = predict(model, f.test);
    for (const WindowSample& s : f.test) {
        report.dates.push_back(s.date);
        report.y_true.push_back(s.label);
    }
    report.cm = confusion(report.y_true, report.y_pred, kNumSignalClasses);
    report.classes = class_report(report.cm);
    std::vector<double> closes;
    for (const WindowSample& s : f.test) closes.push_back(s.close);
    report.true_ar = annualized_return(report.y_true, closes, 1e8, 10.0, cfg.trading_days);
    report.predicted_ar =
        annualized_return(report.y_pred, closes, 1e8, 10.0, cfg.trading_days);

    write_predictions_csv(stem + ".predictions.csv", report.dates, report.y_true,
                          report.y_pred);
    return report;
}

BenchmarkResult cmd_benchmark(const RunConfig& cfg) {
    ensure_dir(cfg.output_dir);
    std::vector<LabeledSeries> all = load_labeled(cfg);

    BenchmarkResult result;
    for (const LabeledSeries& series : all) {
        try {
            std::vector<Fold> folds = walk_forward_splits(series, cfg.window_size,
                                                          cfg.train_span_years,
                                                          cfg.step_years);
            std::vector<Date> dates;
            std::vector<int> y_true;
            std::vector<int> y_pred;
            std::vector<double> closes;
            for (std::size_t i = 0; i < folds.size(); ++i) {
                TrainReport report = train_fold(cfg, series, folds[i], i);
                const std::string stem = artifact_stem(cfg, series.symbol, i);
                {
                    std::ofstream out(stem + ".model.json");
                    out << model_to_json(report.model);
                }
                write_loss_csv(stem + ".loss.csv", report.loss_curve);
                if (folds[i].test.empty()) continue;
                std::vector<int> pred = predict(report.model, folds[i].test);
                for (std::size_t k = 0; k < folds[i].test.size(); ++k) {
                    const WindowSample& s = folds[i].test[k];
                    dates.push_back(s.date);
                    y_true.push_back(s.label);
                    y_pred.push_back(pred[k]);
                    closes.push_back(s.close);
                }
            }
            if (y_true.empty())
                throw config_error(series.symbol + ": no test predictions produced");

            BenchmarkSymbolResult sym;
            sym.symbol = series.symbol;
            sym.cm = confusion(y_true, y_pred, kNumSignalClasses);
            sym.classes = class_report(sym.cm);
            sym.true_ar = annualized_return(y_true, closes, 1e8, 10.0, cfg.trading_days);
            sym.predicted_ar =
                annualized_return(y_pred, closes, 1e8, 10.0, cfg.trading_days);
            write_predictions_csv(cfg.output_dir + "/" + series.symbol + "_" + cfg.preset +
                                      ".predictions.csv",
                                  dates, y_true, y_pred);
            result.symbols.push_back(std::move(sym));
        } catch (const std::exception& e) {
            result.failures.emplace_back(series.symbol, e.what());
        }
    }

    if (!result.symbols.empty()) {
        std::vector<ArPair> ars;
        for (const BenchmarkSymbolResult& s : result.symbols)
            ars.push_back({s.symbol, s.true_ar, s.predicted_ar});
        result.finance = finance_report(ars);
    }

    // Combined per-symbol report mirroring the appendix layout.
    {
        std::ofstream out(cfg.output_dir + "/report.csv");
        out << "symbol,method,buy_precision,buy_recall,buy_f1,hold_precision,hold_recall,"
               "hold_f1,sell_precision,sell_recall,sell_f1,weighted_precision,"
               "weighted_recall,weighted_f1,true_ar,predicted_ar,abs_diff_ar\n";
        for (std::size_t i = 0; i < result.symbols.size(); ++i) {
            const BenchmarkSymbolResult& s = result.symbols[i];
            out << s.symbol << ',' << cfg.preset;
            for (std::size_t c = 0; c < kNumSignalClasses; ++c)
                out << ',' << fmt6(s.classes.per_class[c].precision) << ','
                    << fmt6(s.classes.per_class[c].recall) << ','
                    << fmt6(s.classes.per_class[c].f1);
            out << ',' << fmt6(s.classes.weighted_precision) << ','
                << fmt6(s.classes.weighted_recall) << ',' << fmt6(s.classes.weighted_f1)
                << ',' << fmt6(s.true_ar) << ',' << fmt6(s.predicted_ar) << ','
                << fmt6(result.finance.rows[i].abs_diff) << '\n';
        }
    }
    // Aggregate row: averages across symbols plus the AR mean absolute error.
    {
        std::ofstream out(cfg.output_dir + "/summary.csv");
        out << "method,symbols,avg_buy_f1,avg_hold_f1,avg_sell_f1,avg_weighted_precision,"
               "avg_weighted_recall,avg_weighted_f1,mae_ar\n";
        const double n = static_cast<double>(result.symbols.size());
        if (n > 0) {
            double bf1 = 0, hf1 = 0, sf1 = 0, wp = 0, wr = 0, wf1 = 0;
            for (const BenchmarkSymbolResult& s : result.symbols) {
                bf1 += s.classes.per_class[kBuy].f1;
                hf1 += s.classes.per_class[kHold].f1;
                sf1 += s.classes.per_class[kSell].f1;
                wp += s.classes.weighted_precision;
                wr += s.classes.weighted_recall;
                wf1 += s.classes.weighted_f1;
            }
            out << cfg.preset << ',' << result.symbols.size() << ',' << fmt6(bf1 / n) << ','
                << fmt6(hf1 / n) << ',' << fmt6(sf1 / n) << ',' << fmt6(wp / n) << ','
                << fmt6(wr / n) << ',' << fmt6(wf1 / n) << ','
                << fmt6(result.finance.mae) << '\n';
        }
    }
    // Pooled confusion counts in long form, one row per (symbol, true, pred).
    {
        std::ofstream out(cfg.output_dir + "/confusion.csv");
        out << "symbol,true_class,pred_class,count\n";
        for (const BenchmarkSymbolResult& s : result.symbols)
            for (std::size_t t = 0; t < kNumSignalClasses; ++t)
                for (std::size_t p = 0; p < kNumSignalClasses; ++p)
                    out << s.symbol << ',' << t << ',' << p << ',' << s.cm.at(t, p) << '\n';
    }
    if (!result.failures.empty()) {
        std::ofstream out(cfg.output_dir + "/failures.csv");
        out << "symbol,error\n";
        for (const auto& [symbol, reason] : result.failures) {
            std::string clean = reason;
            for (char& c : clean)
                if (c == ',' || c == '\n') c = ';';
            out << symbol << ',' << clean << '\n';
        }
    }
    return result;
}

} // namespace sdcf
