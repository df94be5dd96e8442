#include "sdcf/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sdcf/errors.hpp"

namespace sdcf {

namespace {

const char* kRawHeader = "date,symbol,adj_close,open,low,high,nav";
const char* kLabeledHeader = "date,symbol,adj_close,open,low,high,nav,label,hold_percentage";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_positive(const std::string& text, double& out) {
    if (text.empty()) return false;
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) return false;
    return std::isfinite(out) && out > 0.0;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

Date parse_date(const std::string& text) {
    auto digits = [&](std::size_t from, std::size_t to) {
        for (std::size_t i = from; i < to; ++i)
            if (text[i] < '0' || text[i] > '9') return false;
        return true;
    };
    Date d;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !digits(0, 4) ||
        !digits(5, 7) || !digits(8, 10))
        throw format_error("bad date: '" + text + "' (expected YYYY-MM-DD)");
    d.year = std::stoi(text.substr(0, 4));
    d.month = std::stoi(text.substr(5, 2));
    d.day = std::stoi(text.substr(8, 2));
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
        throw format_error("bad date: '" + text + "'");
    return d;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

ParseResult parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw format_error(path + ": empty file");
    if (split_csv_line(line) != split_csv_line(kRawHeader))
        throw format_error(path + ": expected header '" + kRawHeader + "'");

    ParseResult result;
    std::map<std::string, std::vector<Bar>> by_symbol;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 7) {
            ++result.dropped_rows;
            continue;
        }
        Bar bar;
        try {
            bar.date = parse_date(f[0]);
        } catch (const format_error&) {
            ++result.dropped_rows;
            continue;
        }
        if (f[1].empty() || !parse_positive(f[2], bar.close) ||
            !parse_positive(f[3], bar.open) || !parse_positive(f[4], bar.low) ||
            !parse_positive(f[5], bar.high) || !parse_positive(f[6], bar.nav)) {
            ++result.dropped_rows;
            continue;
        }
        by_symbol[f[1]].push_back(bar);
    }

    for (auto& [symbol, bars] : by_symbol) {
        std::stable_sort(bars.begin(), bars.end(),
                         [](const Bar& a, const Bar& b) { return a.date < b.date; });
        std::vector<Bar> unique;
        unique.reserve(bars.size());
        for (const Bar& b : bars) {
            if (!unique.empty() && unique.back().date == b.date) {
                ++result.dropped_rows; // duplicate date, keep the first row
                continue;
            }
            unique.push_back(b);
        }
        result.series.emplace_back(symbol, std::move(unique));
    }
    return result;
}

void write_labeled_csv(const std::string& path, const std::vector<LabeledSeries>& series) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << kLabeledHeader << '\n';
    for (const LabeledSeries& s : series) {
        for (std::size_t i = 0; i < s.bars.size(); ++i) {
            const Bar& b = s.bars[i];
            out << format_date(b.date) << ',' << s.symbol << ',' << fmt(b.close) << ','
                << fmt(b.open) << ',' << fmt(b.low) << ',' << fmt(b.high) << ','
                << fmt(b.nav) << ',' << s.labels[i] << ',' << fmt(s.hold_percentage)
                << '\n';
        }
    }
}

std::vector<LabeledSeries> read_labeled_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw format_error(path + ": empty file");
    if (split_csv_line(line) != split_csv_line(kLabeledHeader))
        throw format_error(path + ": expected header '" + kLabeledHeader + "'");

    std::map<std::string, LabeledSeries> by_symbol;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 9) throw format_error(path + ": malformed labeled row");
        Bar bar;
        bar.date = parse_date(f[0]);
        if (!parse_positive(f[2], bar.close) || !parse_positive(f[3], bar.open) ||
            !parse_positive(f[4], bar.low) || !parse_positive(f[5], bar.high) ||
            !parse_positive(f[6], bar.nav))
            throw format_error(path + ": non-positive price fields in labeled row");
        int label = 0;
        double hold_pct = 0.0;
        try {
            label = std::stoi(f[7]);
            hold_pct = std::stod(f[8]);
        } catch (const std::exception&) {
            throw format_error(path + ": unparseable label fields");
        }
        if (label < 0 || label >= static_cast<int>(kNumSignalClasses))
            throw format_error(path + ": label out of range");
        LabeledSeries& s = by_symbol[f[1]];
        s.symbol = f[1];
        s.bars.push_back(bar);
        s.labels.push_back(label);
        s.hold_percentage = hold_pct;
    }
    std::vector<LabeledSeries> out;
    out.reserve(by_symbol.size());
    for (auto& [_, s] : by_symbol) {
        if (!std::is_sorted(s.bars.begin(), s.bars.end(),
                            [](const Bar& a, const Bar& b) { return a.date < b.date; }))
            throw format_error(path + ": labeled rows not date-sorted for " + s.symbol);
        out.push_back(std::move(s));
    }
    return out;
}

LabelResult label_series(const std::vector<double>& close, const std::vector<double>& grid,
                         bool invert) {
    if (close.size() < 2)
        throw std::invalid_argument("label_series: need at least two closing prices");
    if (grid.empty()) throw std::invalid_argument("label_series: empty threshold grid");

    LabelResult best;
    bool have_best = false;
    for (double threshold : grid) {
        std::vector<int> labels(close.size(), kHold);
        for (std::size_t n = 0; n + 1 < close.size(); ++n) {
            const double change = std::abs((close[n + 1] - close[n]) / close[n]) * 100.0;
            if (change > threshold) {
                const bool rise = close[n + 1] > close[n];
                labels[n] = (rise != invert) ? kSell : kBuy;
            }
        }
        const double ar = annualized_return(labels, close);
        const bool wins = !have_best || ar > best.best_ar ||
                          (ar == best.best_ar && threshold < best.hold_percentage);
        if (wins) {
            best.labels = std::move(labels);
            best.hold_percentage = threshold;
            best.best_ar = ar;
            have_best = true;
        }
    }
    return best;
}

double simulate_trades(const std::vector<int>& labels, const std::vector<double>& close,
                       double capital0, double fee) {
    if (labels.size() != close.size())
        throw std::invalid_argument("simulate_trades: labels/closes length mismatch");
    if (close.empty()) throw std::invalid_argument("simulate_trades: empty series");

    double cash = capital0;
    double shares = 0.0;
    for (std::size_t n = 0; n < close.size(); ++n) {
        const double price = close[n];
        if (price <= 0.0)
            throw std::invalid_argument("simulate_trades: non-positive price");
        if (labels[n] == kBuy && shares == 0.0) {
            const double lots = std::floor((cash - fee) / price);
            if (lots > 0.0) {
                shares = lots;
                cash -= lots * price + fee;
            }
        } else if (labels[n] == kSell && shares > 0.0) {
            cash += shares * price - fee;
            shares = 0.0;
        }
    }
    if (shares > 0.0) cash += shares * close.back() - fee;
    return cash;
}

double annualized_return(const std::vector<int>& labels, const std::vector<double>& close,
                         double capital0, double fee, double trading_days) {
    const double final_capital = simulate_trades(labels, close, capital0, fee);
    const double years = static_cast<double>(close.size()) / trading_days;
    return (std::pow(final_capital / capital0, 1.0 / years) - 1.0) * 100.0;
}

std::vector<WindowSample> make_windows(const LabeledSeries& series, std::size_t window) {
    std::vector<WindowSample> out;
    if (window == 0 || series.bars.size() <= window) return out;
    const std::size_t n_bars = series.bars.size();
    for (std::size_t n = window - 1; n + 1 < n_bars; ++n) {
        WindowSample s;
        s.symbol = series.symbol;
        s.date = series.bars[n].date;
        s.start = series.bars[n - window + 1].date;
        s.label = series.labels[n];
        s.close = series.bars[n].close;
        s.channels.assign(kNumChannels, std::vector<double>(window));
        for (std::size_t i = 0; i < window; ++i) {
            const Bar& b = series.bars[n - window + 1 + i];
            s.channels[0][i] = b.close;
            s.channels[1][i] = b.open;
            s.channels[2][i] = b.high;
            s.channels[3][i] = b.low;
            s.channels[4][i] = b.nav;
        }
        for (std::vector<double>& ch : s.channels) {
            double norm_sq = 0.0;
            for (double v : ch) norm_sq += v * v;
            if (norm_sq > 0.0) {
                const double inv = 1.0 / std::sqrt(norm_sq);
                for (double& v : ch) v *= inv;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Fold> walk_forward_splits(const LabeledSeries& series, std::size_t window,
                                      int train_span, int step) {
    if (train_span < 1 || step < 1)
        throw config_error("walk_forward_splits: spans must be >= 1 year");
    if (series.bars.empty()) throw config_error("walk_forward_splits: empty series");

    const int first_year = series.bars.front().date.year;
    const int last_year = series.bars.back().date.year;
    if (last_year - first_year + 1 < train_span + 1)
        throw config_error("walk_forward_splits: need at least " +
                           std::to_string(train_span + 1) + " years of data, have " +
                           std::to_string(last_year - first_year + 1));

    const std::vector<WindowSample> all = make_windows(series, window);

    std::vector<Fold> folds;
    for (int start = first_year; start + train_span <= last_year; start += step) {
        Fold fold;
        fold.spec.train_start_year = start;
        fold.spec.test_year = start + train_span;
        const int train_last = start + train_span - 1;

        // Day index of each sample within its own calendar year, so the
        // first `window` days of the test year can be left unpredicted.
        std::size_t day_in_year = 0;
        int cur_year = series.bars.front().date.year;
        std::size_t sample_idx = 0;
        for (std::size_t n = 0; n < series.bars.size(); ++n) {
            if (series.bars[n].date.year != cur_year) {
                cur_year = series.bars[n].date.year;
                day_in_year = 0;
            }
            if (sample_idx < all.size() && all[sample_idx].date == series.bars[n].date) {
                const WindowSample& s = all[sample_idx];
                if (s.date.year >= start && s.date.year <= train_last &&
                    s.start.year >= start) {
                    fold.train.push_back(s);
                } else if (s.date.year == fold.spec.test_year && day_in_year >= window) {
                    fold.test.push_back(s);
                }
                ++sample_idx;
            }
            ++day_in_year;
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

} // namespace sdcf
