#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace sdcf {

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;
    auto operator<=>(const Date&) const = default;
};

Date parse_date(const std::string& text); // YYYY-MM-DD, throws format_error
std::string format_date(const Date& d);

/// One daily bar. Raw feeds may violate OHLC ordering, so only positivity
/// is asserted.
struct Bar {
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0; // adjusted close
    double nav = 0.0;
};

inline constexpr int kBuy = 0;
inline constexpr int kHold = 1;
inline constexpr int kSell = 2;
inline constexpr std::size_t kNumSignalClasses = 3;

/// The five raw input channels of one window, in model order.
inline constexpr std::size_t kNumChannels = 5;

struct LabeledSeries {
    std::string symbol;
    std::vector<Bar> bars; // strictly increasing dates
    std::vector<int> labels; // same length as bars; the last day is Hold
    double hold_percentage = 0.0;
};

/// One training/test sample: the five channels (close, open, high, low,
/// nav) over W days, each independently L2-normalized, labeled at the last
/// day of the window.
struct WindowSample {
    std::vector<std::vector<double>> channels;
    int label = kHold;
    std::string symbol;
    Date date;      // the window's last day
    Date start;     // the window's first day
    double close = 0.0; // close at `date`, for trade simulation
};

struct ParseResult {
    std::vector<std::pair<std::string, std::vector<Bar>>> series;
    std::size_t dropped_rows = 0;
};

/// Reads "date,symbol,adj_close,open,low,high,nav" CSV; rows grouped by
/// symbol and sorted by date. Rows with missing or unparseable numeric
/// fields are dropped and counted.
ParseResult parse_csv(const std::string& path);

/// Labeled dataset round-trip: the input columns plus label,hold_percentage.
void write_labeled_csv(const std::string& path, const std::vector<LabeledSeries>& series);
std::vector<LabeledSeries> read_labeled_csv(const std::string& path);

struct LabelResult {
    std::vector<int> labels;
    double hold_percentage = 0.0;
    double best_ar = 0.0;
};

/// Grid-searched threshold labeling. For each holding percentage in `grid`,
/// day n is labeled by the next-day move: |change%| <= threshold is Hold,
/// otherwise Sell on a rise and Buy on a fall. The threshold whose label
/// stream simulates to the highest annualized return wins; ties go to the
/// smallest threshold. With `invert` the Buy/Sell assignment is swapped.
LabelResult label_series(const std::vector<double>& close, const std::vector<double>& grid,
                         bool invert = false);

/// Single-position trade simulation: Buy converts all cash to shares (whole
/// shares, one flat fee), Sell liquidates, the final day force-liquidates.
/// Returns the final capital.
double simulate_trades(const std::vector<int>& labels, const std::vector<double>& close,
                       double capital0 = 1e8, double fee = 10.0);

/// Annualized percentage growth of the starting capital under
/// simulate_trades, compounding over `trading_days` days per year.
double annualized_return(const std::vector<int>& labels, const std::vector<double>& close,
                         double capital0 = 1e8, double fee = 10.0,
                         double trading_days = 252.0);

/// Every window of length W whose last day carries a genuine label (the
/// padded final Hold is excluded). Channels are per-sample L2-normalized.
std::vector<WindowSample> make_windows(const LabeledSeries& series, std::size_t window);

struct FoldSpec {
    int train_start_year = 0; // trains on [start, start + train_span)
    int test_year = 0;        // the following year
};

struct Fold {
    FoldSpec spec;
    std::vector<WindowSample> train;
    std::vector<WindowSample> test;
};

/// Sliding walk-forward folds: train on `train_span` consecutive years,
/// test on the following year, slide by `step` years. Training windows lie
/// entirely inside the train years; test windows are the test year's
/// samples with the first `window` days of the year left unpredicted, so no
/// window ever crosses into the training span.
std::vector<Fold> walk_forward_splits(const LabeledSeries& series, std::size_t window,
                                      int train_span = 10, int step = 1);

} // namespace sdcf
