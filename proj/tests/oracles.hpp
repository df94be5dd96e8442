// Independent reference implementations used as test oracles. Everything in
// here deliberately avoids the library's own code paths: singular values
// come from a hand-rolled Jacobi eigensolver, determinants from a hand-rolled
// LU, convolutions from explicit padded sliding windows, trading returns
// from a separately written simulator.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sdcf/mat.hpp"
#include "sdcf/trainer.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// linear algebra

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, std::size_t n) {
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = 0.5 * (a[q * n + q] - a[p * n + p]) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
    return eig;
}

/// Singular values of an arbitrary matrix from the Gram matrix of its
/// smaller side.
inline std::vector<double> singular_values(const sdcf::Mat& t) {
    const std::size_t m = t.rows();
    const std::size_t n = t.cols();
    const std::size_t k = std::min(m, n);
    std::vector<double> gram(k * k, 0.0);
    if (n <= m) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < m; ++r) s += t(r, i) * t(r, j);
                gram[i * n + j] = s;
            }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < n; ++c) s += t(i, c) * t(j, c);
                gram[i * m + j] = s;
            }
    }
    std::vector<double> eig = jacobi_eigenvalues(std::move(gram), k);
    for (double& v : eig) v = std::sqrt(std::max(v, 0.0));
    std::sort(eig.begin(), eig.end());
    return eig;
}

inline double logdet_via_singular_values(const sdcf::Mat& t) {
    double s = 0.0;
    for (double sv : singular_values(t)) s += std::log(sv);
    return s;
}

/// ln |det| of a square matrix by LU with partial pivoting.
inline double log_abs_det_lu(const sdcf::Mat& t) {
    const std::size_t n = t.rows();
    std::vector<double> a(t.values());
    double logdet = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (pivot != col)
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
        const double d = a[col * n + col];
        logdet += std::log(std::abs(d));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / d;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
        }
    }
    return logdet;
}

/// Sign of det for square matrices (same LU).
inline double det_sign_lu(const sdcf::Mat& t) {
    const std::size_t n = t.rows();
    std::vector<double> a(t.values());
    double sign = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (pivot != col) {
            sign = -sign;
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
        }
        const double d = a[col * n + col];
        if (d < 0.0) sign = -sign;
        if (d == 0.0) return 0.0;
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / d;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
        }
    }
    return sign;
}

// ---------------------------------------------------------------------------
// signals

/// Sliding-window convolution over an explicitly built zero-padded copy.
inline std::vector<double> conv_naive(const std::vector<double>& kernel,
                                      const std::vector<double>& signal,
                                      std::size_t padding) {
    std::vector<double> padded(signal.size() + 2 * padding, 0.0);
    std::copy(signal.begin(), signal.end(), padded.begin() + static_cast<long>(padding));
    std::vector<double> out;
    for (std::size_t i = 0; i + kernel.size() <= padded.size() && out.size() < signal.size();
         ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < kernel.size(); ++j) s += kernel[j] * padded[i + j];
        out.push_back(s);
    }
    return out;
}

inline std::vector<double> maxpool_naive(const std::vector<double>& x) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) out.push_back(std::max(x[i], x[i + 1]));
    return out;
}

// ---------------------------------------------------------------------------
// calculus

/// Central finite differences of `eval` with respect to every entry of
/// `param` (mutated in place and restored).
inline sdcf::Mat fd_gradient(const std::function<double()>& eval, sdcf::Mat& param,
                             double h = 1e-6) {
    sdcf::Mat g(param.rows(), param.cols());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double orig = param.values()[i];
        param.values()[i] = orig + h;
        const double fp = eval();
        param.values()[i] = orig - h;
        const double fm = eval();
        param.values()[i] = orig;
        g.values()[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Block-level relative error: max |a-b| over the larger of the blocks'
/// max magnitudes.
inline double block_rel_error(const sdcf::Mat& a, const sdcf::Mat& b) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a.values()[i] - b.values()[i]));
        scale = std::max({scale, std::abs(a.values()[i]), std::abs(b.values()[i])});
    }
    return diff / std::max(scale, 1e-12);
}

/// Minimize a convex 1-D function over [lo, hi] by ternary search.
inline double ternary_argmin(const std::function<double(double)>& f, double lo, double hi,
                             int iters = 300) {
    for (int i = 0; i < iters; ++i) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// optimization

/// Stand-alone Adam, written separately from the library's update.
struct MiniAdam {
    double lr, b1, b2, eps, wd;
    std::vector<double> m, v;
    std::size_t t = 0;

    MiniAdam(std::size_t n, double lr_, double b1_, double b2_, double eps_, double wd_)
        : lr(lr_), b1(b1_), b2(b2_), eps(eps_), wd(wd_), m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& param, const std::vector<double>& grad) {
        ++t;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double g = grad[i] + wd * param[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mh = m[i] / (1.0 - std::pow(b1, static_cast<double>(t)));
            const double vh = v[i] / (1.0 - std::pow(b2, static_cast<double>(t)));
            param[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
};

// ---------------------------------------------------------------------------
// trading

/// Fresh implementation of the single-position trade simulation.
inline double simulate_final_capital(const std::vector<int>& labels,
                                     const std::vector<double>& close, double capital0,
                                     double fee) {
    double cash = capital0;
    long long held = 0;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] == 0 && held == 0) { // Buy
            const long long lots = static_cast<long long>((cash - fee) / close[n]);
            if (lots > 0) {
                held = lots;
                cash -= static_cast<double>(lots) * close[n] + fee;
            }
        } else if (labels[n] == 2 && held > 0) { // Sell
            cash += static_cast<double>(held) * close[n] - fee;
            held = 0;
        }
    }
    if (held > 0) cash += static_cast<double>(held) * close.back() - fee;
    return cash;
}

inline double annualized_return_of(const std::vector<int>& labels,
                                   const std::vector<double>& close,
                                   double capital0 = 1e8, double fee = 10.0,
                                   double trading_days = 252.0) {
    const double final_capital = simulate_final_capital(labels, close, capital0, fee);
    return (std::pow(final_capital / capital0,
                     trading_days / static_cast<double>(close.size())) -
            1.0) *
           100.0;
}

/// Exhaustive threshold labeling: every grid value is expanded into a full
/// label stream and simulated; the best annualized return wins, ties to the
/// smallest threshold.
struct BruteLabelResult {
    std::vector<int> labels;
    double threshold = 0.0;
    double ar = 0.0;
};

inline BruteLabelResult brute_force_labeling(const std::vector<double>& close,
                                             const std::vector<double>& grid,
                                             bool invert = false) {
    BruteLabelResult best;
    bool first = true;
    for (double x : grid) {
        std::vector<int> labels(close.size(), 1);
        for (std::size_t n = 0; n + 1 < close.size(); ++n) {
            const double change = std::abs((close[n + 1] - close[n]) / close[n]) * 100.0;
            if (change > x) {
                int label = close[n + 1] > close[n] ? 2 : 0;
                if (invert) label = label == 2 ? 0 : 2;
                labels[n] = label;
            }
        }
        const double ar = annualized_return_of(labels, close);
        if (first || ar > best.ar || (ar == best.ar && x < best.threshold)) {
            best = {std::move(labels), x, ar};
            first = false;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// random instances

inline sdcf::Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    sdcf::Mat m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

/// Random orthogonal matrix by Gram-Schmidt on a random Gaussian matrix.
inline sdcf::Mat random_orthogonal(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    sdcf::Mat q(n, n);
    for (double& v : q.values()) v = gauss(rng);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += q(r, c) * q(r, prev);
            for (std::size_t r = 0; r < n; ++r) q(r, c) -= dot * q(r, prev);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += q(r, c) * q(r, c);
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < n; ++r) q(r, c) /= norm;
    }
    return q;
}

/// A random matrix re-drawn until its smallest singular value clears
/// `min_sv` (keeps log-det finite-difference checks well conditioned).
inline sdcf::Mat well_conditioned_mat(std::size_t rows, std::size_t cols,
                                      std::mt19937_64& rng, double min_sv = 0.05) {
    for (;;) {
        sdcf::Mat m = random_mat(rows, cols, rng);
        const std::vector<double> sv = singular_values(m);
        if (sv.front() > min_sv) return m;
    }
}

// ---------------------------------------------------------------------------
// planted synthetic task

/// Two-channel windows whose class is the sign of a fixed 3-tap filter
/// response on channel 1; a class-aligned bump keeps the task well inside
/// the learnable regime, and near-zero responses are re-drawn.
struct PlantedData {
    sdcf::Dataset train;
    sdcf::Dataset test;
};

inline PlantedData make_planted_dataset(std::size_t n_train, std::size_t n_test,
                                        std::size_t window, std::uint64_t seed) {
    const std::vector<double> taps = {0.8, 0.5, -0.3};
    std::vector<double> bump1(window, 0.0);
    std::vector<double> bump2(window, 0.0);
    for (std::size_t i = 0; i < window; ++i) {
        const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(window);
        bump1[i] = std::sin(3.14159265358979323846 * x);
        bump2[i] = x - 0.5;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);

    auto response = [&](const std::vector<double>& x) {
        double sum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < taps.size(); ++j) {
                const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(i + j) - 1;
                if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(x.size()))
                    s += taps[j] * x[static_cast<std::size_t>(idx)];
            }
            sum += s;
        }
        return sum / static_cast<double>(x.size());
    };

    auto fill = [&](sdcf::Dataset& out, std::size_t count) {
        out.channels.assign(2, sdcf::Mat(count, window));
        out.labels.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            std::vector<double> ch1(window);
            double r = 0.0;
            do {
                for (double& v : ch1) v = dist(rng);
                r = response(ch1);
            } while (std::abs(r) < 0.08);
            const double sign = r > 0.0 ? 1.0 : -1.0;
            std::vector<double> ch2(window);
            for (double& v : ch2) v = dist(rng);
            for (std::size_t i = 0; i < window; ++i) {
                ch1[i] += 0.35 * sign * bump1[i];
                ch2[i] += 0.35 * sign * bump2[i];
            }
            // bump1 has a positive response under the taps, so adding it in
            // the direction of `sign` preserves sign(response(ch1)).
            out.labels[k] = response(ch1) > 0.0 ? 1 : 0;
            auto normalize = [](std::vector<double>& v) {
                double n2 = 0.0;
                for (double x : v) n2 += x * x;
                if (n2 > 0.0)
                    for (double& x : v) x /= std::sqrt(n2);
            };
            normalize(ch1);
            normalize(ch2);
            for (std::size_t i = 0; i < window; ++i) {
                out.channels[0](k, i) = ch1[i];
                out.channels[1](k, i) = ch2[i];
            }
        }
    };
    PlantedData data;
    fill(data.train, n_train);
    fill(data.test, n_test);
    return data;
}

/// Accuracy of arg-max predictions against labels.
inline double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        if (y_true[i] == y_pred[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

} // namespace oracle
