#include "sdcf/linops.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>

#include "sdcf/errors.hpp"

namespace sdcf {

namespace {

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMat> as_eigen(const Mat& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()),
            static_cast<Eigen::Index>(m.cols())};
}

double logdet_impl(const Mat& t, double floor_at) {
    if (t.empty()) throw std::invalid_argument("logdet: empty matrix");
    Eigen::JacobiSVD<EigenRowMat> svd(as_eigen(t));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        double sv = svd.singularValues()(i);
        if (sv <= kSvTol)
            throw singular_transform_error(
                "transform is rank deficient (sigma_min = " + std::to_string(sv) + ")");
        sum += std::log(std::max(sv, floor_at));
    }
    return sum;
}

Mat logdet_grad_impl(const Mat& t, double floor_at) {
    if (t.empty()) throw std::invalid_argument("logdet_grad: empty matrix");
    Eigen::JacobiSVD<EigenRowMat> svd(as_eigen(t),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd inv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) <= kSvTol)
            throw singular_transform_error(
                "transform is rank deficient (sigma_min = " + std::to_string(sv(i)) + ")");
        inv(i) = 1.0 / std::max(sv(i), floor_at);
    }
    // d/dT sum_i log sigma_i = U diag(1/sigma) V^T = pinv(T)^T
    EigenRowMat g = svd.matrixU() * inv.asDiagonal() * svd.matrixV().transpose();
    Mat out(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
            out(i, j) = g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

} // namespace

void ConvSpec::validate() const {
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("ConvSpec: kernel_size must be odd and >= 1");
    if (in_channels < 1 || out_channels < 1)
        throw std::invalid_argument("ConvSpec: channel counts must be >= 1");
}

std::vector<double> conv1d(const std::vector<double>& kernel,
                           const std::vector<double>& signal,
                           std::size_t padding) {
    const std::size_t p = kernel.size();
    const std::size_t d = signal.size();
    if (p == 0 || p % 2 == 0)
        throw std::invalid_argument("conv1d: kernel length must be odd and >= 1");
    if (p > d + 2 * padding)
        throw std::invalid_argument("conv1d: kernel longer than padded signal");
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const std::ptrdiff_t idx =
                static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(padding);
            if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(d))
                s += kernel[j] * signal[static_cast<std::size_t>(idx)];
        }
        out[i] = s;
    }
    return out;
}

Mat conv_forward(const Mat& transforms, const Mat& signals,
                 std::size_t in_channels, std::size_t len) {
    const std::size_t m = transforms.cols();
    if (in_channels == 0 || transforms.rows() % in_channels != 0)
        throw std::invalid_argument("conv_forward: transform rows not divisible by in_channels");
    const std::size_t p = transforms.rows() / in_channels;
    if (p % 2 == 0)
        throw std::invalid_argument("conv_forward: kernel length must be odd");
    if (signals.cols() != in_channels * len)
        throw std::invalid_argument("conv_forward: signal width != in_channels*len");
    const std::size_t pad = p / 2;
    if (p > len + 2 * pad)
        throw std::invalid_argument("conv_forward: kernel longer than padded signal");

    const std::size_t k = signals.rows();
    Mat out(k, m * len);
    for (std::size_t r = 0; r < k; ++r) {
        const double* srow = signals.data() + r * signals.cols();
        double* orow = out.data() + r * out.cols();
        for (std::size_t f = 0; f < m; ++f) {
            double* oblk = orow + f * len;
            for (std::size_t j = 0; j < in_channels; ++j) {
                const double* sblk = srow + j * len;
                for (std::size_t i = 0; i < len; ++i) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < p; ++q) {
                        const std::ptrdiff_t idx =
                            static_cast<std::ptrdiff_t>(i + q) - static_cast<std::ptrdiff_t>(pad);
                        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(len))
                            s += transforms(j * p + q, f) * sblk[idx];
                    }
                    oblk[i] += s;
                }
            }
        }
    }
    return out;
}

Mat conv_bank(const Mat& transforms, const Mat& signals) {
    return conv_forward(transforms, signals, 1, signals.cols());
}

Mat conv_backward_transforms(const Mat& grad_out, const Mat& signals,
                             std::size_t in_channels, std::size_t len,
                             std::size_t kernel_size) {
    const std::size_t p = kernel_size;
    const std::size_t pad = p / 2;
    const std::size_t m = grad_out.cols() / len;
    const std::size_t k = signals.rows();
    Mat grad(p * in_channels, m);
    for (std::size_t r = 0; r < k; ++r) {
        const double* srow = signals.data() + r * signals.cols();
        const double* grow = grad_out.data() + r * grad_out.cols();
        for (std::size_t f = 0; f < m; ++f) {
            const double* gblk = grow + f * len;
            for (std::size_t j = 0; j < in_channels; ++j) {
                const double* sblk = srow + j * len;
                for (std::size_t q = 0; q < p; ++q) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < len; ++i) {
                        const std::ptrdiff_t idx =
                            static_cast<std::ptrdiff_t>(i + q) - static_cast<std::ptrdiff_t>(pad);
                        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(len))
                            s += gblk[i] * sblk[idx];
                    }
                    grad(j * p + q, f) += s;
                }
            }
        }
    }
    return grad;
}

Mat conv_backward_signals(const Mat& grad_out, const Mat& transforms,
                          std::size_t in_channels, std::size_t len) {
    const std::size_t p = transforms.rows() / in_channels;
    const std::size_t pad = p / 2;
    const std::size_t m = transforms.cols();
    const std::size_t k = grad_out.rows();
    Mat grad(k, in_channels * len);
    for (std::size_t r = 0; r < k; ++r) {
        const double* grow = grad_out.data() + r * grad_out.cols();
        double* orow = grad.data() + r * grad.cols();
        for (std::size_t f = 0; f < m; ++f) {
            const double* gblk = grow + f * len;
            for (std::size_t j = 0; j < in_channels; ++j) {
                double* oblk = orow + j * len;
                for (std::size_t i = 0; i < len; ++i) {
                    const double g = gblk[i];
                    if (g == 0.0) continue;
                    for (std::size_t q = 0; q < p; ++q) {
                        const std::ptrdiff_t idx =
                            static_cast<std::ptrdiff_t>(i + q) - static_cast<std::ptrdiff_t>(pad);
                        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(len))
                            oblk[idx] += g * transforms(j * p + q, f);
                    }
                }
            }
        }
    }
    return grad;
}

std::vector<double> maxpool1d(const std::vector<double>& x) {
    if (x.size() < 2)
        throw std::invalid_argument("maxpool1d: signal shorter than pooling kernel");
    std::vector<double> out(x.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::max(x[2 * i], x[2 * i + 1]);
    return out;
}

Mat pool_forward(const Mat& in, std::size_t channels, std::size_t len,
                 std::vector<std::size_t>* argmax) {
    if (len < 2)
        throw std::invalid_argument("pool_forward: channel length < 2");
    if (in.cols() != channels * len)
        throw std::invalid_argument("pool_forward: width != channels*len");
    const std::size_t out_len = len / 2;
    const std::size_t k = in.rows();
    Mat out(k, channels * out_len);
    if (argmax) argmax->assign(out.size(), 0);
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < out_len; ++i) {
                const std::size_t a = r * in.cols() + c * len + 2 * i;
                const std::size_t pick = in.values()[a] >= in.values()[a + 1] ? a : a + 1;
                const std::size_t o = r * out.cols() + c * out_len + i;
                out.values()[o] = in.values()[pick];
                if (argmax) (*argmax)[o] = pick;
            }
        }
    }
    return out;
}

Mat pool_backward(const Mat& grad_out, const std::vector<std::size_t>& argmax,
                  std::size_t in_rows, std::size_t in_cols) {
    Mat grad(in_rows, in_cols);
    for (std::size_t o = 0; o < grad_out.size(); ++o)
        grad.values()[argmax[o]] += grad_out.values()[o];
    return grad;
}

double logdet_rect(const Mat& t) { return logdet_impl(t, kSvTol); }
Mat logdet_grad(const Mat& t) { return logdet_grad_impl(t, kSvTol); }
double logdet_smoothed(const Mat& t) { return logdet_impl(t, kSvClamp); }
Mat logdet_grad_smoothed(const Mat& t) { return logdet_grad_impl(t, kSvClamp); }

double activate_scalar(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Identity: return x;
        case ActivationKind::NonNegProx: return x > 0.0 ? x : 0.0;
        case ActivationKind::Selu:
            return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
    }
    return x;
}

double activate_derivative_scalar(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Identity: return 1.0;
        case ActivationKind::NonNegProx: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Selu:
            return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
    }
    return 1.0;
}

Mat activate(ActivationKind kind, const Mat& x) {
    Mat out = x;
    if (kind == ActivationKind::Identity) return out;
    for (double& v : out.values()) v = activate_scalar(kind, v);
    return out;
}

Mat activate_derivative(ActivationKind kind, const Mat& x) {
    Mat out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.values()[i] = activate_derivative_scalar(kind, x.values()[i]);
    return out;
}

Mat nonneg_prox(Mat x) {
    for (double& v : x.values())
        if (v < 0.0) v = 0.0;
    return x;
}

const char* activation_name(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Identity: return "identity";
        case ActivationKind::NonNegProx: return "relu";
        case ActivationKind::Selu: return "selu";
    }
    return "identity";
}

ActivationKind activation_from_name(const std::string& name) {
    if (name == "identity") return ActivationKind::Identity;
    if (name == "relu") return ActivationKind::NonNegProx;
    if (name == "selu") return ActivationKind::Selu;
    throw std::invalid_argument("unknown activation: " + name);
}

} // namespace sdcf
