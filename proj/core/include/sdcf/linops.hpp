#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sdcf/mat.hpp"

namespace sdcf {

/// One 1-D convolution layer: (in_channels, out_channels, kernel_size,
/// stride 1, padding kernel_size/2). Padding preserves the signal length.
struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel_size = 3; // odd

    std::size_t padding() const { return kernel_size / 2; }
    void validate() const; // throws std::invalid_argument
};

enum class ActivationKind { Identity, NonNegProx, Selu };

/// Strict tolerance: a singular value at or below this means the transform
/// has lost rank and evaluation raises singular_transform_error.
inline constexpr double kSvTol = 1e-12;
/// Training-time floor: singular values are clamped here so a single bad
/// step cannot abort a run (strict mode stays available for tests).
inline constexpr double kSvClamp = 1e-8;

inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluScale = 1.0507009873554804934193349852946;

/// Zero-padded 1-D correlation: out[i] = sum_j kernel[j] * signal[i+j-padding].
/// Output length equals input length when padding == kernel_size/2.
std::vector<double> conv1d(const std::vector<double>& kernel,
                           const std::vector<double>& signal,
                           std::size_t padding);

/// T star S: filters are the M columns of T (P x M), samples are the K rows
/// of S (K x D). Row k of the result is [t_1*s_k | ... | t_M*s_k], K x (M*D).
Mat conv_bank(const Mat& transforms, const Mat& signals);

/// Multi-input-channel bank: rows of `signals` hold `in_channels` blocks of
/// length `len`; column m of `transforms` ((P*in_channels) x M) holds filter
/// m's taps grouped by input channel. Output rows hold M blocks of length
/// `len`.
Mat conv_forward(const Mat& transforms, const Mat& signals,
                 std::size_t in_channels, std::size_t len);

/// Reverse-mode companions of conv_forward: gradient of a scalar loss with
/// respect to the transform matrix, and with respect to the input signals.
Mat conv_backward_transforms(const Mat& grad_out, const Mat& signals,
                             std::size_t in_channels, std::size_t len,
                             std::size_t kernel_size);
Mat conv_backward_signals(const Mat& grad_out, const Mat& transforms,
                          std::size_t in_channels, std::size_t len);

/// Max-pool with kernel 2, stride 2; a trailing odd element is dropped.
std::vector<double> maxpool1d(const std::vector<double>& x);

/// Pool every channel block of every row; records flat argmax positions
/// (first maximum wins on ties) for the backward pass.
Mat pool_forward(const Mat& in, std::size_t channels, std::size_t len,
                 std::vector<std::size_t>* argmax = nullptr);
Mat pool_backward(const Mat& grad_out, const std::vector<std::size_t>& argmax,
                  std::size_t in_rows, std::size_t in_cols);

/// Sum of logarithms of all min(rows, cols) singular values. Raises
/// singular_transform_error when any singular value is <= kSvTol.
double logdet_rect(const Mat& t);
/// Gradient of logdet_rect: transpose of the pseudo-inverse.
Mat logdet_grad(const Mat& t);

/// Clamped variants used inside training: singular values below kSvClamp
/// are floored there. Rank collapse at or below kSvTol still raises.
double logdet_smoothed(const Mat& t);
Mat logdet_grad_smoothed(const Mat& t);

double activate_scalar(ActivationKind kind, double x);
/// Derivative wrt the pre-activation; the ReLU subgradient at 0 is 0.
double activate_derivative_scalar(ActivationKind kind, double x);
Mat activate(ActivationKind kind, const Mat& x);
Mat activate_derivative(ActivationKind kind, const Mat& x);

/// Element-wise max(., 0): the proximity operator of the non-negativity
/// indicator.
Mat nonneg_prox(Mat x);

const char* activation_name(ActivationKind kind);
ActivationKind activation_from_name(const std::string& name);

} // namespace sdcf
