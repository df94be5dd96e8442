#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sdcf/linops.hpp"
#include "sdcf/mat.hpp"

namespace sdcf {

/// One convolutional stage of a channel pipeline. The activation sits
/// between the convolution and the optional max-pool; the final layer's
/// activation is always Identity (the learned feature variables stand in
/// for it).
struct LayerSpec {
    ConvSpec conv;
    ActivationKind activation = ActivationKind::Identity;
    bool pool = true;
};

struct ArchConfig {
    std::size_t num_channels = 0;  // C
    std::vector<LayerSpec> layers; // length L
    std::size_t window_size = 0;   // D
    std::size_t fusion_out = 0;    // O
    std::size_t num_classes = 0;   // V
    double mu = 1e-4;
    double lambda = 1e-2;
    /// Apply max(.,0) at the two removed-activation sites during inference
    /// (the prox reading); false leaves them linear.
    bool prox_inference = true;

    /// Signal length after layer `ell` (0-based), counting conv + pool.
    std::size_t length_after(std::size_t ell) const;
    /// Features per sample and channel at the last layer: I = D_L * M_L.
    std::size_t feature_dim() const;
    void validate() const; // throws config_error
};

/// All convolutional transforms of one channel pipeline. Layer `ell` holds
/// a (P_ell * in_channels) x M_ell matrix whose column m is filter m's taps
/// grouped by input channel; the Frobenius and log-det penalties act on
/// this 2-D matrix.
struct FilterBank {
    std::vector<Mat> layers;
};

struct SdcfModel {
    ArchConfig arch;
    std::vector<FilterBank> banks; // C channel pipelines
    std::vector<Mat> fusion;       // C transforms, each I x O
    Mat classifier;                // theta, O x V
};

/// The explicit learned features: X_c is K x I per channel (rows are
/// flattened per-sample features), Z is K x O. Both are kept non-negative
/// by projection during training.
struct FeatureVars {
    std::vector<Mat> x;
    Mat z;
};

using LabelVec = std::vector<int>; // class indices in [0, V)

/// Intermediate products of one channel pipeline pass, kept for
/// reverse-mode gradients.
struct ChannelTrace {
    std::vector<Mat> inputs;   // A_0 .. A_{L-1}
    std::vector<Mat> pre_act;  // U_ell = T_ell conv A_{ell-1}
    std::vector<Mat> post_act; // V_ell
    std::vector<std::vector<std::size_t>> pool_argmax;
    Mat output; // K x I
};

/// conv -> activation -> optional pool per layer; the last layer applies no
/// activation. Output is K x I with per-sample features flattened.
Mat channel_forward(const FilterBank& bank, const Mat& signals, const ArchConfig& arch);
ChannelTrace channel_forward_trace(const FilterBank& bank, const Mat& signals,
                                   const ArchConfig& arch);
/// Propagates d(loss)/d(output) back through the pipeline; returns the
/// gradient for every layer transform of the bank. If `grad_signals` is
/// non-null it receives d(loss)/d(signals).
std::vector<Mat> channel_backward(const FilterBank& bank, const ArchConfig& arch,
                                  const ChannelTrace& trace, const Mat& grad_output,
                                  Mat* grad_signals = nullptr);

/// Deep CTL objective of one channel:
///   1/2 ||forward(S_c) - X_c||_F^2 + sum_ell (mu ||T_ell||_F^2 - lambda logdet T_ell).
double f_conv(const FilterBank& bank, const Mat& x_c, const Mat& s_c,
              const ArchConfig& arch, double mu, double lambda, bool smoothed = false);

/// Fusion objective:
///   1/2 ||Z - sum_c X_c Ttilde_c||_F^2 + sum_c (mu ||Ttilde_c||_F^2 - lambda logdet Ttilde_c).
double f_fusion(const std::vector<Mat>& fusion, const Mat& z, const std::vector<Mat>& x,
                double mu, double lambda, bool smoothed = false);

/// Multiclass cross-entropy sum_k log sum_v exp(z_k^T (theta_v - theta_{y_k})),
/// evaluated with the max-shift trick.
double f_ce(const Mat& theta, const Mat& z, const LabelVec& y);

double joint_objective(const SdcfModel& model, const FeatureVars& vars,
                       const std::vector<Mat>& signals, const LabelVec& y,
                       bool smoothed = false);

struct JointGrads {
    std::vector<std::vector<Mat>> banks; // per channel, per layer
    std::vector<Mat> x;
    std::vector<Mat> fusion;
    Mat z;
    Mat classifier;
};

struct GradOptions {
    bool smoothed = false;
    /// Multiplier on the data-fidelity and cross-entropy terms (the
    /// regularizers are never scaled); the training loop passes 1/batch.
    double data_scale = 1.0;
};

/// Analytic gradient of the joint objective with respect to every block.
JointGrads grad_joint(const SdcfModel& model, const FeatureVars& vars,
                      const std::vector<Mat>& signals, const LabelVec& y,
                      const GradOptions& opts = {});

/// Row-wise stable softmax of Z theta.
Mat softmax_rows(const Mat& logits);

/// Test-time pass: closed-form features with max(.,0) at the removed
/// activation sites (or linear when arch.prox_inference is false), then
/// softmax class probabilities. Rows sum to 1.
Mat infer(const SdcfModel& model, const std::vector<Mat>& signals);

/// Model (de)serialization: one JSON document {arch, banks, fusion,
/// classifier}, exact round-trip for 64-bit floats.
std::string model_to_json(const SdcfModel& model);
SdcfModel model_from_json(const std::string& text);

} // namespace sdcf
