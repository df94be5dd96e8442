#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdcf/model.hpp"

namespace sdcf {

struct OptimConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
    std::size_t epochs = 100;
    std::size_t batch_size = 0; // 0 = full batch
    std::uint64_t seed = 0;
    double mu = 1e-4;
    double lambda = 0.01;

    void validate() const; // throws config_error
};

/// Adam moments for one parameter block.
struct AdamState {
    Mat m;
    Mat v;
    std::size_t t = 0;
};

/// One Adam update; the weight-decay term is added to the gradient before
/// the moment updates (classic L2 semantics).
void adam_step(AdamState& state, Mat& param, const Mat& grad, const OptimConfig& cfg);

/// Element-wise max(., 0); the P+ projection applied to X and Z blocks.
Mat project_nonneg(Mat block);

/// Training inputs: C channel matrices of shape K x D plus K labels.
struct Dataset {
    std::vector<Mat> channels;
    LabelVec labels;

    std::size_t num_samples() const { return labels.size(); }
};

struct TrainReport {
    std::vector<double> loss_curve; // one joint-objective value per epoch
    SdcfModel model;
    FeatureVars features;
    double initial_objective = 0.0;
    double wall_time_seconds = 0.0;
};

/// Invoked after every optimizer step (post projection); used by tests to
/// assert in-loop invariants.
using StepCallback =
    std::function<void(std::size_t step, const SdcfModel&, const FeatureVars&)>;

/// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization of every
/// transform block.
SdcfModel init_model(const ArchConfig& arch, std::uint64_t seed);

/// Projected-gradient training of the joint objective: every step computes
/// the analytic gradient on one minibatch (batch rows of X and Z plus the
/// shared transforms), applies Adam to every block, then projects X and Z
/// onto the non-negative orthant. The full-data joint objective is recorded
/// once per epoch.
TrainReport train(const Dataset& data, const ArchConfig& arch, const OptimConfig& cfg,
                  const StepCallback& on_step = {});

/// Ablation mode: identical pipeline with mu = lambda = 0 and no explicit
/// feature variables; features come from the forward pass with max(.,0) at
/// the removed activation sites and only the cross-entropy is minimized.
TrainReport train_cnn_baseline(const Dataset& data, const ArchConfig& arch,
                               const OptimConfig& cfg, const StepCallback& on_step = {});

/// Loss curve as "epoch,loss" CSV with round-trip-exact float formatting.
void write_loss_csv(const std::string& path, const std::vector<double>& curve);

} // namespace sdcf
