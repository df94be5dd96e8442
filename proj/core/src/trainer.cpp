#include "sdcf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "sdcf/errors.hpp"

namespace sdcf {

namespace {

void adam_update_span(double* m, double* v, std::size_t t, double* param,
                      const double* grad, std::size_t n, const OptimConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i] + cfg.weight_decay * param[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

Mat take_rows(const Mat& a, std::size_t begin, std::size_t end) {
    Mat out(end - begin, a.cols());
    std::copy(a.data() + begin * a.cols(), a.data() + end * a.cols(), out.data());
    return out;
}

Mat uniform_mat(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat m(rows, cols);
    for (double& v : m.values()) v = dist(rng);
    return m;
}

struct BatchRange {
    std::size_t begin;
    std::size_t end;
};

std::vector<BatchRange> fixed_batches(std::size_t n, std::size_t batch_size) {
    const std::size_t b = batch_size == 0 ? n : std::min(batch_size, n);
    std::vector<BatchRange> out;
    for (std::size_t s = 0; s < n; s += b) out.push_back({s, std::min(s + b, n)});
    return out;
}

void check_dataset(const Dataset& data, const ArchConfig& arch) {
    if (data.channels.size() != arch.num_channels)
        throw std::invalid_argument("train: dataset channel count != arch.num_channels");
    if (data.num_samples() == 0)
        throw std::invalid_argument("train: empty dataset");
    for (const Mat& s : data.channels) {
        if (s.rows() != data.num_samples() || s.cols() != arch.window_size)
            throw std::invalid_argument("train: channel matrix shape mismatch");
    }
    for (int label : data.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= arch.num_classes)
            throw std::invalid_argument("train: label out of range");
}

void guard_loss(double loss, double initial, std::size_t epoch) {
    if (!std::isfinite(loss))
        throw divergence_error("loss became non-finite at epoch " + std::to_string(epoch));
    if (loss > 100.0 * (std::abs(initial) + 1.0))
        throw divergence_error("loss grew 100x past its initial value at epoch " +
                               std::to_string(epoch));
}

} // namespace

void OptimConfig::validate() const {
    if (learning_rate <= 0.0) throw config_error("optim: learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw config_error("optim: betas must lie in [0, 1)");
    if (epsilon <= 0.0) throw config_error("optim: epsilon must be > 0");
    if (weight_decay < 0.0) throw config_error("optim: weight_decay must be >= 0");
    if (mu < 0.0 || lambda < 0.0) throw config_error("optim: mu and lambda must be >= 0");
}

void adam_step(AdamState& state, Mat& param, const Mat& grad, const OptimConfig& cfg) {
    if (!param.same_shape(grad))
        throw std::invalid_argument("adam_step: grad shape != param shape");
    if (state.m.empty()) {
        state.m = Mat(param.rows(), param.cols());
        state.v = Mat(param.rows(), param.cols());
    }
    state.t += 1;
    adam_update_span(state.m.data(), state.v.data(), state.t, param.data(), grad.data(),
                     param.size(), cfg);
}

Mat project_nonneg(Mat block) { return nonneg_prox(std::move(block)); }

SdcfModel init_model(const ArchConfig& arch, std::uint64_t seed) {
    arch.validate();
    std::mt19937_64 rng(seed);
    SdcfModel model;
    model.arch = arch;
    for (std::size_t c = 0; c < arch.num_channels; ++c) {
        FilterBank bank;
        for (const LayerSpec& ls : arch.layers) {
            const std::size_t fan_in = ls.conv.kernel_size * ls.conv.in_channels;
            bank.layers.push_back(uniform_mat(fan_in, ls.conv.out_channels,
                                              1.0 / std::sqrt(static_cast<double>(fan_in)),
                                              rng));
        }
        model.banks.push_back(std::move(bank));
    }
    const std::size_t feat = arch.feature_dim();
    for (std::size_t c = 0; c < arch.num_channels; ++c)
        model.fusion.push_back(uniform_mat(feat, arch.fusion_out,
                                           1.0 / std::sqrt(static_cast<double>(feat)), rng));
    model.classifier = uniform_mat(arch.fusion_out, arch.num_classes,
                                   1.0 / std::sqrt(static_cast<double>(arch.fusion_out)),
                                   rng);
    return model;
}

TrainReport train(const Dataset& data, const ArchConfig& arch, const OptimConfig& cfg,
                  const StepCallback& on_step) {
    cfg.validate();
    check_dataset(data, arch);
    const auto t0 = std::chrono::steady_clock::now();

    TrainReport report;
    report.model = init_model(arch, cfg.seed);
    SdcfModel& model = report.model;
    model.arch.mu = cfg.mu;
    model.arch.lambda = cfg.lambda;

    const std::size_t n_channels = arch.num_channels;
    const std::size_t n_samples = data.num_samples();

    // Warm start: X from the forward pass, Z from the fused features, both
    // projected, so the mismatch terms start near zero.
    FeatureVars& vars = report.features;
    vars.x.resize(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c)
        vars.x[c] = nonneg_prox(channel_forward(model.banks[c], data.channels[c], model.arch));
    {
        Mat fused(n_samples, arch.fusion_out);
        for (std::size_t c = 0; c < n_channels; ++c)
            axpy(fused, 1.0, matmul(vars.x[c], model.fusion[c]));
        vars.z = nonneg_prox(std::move(fused));
    }

    report.initial_objective =
        joint_objective(model, vars, data.channels, data.labels, /*smoothed=*/true);

    // Shared-block optimizer state plus full-size moments for the per-sample
    // feature rows; each fixed batch group keeps its own step counter.
    std::vector<std::vector<AdamState>> bank_state(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c)
        bank_state[c].resize(model.banks[c].layers.size());
    std::vector<AdamState> fusion_state(n_channels);
    AdamState classifier_state;
    std::vector<Mat> x_m(n_channels), x_v(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
        x_m[c] = Mat(n_samples, vars.x[c].cols());
        x_v[c] = Mat(n_samples, vars.x[c].cols());
    }
    Mat z_m(n_samples, arch.fusion_out), z_v(n_samples, arch.fusion_out);

    const std::vector<BatchRange> batches = fixed_batches(n_samples, cfg.batch_size);
    std::vector<std::size_t> group_t(batches.size(), 0);

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t g = 0; g < batches.size(); ++g) {
            const auto [b0, b1] = batches[g];
            const std::size_t rows = b1 - b0;

            std::vector<Mat> batch_signals(n_channels);
            FeatureVars batch_vars;
            batch_vars.x.resize(n_channels);
            for (std::size_t c = 0; c < n_channels; ++c) {
                batch_signals[c] = take_rows(data.channels[c], b0, b1);
                batch_vars.x[c] = take_rows(vars.x[c], b0, b1);
            }
            batch_vars.z = take_rows(vars.z, b0, b1);
            LabelVec batch_y(data.labels.begin() + static_cast<std::ptrdiff_t>(b0),
                             data.labels.begin() + static_cast<std::ptrdiff_t>(b1));

            GradOptions opts;
            opts.smoothed = true;
            opts.data_scale = 1.0 / static_cast<double>(rows);
            JointGrads grads = grad_joint(model, batch_vars, batch_signals, batch_y, opts);

            for (std::size_t c = 0; c < n_channels; ++c) {
                for (std::size_t l = 0; l < model.banks[c].layers.size(); ++l)
                    adam_step(bank_state[c][l], model.banks[c].layers[l], grads.banks[c][l],
                              cfg);
                adam_step(fusion_state[c], model.fusion[c], grads.fusion[c], cfg);
            }
            adam_step(classifier_state, model.classifier, grads.classifier, cfg);

            group_t[g] += 1;
            for (std::size_t c = 0; c < n_channels; ++c) {
                const std::size_t w = vars.x[c].cols();
                adam_update_span(x_m[c].data() + b0 * w, x_v[c].data() + b0 * w, group_t[g],
                                 vars.x[c].data() + b0 * w, grads.x[c].data(), rows * w, cfg);
                double* xr = vars.x[c].data() + b0 * w;
                for (std::size_t i = 0; i < rows * w; ++i)
                    if (xr[i] < 0.0) xr[i] = 0.0;
            }
            {
                const std::size_t w = arch.fusion_out;
                adam_update_span(z_m.data() + b0 * w, z_v.data() + b0 * w, group_t[g],
                                 vars.z.data() + b0 * w, grads.z.data(), rows * w, cfg);
                double* zr = vars.z.data() + b0 * w;
                for (std::size_t i = 0; i < rows * w; ++i)
                    if (zr[i] < 0.0) zr[i] = 0.0;
            }
            ++step;
            if (on_step) on_step(step, model, vars);
        }
        const double loss =
            joint_objective(model, vars, data.channels, data.labels, /*smoothed=*/true);
        guard_loss(loss, report.initial_objective, epoch);
        report.loss_curve.push_back(loss);
    }

    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

TrainReport train_cnn_baseline(const Dataset& data, const ArchConfig& arch,
                               const OptimConfig& cfg, const StepCallback& on_step) {
    cfg.validate();
    check_dataset(data, arch);
    const auto t0 = std::chrono::steady_clock::now();

    TrainReport report;
    report.model = init_model(arch, cfg.seed);
    SdcfModel& model = report.model;
    model.arch.mu = 0.0;
    model.arch.lambda = 0.0;

    const std::size_t n_channels = arch.num_channels;
    const std::size_t n_samples = data.num_samples();

    std::vector<std::vector<AdamState>> bank_state(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c)
        bank_state[c].resize(model.banks[c].layers.size());
    std::vector<AdamState> fusion_state(n_channels);
    AdamState classifier_state;

    // Forward-pass features over the full data, refreshed for each epoch's
    // loss record and exposed in the report.
    auto forward_features = [&](const std::vector<Mat>& signals) {
        FeatureVars f;
        f.x.resize(n_channels);
        const std::size_t rows = signals[0].rows();
        Mat fused(rows, arch.fusion_out);
        for (std::size_t c = 0; c < n_channels; ++c) {
            f.x[c] = nonneg_prox(channel_forward(model.banks[c], signals[c], model.arch));
            axpy(fused, 1.0, matmul(f.x[c], model.fusion[c]));
        }
        f.z = nonneg_prox(std::move(fused));
        return f;
    };

    report.features = forward_features(data.channels);
    report.initial_objective = f_ce(model.classifier, report.features.z, data.labels);

    const std::vector<BatchRange> batches = fixed_batches(n_samples, cfg.batch_size);

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const BatchRange& b : batches) {
            const std::size_t rows = b.end - b.begin;
            const double ds = 1.0 / static_cast<double>(rows);
            LabelVec batch_y(data.labels.begin() + static_cast<std::ptrdiff_t>(b.begin),
                             data.labels.begin() + static_cast<std::ptrdiff_t>(b.end));

            std::vector<Mat> batch_signals(n_channels);
            std::vector<ChannelTrace> traces(n_channels);
            std::vector<Mat> x_hat(n_channels);
            Mat fused_pre(rows, arch.fusion_out);
            for (std::size_t c = 0; c < n_channels; ++c) {
                batch_signals[c] = take_rows(data.channels[c], b.begin, b.end);
                traces[c] = channel_forward_trace(model.banks[c], batch_signals[c], model.arch);
                x_hat[c] = nonneg_prox(traces[c].output);
                axpy(fused_pre, 1.0, matmul(x_hat[c], model.fusion[c]));
            }
            const Mat z_hat = nonneg_prox(fused_pre);

            Mat p = softmax_rows(matmul(z_hat, model.classifier));
            for (std::size_t k = 0; k < rows; ++k)
                p(k, static_cast<std::size_t>(batch_y[k])) -= 1.0;

            Mat grad_theta = matmul_tn(z_hat, p);
            for (double& v : grad_theta.values()) v *= ds;

            Mat grad_fused = matmul_nt(p, model.classifier);
            for (std::size_t i = 0; i < grad_fused.size(); ++i)
                grad_fused.values()[i] *= ds * (fused_pre.values()[i] > 0.0 ? 1.0 : 0.0);

            for (std::size_t c = 0; c < n_channels; ++c) {
                Mat grad_fusion = matmul_tn(x_hat[c], grad_fused);
                Mat grad_x = matmul_nt(grad_fused, model.fusion[c]);
                for (std::size_t i = 0; i < grad_x.size(); ++i)
                    if (traces[c].output.values()[i] <= 0.0) grad_x.values()[i] = 0.0;
                std::vector<Mat> grad_bank =
                    channel_backward(model.banks[c], model.arch, traces[c], grad_x);
                for (std::size_t l = 0; l < grad_bank.size(); ++l)
                    adam_step(bank_state[c][l], model.banks[c].layers[l], grad_bank[l], cfg);
                adam_step(fusion_state[c], model.fusion[c], grad_fusion, cfg);
            }
            adam_step(classifier_state, model.classifier, grad_theta, cfg);

            ++step;
            if (on_step) {
                report.features = forward_features(data.channels);
                on_step(step, model, report.features);
            }
        }
        report.features = forward_features(data.channels);
        const double loss = f_ce(model.classifier, report.features.z, data.labels);
        guard_loss(loss, report.initial_objective, epoch);
        report.loss_curve.push_back(loss);
    }

    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void write_loss_csv(const std::string& path, const std::vector<double>& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, curve[i]);
        out << buf;
    }
}

} // namespace sdcf
