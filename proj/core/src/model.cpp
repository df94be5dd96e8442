#include "sdcf/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sdcf/errors.hpp"

namespace sdcf {

std::size_t ArchConfig::length_after(std::size_t ell) const {
    std::size_t len = window_size;
    for (std::size_t l = 0; l <= ell && l < layers.size(); ++l)
        if (layers[l].pool) len /= 2;
    return len;
}

std::size_t ArchConfig::feature_dim() const {
    if (layers.empty()) return 0;
    return length_after(layers.size() - 1) * layers.back().conv.out_channels;
}

void ArchConfig::validate() const {
    if (num_channels == 0) throw config_error("arch: num_channels must be >= 1");
    if (layers.empty()) throw config_error("arch: at least one layer required");
    if (window_size == 0) throw config_error("arch: window_size must be >= 1");
    if (num_classes < 2) throw config_error("arch: num_classes must be >= 2");
    if (mu < 0.0 || lambda < 0.0) throw config_error("arch: mu and lambda must be >= 0");
    if (layers.back().activation != ActivationKind::Identity)
        throw config_error("arch: the last layer's activation must be identity");

    std::size_t in = 1;
    std::size_t len = window_size;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& ls = layers[l];
        try {
            ls.conv.validate();
        } catch (const std::invalid_argument& e) {
            throw config_error("arch layer " + std::to_string(l) + ": " + e.what());
        }
        if (ls.conv.in_channels != in)
            throw config_error("arch layer " + std::to_string(l) +
                               ": in_channels does not chain from previous layer");
        if (ls.conv.kernel_size > len + 2 * ls.conv.padding())
            throw config_error("arch layer " + std::to_string(l) +
                               ": kernel does not fit the sequence length " + std::to_string(len));
        if (ls.pool) {
            if (len < 2)
                throw config_error("arch layer " + std::to_string(l) +
                                   ": window too small to max-pool (length " +
                                   std::to_string(len) + ")");
            len /= 2;
        }
        if (len == 0)
            throw config_error("arch layer " + std::to_string(l) +
                               ": sequence length collapsed to 0");
        in = ls.conv.out_channels;
    }
    if (fusion_out == 0) throw config_error("arch: fusion_out must be >= 1");
    if (fusion_out > feature_dim() * num_channels)
        throw config_error("arch: fusion_out exceeds I*C");
}

Mat channel_forward(const FilterBank& bank, const Mat& signals, const ArchConfig& arch) {
    if (signals.cols() != arch.window_size)
        throw std::invalid_argument("channel_forward: signal width != window_size");
    if (bank.layers.size() != arch.layers.size())
        throw std::invalid_argument("channel_forward: bank/arch layer count mismatch");
    Mat a = signals;
    std::size_t len = arch.window_size;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        const LayerSpec& ls = arch.layers[l];
        Mat u = conv_forward(bank.layers[l], a, ls.conv.in_channels, len);
        Mat v = activate(ls.activation, u);
        if (ls.pool) {
            a = pool_forward(v, ls.conv.out_channels, len);
            len /= 2;
        } else {
            a = std::move(v);
        }
    }
    return a;
}

ChannelTrace channel_forward_trace(const FilterBank& bank, const Mat& signals,
                                   const ArchConfig& arch) {
    if (signals.cols() != arch.window_size)
        throw std::invalid_argument("channel_forward: signal width != window_size");
    ChannelTrace tr;
    const std::size_t n_layers = arch.layers.size();
    tr.inputs.reserve(n_layers);
    tr.pre_act.reserve(n_layers);
    tr.post_act.reserve(n_layers);
    tr.pool_argmax.resize(n_layers);
    Mat a = signals;
    std::size_t len = arch.window_size;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const LayerSpec& ls = arch.layers[l];
        tr.inputs.push_back(a);
        Mat u = conv_forward(bank.layers[l], a, ls.conv.in_channels, len);
        Mat v = activate(ls.activation, u);
        tr.pre_act.push_back(std::move(u));
        if (ls.pool) {
            a = pool_forward(v, ls.conv.out_channels, len, &tr.pool_argmax[l]);
            len /= 2;
        } else {
            a = v;
        }
        tr.post_act.push_back(std::move(v));
    }
    tr.output = std::move(a);
    return tr;
}

std::vector<Mat> channel_backward(const FilterBank& bank, const ArchConfig& arch,
                                  const ChannelTrace& trace, const Mat& grad_output,
                                  Mat* grad_signals) {
    const std::size_t n_layers = arch.layers.size();
    std::vector<Mat> grads(n_layers);
    Mat g = grad_output;
    for (std::size_t l = n_layers; l-- > 0;) {
        const LayerSpec& ls = arch.layers[l];
        const Mat& v = trace.post_act[l];
        if (ls.pool)
            g = pool_backward(g, trace.pool_argmax[l], v.rows(), v.cols());
        if (ls.activation != ActivationKind::Identity) {
            const Mat d = activate_derivative(ls.activation, trace.pre_act[l]);
            for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] *= d.values()[i];
        }
        const std::size_t len = trace.inputs[l].cols() / ls.conv.in_channels;
        grads[l] = conv_backward_transforms(g, trace.inputs[l], ls.conv.in_channels, len,
                                            ls.conv.kernel_size);
        if (l > 0 || grad_signals)
            g = conv_backward_signals(g, bank.layers[l], ls.conv.in_channels, len);
    }
    if (grad_signals) *grad_signals = std::move(g);
    return grads;
}

namespace {

double transform_penalties(const std::vector<Mat>& transforms, double mu, double lambda,
                           bool smoothed) {
    double s = 0.0;
    for (const Mat& t : transforms) {
        if (mu != 0.0) s += mu * frobenius_sq(t);
        if (lambda != 0.0)
            s -= lambda * (smoothed ? logdet_smoothed(t) : logdet_rect(t));
    }
    return s;
}

} // namespace

double f_conv(const FilterBank& bank, const Mat& x_c, const Mat& s_c,
              const ArchConfig& arch, double mu, double lambda, bool smoothed) {
    Mat fwd = channel_forward(bank, s_c, arch);
    if (!fwd.same_shape(x_c))
        throw std::invalid_argument("f_conv: X shape does not match pipeline output");
    double mis = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        const double r = fwd.values()[i] - x_c.values()[i];
        mis += r * r;
    }
    return 0.5 * mis + transform_penalties(bank.layers, mu, lambda, smoothed);
}

double f_fusion(const std::vector<Mat>& fusion, const Mat& z, const std::vector<Mat>& x,
                double mu, double lambda, bool smoothed) {
    if (fusion.size() != x.size())
        throw std::invalid_argument("f_fusion: channel count mismatch");
    Mat m(z.rows(), z.cols());
    for (std::size_t c = 0; c < fusion.size(); ++c)
        axpy(m, 1.0, matmul(x[c], fusion[c]));
    double mis = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double r = z.values()[i] - m.values()[i];
        mis += r * r;
    }
    return 0.5 * mis + transform_penalties(fusion, mu, lambda, smoothed);
}

double f_ce(const Mat& theta, const Mat& z, const LabelVec& y) {
    if (z.rows() != y.size())
        throw std::invalid_argument("f_ce: label count != sample count");
    const std::size_t v = theta.cols();
    Mat logits = matmul(z, theta);
    double total = 0.0;
    for (std::size_t k = 0; k < logits.rows(); ++k) {
        if (y[k] < 0 || static_cast<std::size_t>(y[k]) >= v)
            throw std::invalid_argument("f_ce: label out of range");
        double mx = logits(k, 0);
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, logits(k, j));
        double lse = 0.0;
        for (std::size_t j = 0; j < v; ++j) lse += std::exp(logits(k, j) - mx);
        total += std::log(lse) + mx - logits(k, static_cast<std::size_t>(y[k]));
    }
    return total;
}

double joint_objective(const SdcfModel& model, const FeatureVars& vars,
                       const std::vector<Mat>& signals, const LabelVec& y,
                       bool smoothed) {
    const ArchConfig& arch = model.arch;
    if (signals.size() != arch.num_channels || vars.x.size() != arch.num_channels)
        throw std::invalid_argument("joint_objective: channel count mismatch");
    double total = 0.0;
    for (std::size_t c = 0; c < arch.num_channels; ++c)
        total += f_conv(model.banks[c], vars.x[c], signals[c], arch, arch.mu, arch.lambda,
                        smoothed);
    total += f_fusion(model.fusion, vars.z, vars.x, arch.mu, arch.lambda, smoothed);
    total += f_ce(model.classifier, vars.z, y);
    return total;
}

Mat softmax_rows(const Mat& logits) {
    Mat p(logits.rows(), logits.cols());
    for (std::size_t k = 0; k < logits.rows(); ++k) {
        double mx = logits(k, 0);
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits(k, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            p(k, j) = std::exp(logits(k, j) - mx);
            sum += p(k, j);
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) p(k, j) /= sum;
    }
    return p;
}

JointGrads grad_joint(const SdcfModel& model, const FeatureVars& vars,
                      const std::vector<Mat>& signals, const LabelVec& y,
                      const GradOptions& opts) {
    const ArchConfig& arch = model.arch;
    const std::size_t n_channels = arch.num_channels;
    if (signals.size() != n_channels || vars.x.size() != n_channels)
        throw std::invalid_argument("grad_joint: channel count mismatch");
    const double ds = opts.data_scale;

    JointGrads g;
    g.banks.resize(n_channels);
    g.x.resize(n_channels);
    g.fusion.resize(n_channels);

    // Fusion residual Z - sum_c X_c Ttilde_c, shared by several blocks.
    Mat fused(vars.z.rows(), vars.z.cols());
    for (std::size_t c = 0; c < n_channels; ++c)
        axpy(fused, 1.0, matmul(vars.x[c], model.fusion[c]));
    Mat rf = vars.z;
    axpy(rf, -1.0, fused);

    for (std::size_t c = 0; c < n_channels; ++c) {
        ChannelTrace tr = channel_forward_trace(model.banks[c], signals[c], arch);
        if (!tr.output.same_shape(vars.x[c]))
            throw std::invalid_argument("grad_joint: X shape does not match pipeline output");

        // d/dT of 1/2 ||forward - X||^2, scaled, plus the penalties.
        Mat rc = tr.output;
        axpy(rc, -1.0, vars.x[c]);
        for (double& vv : rc.values()) vv *= ds;
        g.banks[c] = channel_backward(model.banks[c], arch, tr, rc);
        for (std::size_t l = 0; l < g.banks[c].size(); ++l) {
            const Mat& t = model.banks[c].layers[l];
            if (arch.mu != 0.0) axpy(g.banks[c][l], 2.0 * arch.mu, t);
            if (arch.lambda != 0.0)
                axpy(g.banks[c][l], -arch.lambda,
                     opts.smoothed ? logdet_grad_smoothed(t) : logdet_grad(t));
        }

        // d/dX: (X - forward) from the conv term, -Rf Ttilde^T from fusion.
        g.x[c] = vars.x[c];
        axpy(g.x[c], -1.0, tr.output);
        axpy(g.x[c], -1.0, matmul_nt(rf, model.fusion[c]));
        for (double& vv : g.x[c].values()) vv *= ds;

        // d/dTtilde: -X^T Rf, scaled, plus penalties.
        g.fusion[c] = matmul_tn(vars.x[c], rf);
        for (double& vv : g.fusion[c].values()) vv *= -ds;
        const Mat& ft = model.fusion[c];
        if (arch.mu != 0.0) axpy(g.fusion[c], 2.0 * arch.mu, ft);
        if (arch.lambda != 0.0)
            axpy(g.fusion[c], -arch.lambda,
                 opts.smoothed ? logdet_grad_smoothed(ft) : logdet_grad(ft));
    }

    // Cross-entropy block: P - onehot(y).
    Mat p = softmax_rows(matmul(vars.z, model.classifier));
    for (std::size_t k = 0; k < p.rows(); ++k) {
        if (y[k] < 0 || static_cast<std::size_t>(y[k]) >= p.cols())
            throw std::invalid_argument("grad_joint: label out of range");
        p(k, static_cast<std::size_t>(y[k])) -= 1.0;
    }

    g.classifier = matmul_tn(vars.z, p);
    for (double& vv : g.classifier.values()) vv *= ds;

    g.z = rf;
    axpy(g.z, 1.0, matmul_nt(p, model.classifier));
    for (double& vv : g.z.values()) vv *= ds;
    return g;
}

Mat infer(const SdcfModel& model, const std::vector<Mat>& signals) {
    const ArchConfig& arch = model.arch;
    if (signals.size() != arch.num_channels)
        throw std::invalid_argument("infer: channel count mismatch");
    const std::size_t k = signals.empty() ? 0 : signals[0].rows();
    Mat fused(k, arch.fusion_out);
    for (std::size_t c = 0; c < arch.num_channels; ++c) {
        Mat x = channel_forward(model.banks[c], signals[c], arch);
        if (arch.prox_inference) x = nonneg_prox(std::move(x));
        axpy(fused, 1.0, matmul(x, model.fusion[c]));
    }
    if (arch.prox_inference) fused = nonneg_prox(std::move(fused));
    return softmax_rows(matmul(fused, model.classifier));
}

} // namespace sdcf
