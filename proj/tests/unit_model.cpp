#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sdcf/errors.hpp"
#include "sdcf/model.hpp"
#include "sdcf/trainer.hpp"

using namespace sdcf;

namespace {

ArchConfig toy_arch(std::size_t channels, std::size_t window, std::size_t classes) {
    ArchConfig arch;
    arch.num_channels = channels;
    arch.window_size = window;
    arch.num_classes = classes;
    arch.layers = {LayerSpec{ConvSpec{1, 2, 3}, ActivationKind::Selu, true},
                   LayerSpec{ConvSpec{2, 3, 3}, ActivationKind::Identity, true}};
    arch.fusion_out = 4;
    arch.mu = 0.05;
    arch.lambda = 0.02;
    return arch;
}

/// A random model/instance pair with every transform well conditioned and
/// every feature entry strictly positive, so finite differences stay away
/// from kinks and the feasible-set boundary.
struct Instance {
    SdcfModel model;
    FeatureVars vars;
    std::vector<Mat> signals;
    LabelVec labels;
};

Instance random_instance(const ArchConfig& arch, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Instance inst;
    inst.model.arch = arch;
    for (std::size_t c = 0; c < arch.num_channels; ++c) {
        FilterBank bank;
        for (const LayerSpec& ls : arch.layers)
            bank.layers.push_back(oracle::well_conditioned_mat(
                ls.conv.kernel_size * ls.conv.in_channels, ls.conv.out_channels, rng, 0.2));
        inst.model.banks.push_back(std::move(bank));
        inst.signals.push_back(oracle::random_mat(samples, arch.window_size, rng));
    }
    const std::size_t feat = arch.feature_dim();
    for (std::size_t c = 0; c < arch.num_channels; ++c)
        inst.model.fusion.push_back(
            oracle::well_conditioned_mat(feat, arch.fusion_out, rng, 0.2));
    inst.model.classifier = oracle::random_mat(arch.fusion_out, arch.num_classes, rng);
    for (std::size_t c = 0; c < arch.num_channels; ++c)
        inst.vars.x.push_back(oracle::random_mat(samples, feat, rng, 0.1, 1.2));
    inst.vars.z = oracle::random_mat(samples, arch.fusion_out, rng, 0.1, 1.2);
    std::uniform_int_distribution<int> label(0, static_cast<int>(arch.num_classes) - 1);
    inst.labels.resize(samples);
    for (int& y : inst.labels) y = label(rng);
    return inst;
}

} // namespace

TEST_CASE("channel_forward with one identity filter reproduces the input") {
    ArchConfig arch;
    arch.num_channels = 1;
    arch.window_size = 6;
    arch.num_classes = 2;
    arch.fusion_out = 1;
    arch.layers = {LayerSpec{ConvSpec{1, 1, 1}, ActivationKind::Identity, false}};
    FilterBank bank;
    bank.layers.push_back(Mat(1, 1, {1.0}));

    std::mt19937_64 rng(41);
    Mat s = oracle::random_mat(3, 6, rng);
    Mat out = channel_forward(bank, s, arch);
    REQUIRE(out.rows() == 3);
    REQUIRE(out.cols() == 6);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.values()[i] == s.values()[i]);
}

TEST_CASE("channel_forward shape law with pooling") {
    ArchConfig arch;
    arch.num_channels = 1;
    arch.window_size = 9;
    arch.num_classes = 2;
    arch.fusion_out = 1;
    arch.layers = {LayerSpec{ConvSpec{1, 5, 3}, ActivationKind::Identity, true}};
    arch.validate();
    CHECK(arch.feature_dim() == 5 * 4); // M1 * floor(D/2)

    std::mt19937_64 rng(43);
    FilterBank bank;
    bank.layers.push_back(oracle::random_mat(3, 5, rng));
    Mat out = channel_forward(bank, oracle::random_mat(2, 9, rng), arch);
    CHECK(out.cols() == 20);
}

TEST_CASE("two-layer scalar-kernel pipeline matches a hand-composed oracle") {
    ArchConfig arch;
    arch.num_channels = 1;
    arch.window_size = 8;
    arch.num_classes = 2;
    arch.fusion_out = 1;
    arch.layers = {LayerSpec{ConvSpec{1, 1, 1}, ActivationKind::NonNegProx, true},
                   LayerSpec{ConvSpec{1, 1, 1}, ActivationKind::Identity, true}};
    FilterBank bank;
    bank.layers.push_back(Mat(1, 1, {1.0}));
    bank.layers.push_back(Mat(1, 1, {2.0}));

    std::mt19937_64 rng(47);
    Mat s = oracle::random_mat(2, 8, rng);
    Mat out = channel_forward(bank, s, arch);
    REQUIRE(out.cols() == 2); // 8 -> pool 4 -> pool 2
    for (std::size_t k = 0; k < 2; ++k) {
        std::vector<double> row(s.data() + k * 8, s.data() + (k + 1) * 8);
        for (double& v : row) v = std::max(v, 0.0);
        std::vector<double> p1 = oracle::maxpool_naive(row);
        for (double& v : p1) v *= 2.0;
        std::vector<double> p2 = oracle::maxpool_naive(p1);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(out(k, i) == doctest::Approx(p2[i]).epsilon(1e-12));
    }
}

TEST_CASE("f_conv special cases") {
    ArchConfig arch = toy_arch(1, 8, 2);
    Instance inst = random_instance(arch, 3, 53);
    const Mat fwd = channel_forward(inst.model.banks[0], inst.signals[0], arch);

    SUBCASE("zero mismatch and zero penalties give zero") {
        CHECK(f_conv(inst.model.banks[0], fwd, inst.signals[0], arch, 0.0, 0.0) ==
              doctest::Approx(0.0));
    }
    SUBCASE("identity filters with mu=1 leave only the Frobenius terms") {
        ArchConfig small;
        small.num_channels = 1;
        small.window_size = 4;
        small.num_classes = 2;
        small.fusion_out = 1;
        small.layers = {LayerSpec{ConvSpec{1, 1, 1}, ActivationKind::Identity, false}};
        FilterBank bank;
        bank.layers.push_back(Mat(1, 1, {1.0}));
        std::mt19937_64 rng(3);
        Mat s = oracle::random_mat(2, 4, rng);
        Mat x = channel_forward(bank, s, small);
        CHECK(f_conv(bank, x, s, small, 1.0, 0.0) == doctest::Approx(1.0)); // ||[1]||_F^2
    }
    SUBCASE("random instance matches an independently coded evaluator") {
        const double mu = 0.3;
        const double lambda = 0.07;
        double expected = 0.0;
        for (std::size_t i = 0; i < fwd.size(); ++i) {
            const double r = fwd.values()[i] - inst.vars.x[0].values()[i];
            expected += 0.5 * r * r;
        }
        for (const Mat& t : inst.model.banks[0].layers) {
            double fro = 0.0;
            for (double v : t.values()) fro += v * v;
            expected += mu * fro - lambda * oracle::logdet_via_singular_values(t);
        }
        CHECK(f_conv(inst.model.banks[0], inst.vars.x[0], inst.signals[0], arch, mu,
                     lambda) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("f_fusion special cases") {
    SUBCASE("matched Z with zero penalties gives zero") {
        std::mt19937_64 rng(59);
        std::vector<Mat> x = {oracle::random_mat(3, 4, rng), oracle::random_mat(3, 4, rng)};
        std::vector<Mat> fusion = {oracle::random_mat(4, 2, rng),
                                   oracle::random_mat(4, 2, rng)};
        Mat z(3, 2);
        axpy(z, 1.0, matmul(x[0], fusion[0]));
        axpy(z, 1.0, matmul(x[1], fusion[1]));
        CHECK(f_fusion(fusion, z, x, 0.0, 0.0) == doctest::Approx(0.0));
    }
    SUBCASE("single-channel identity fusion with Z = X gives zero") {
        std::mt19937_64 rng(61);
        std::vector<Mat> x = {oracle::random_mat(3, 4, rng)};
        std::vector<Mat> fusion = {Mat::identity(4)};
        CHECK(f_fusion(fusion, x[0], x, 0.0, 0.0) == doctest::Approx(0.0));
    }
    SUBCASE("random instance matches the re-evaluation oracle") {
        std::mt19937_64 rng(67);
        std::vector<Mat> x = {oracle::random_mat(3, 4, rng)};
        std::vector<Mat> fusion = {oracle::well_conditioned_mat(4, 3, rng, 0.2)};
        Mat z = oracle::random_mat(3, 3, rng, 0.0, 1.0);
        const double mu = 0.2;
        const double lambda = 0.05;
        Mat fused = matmul(x[0], fusion[0]);
        double expected = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double r = z.values()[i] - fused.values()[i];
            expected += 0.5 * r * r;
        }
        double fro = 0.0;
        for (double v : fusion[0].values()) fro += v * v;
        expected += mu * fro - lambda * oracle::logdet_via_singular_values(fusion[0]);
        CHECK(f_fusion(fusion, z, x, mu, lambda) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("f_ce") {
    SUBCASE("all-equal logits give ln V per sample") {
        Mat theta(2, 3);
        Mat z(1, 2);
        CHECK(f_ce(theta, z, {1}) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
        CHECK(f_ce(theta, z, {1}) == doctest::Approx(1.0986122886681098).epsilon(1e-12));
    }
    SUBCASE("zero classifier gives K ln V") {
        std::mt19937_64 rng(71);
        Mat z = oracle::random_mat(7, 4, rng);
        Mat theta(4, 5);
        LabelVec y = {0, 1, 2, 3, 4, 0, 1};
        CHECK(f_ce(theta, z, y) == doctest::Approx(7.0 * std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("matches the log-softmax oracle") {
        std::mt19937_64 rng(73);
        for (int trial = 0; trial < 10; ++trial) {
            Mat z = oracle::random_mat(5, 3, rng, -4.0, 4.0);
            Mat theta = oracle::random_mat(3, 4, rng, -2.0, 2.0);
            LabelVec y = {0, 3, 1, 2, 0};
            Mat logits = matmul(z, theta);
            double expected = 0.0;
            for (std::size_t k = 0; k < 5; ++k) {
                double denom = 0.0;
                for (std::size_t v = 0; v < 4; ++v) denom += std::exp(logits(k, v));
                expected -= std::log(std::exp(logits(k, static_cast<std::size_t>(y[k]))) /
                                     denom);
            }
            CHECK(f_ce(theta, z, y) == doctest::Approx(expected).epsilon(1e-10));
        }
    }
    SUBCASE("invariant to adding one column vector to every class weight") {
        std::mt19937_64 rng(79);
        Mat z = oracle::random_mat(6, 3, rng);
        Mat theta = oracle::random_mat(3, 4, rng);
        LabelVec y = {1, 0, 3, 2, 1, 0};
        const double base = f_ce(theta, z, y);
        Mat shift = oracle::random_mat(3, 1, rng);
        Mat shifted = theta;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t v = 0; v < 4; ++v) shifted(r, v) += shift(r, 0);
        CHECK(f_ce(shifted, z, y) == doctest::Approx(base).epsilon(1e-9));
    }
    SUBCASE("label out of range raises") {
        Mat theta(2, 3);
        Mat z(1, 2);
        CHECK_THROWS_AS(f_ce(theta, z, {3}), std::invalid_argument);
    }
}

TEST_CASE("joint objective composes additively") {
    ArchConfig arch = toy_arch(2, 8, 3);
    Instance inst = random_instance(arch, 4, 83);
    double expected = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
        expected += f_conv(inst.model.banks[c], inst.vars.x[c], inst.signals[c], arch,
                           arch.mu, arch.lambda);
    expected += f_fusion(inst.model.fusion, inst.vars.z, inst.vars.x, arch.mu, arch.lambda);
    expected += f_ce(inst.model.classifier, inst.vars.z, inst.labels);
    CHECK(joint_objective(inst.model, inst.vars, inst.signals, inst.labels) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("joint objective with matched features and zero weights is K ln V") {
    ArchConfig arch = toy_arch(2, 8, 3);
    arch.mu = 0.0;
    arch.lambda = 0.0;
    Instance inst = random_instance(arch, 4, 89);
    inst.model.arch = arch;
    inst.model.classifier = Mat(arch.fusion_out, arch.num_classes);
    for (std::size_t c = 0; c < 2; ++c)
        inst.vars.x[c] = channel_forward(inst.model.banks[c], inst.signals[c], arch);
    Mat z(4, arch.fusion_out);
    for (std::size_t c = 0; c < 2; ++c)
        axpy(z, 1.0, matmul(inst.vars.x[c], inst.model.fusion[c]));
    inst.vars.z = z;
    CHECK(joint_objective(inst.model, inst.vars, inst.signals, inst.labels) ==
          doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-10));
}

TEST_CASE("grad_joint closed forms") {
    ArchConfig arch = toy_arch(2, 8, 3);
    Instance inst = random_instance(arch, 4, 97);

    SUBCASE("classifier gradient is Z^T (softmax - onehot)") {
        JointGrads g = grad_joint(inst.model, inst.vars, inst.signals, inst.labels);
        Mat p = softmax_rows(matmul(inst.vars.z, inst.model.classifier));
        for (std::size_t k = 0; k < 4; ++k)
            p(k, static_cast<std::size_t>(inst.labels[k])) -= 1.0;
        Mat want = matmul_tn(inst.vars.z, p);
        CHECK(oracle::block_rel_error(g.classifier, want) < 1e-12);
    }
    SUBCASE("matched X with zero penalties zeroes the transform gradient") {
        ArchConfig free_arch = arch;
        free_arch.mu = 0.0;
        free_arch.lambda = 0.0;
        Instance matched = random_instance(free_arch, 4, 101);
        matched.model.arch = free_arch;
        for (std::size_t c = 0; c < 2; ++c)
            matched.vars.x[c] =
                channel_forward(matched.model.banks[c], matched.signals[c], free_arch);
        // Decouple the fusion term so only the conv mismatch could push on T.
        for (std::size_t c = 0; c < 2; ++c)
            matched.model.fusion[c] = Mat(free_arch.feature_dim(), free_arch.fusion_out);
        JointGrads g = grad_joint(matched.model, matched.vars, matched.signals,
                                  matched.labels);
        for (std::size_t c = 0; c < 2; ++c)
            for (const Mat& t : g.banks[c])
                for (double v : t.values()) CHECK(std::abs(v) < 1e-12);
    }
}

TEST_CASE("grad_joint matches finite differences on every block") {
    ArchConfig arch = toy_arch(2, 8, 3);
    Instance inst = random_instance(arch, 4, 103);
    auto eval = [&] {
        return joint_objective(inst.model, inst.vars, inst.signals, inst.labels);
    };
    JointGrads g = grad_joint(inst.model, inst.vars, inst.signals, inst.labels);

    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t l = 0; l < arch.layers.size(); ++l) {
            Mat fd = oracle::fd_gradient(eval, inst.model.banks[c].layers[l]);
            CHECK(oracle::block_rel_error(g.banks[c][l], fd) < 1e-4);
        }
        Mat fdx = oracle::fd_gradient(eval, inst.vars.x[c]);
        CHECK(oracle::block_rel_error(g.x[c], fdx) < 1e-4);
        Mat fdf = oracle::fd_gradient(eval, inst.model.fusion[c]);
        CHECK(oracle::block_rel_error(g.fusion[c], fdf) < 1e-4);
    }
    Mat fdz = oracle::fd_gradient(eval, inst.vars.z);
    CHECK(oracle::block_rel_error(g.z, fdz) < 1e-4);
    Mat fdt = oracle::fd_gradient(eval, inst.model.classifier);
    CHECK(oracle::block_rel_error(g.classifier, fdt) < 1e-4);
}

TEST_CASE("prox/argmin identity: minimizing F(T, .) recovers NonNegProx(T conv S)") {
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 20; ++trial) {
        Mat t = oracle::random_mat(3, 2, rng);
        Mat s = oracle::random_mat(2, 5, rng);
        Mat u = conv_bank(t, s);
        Mat prox = nonneg_prox(u);
        // Coordinate-wise convex minimization of 1/2 (x - u)^2 over x >= 0.
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double ui = u.values()[i];
            const double xstar = oracle::ternary_argmin(
                [&](double x) { return 0.5 * (x - ui) * (x - ui); }, 0.0,
                std::max(1.0, std::abs(ui) + 1.0));
            CHECK(std::abs(xstar - prox.values()[i]) < 1e-9);
        }
    }
}

TEST_CASE("infer") {
    ArchConfig arch = toy_arch(2, 8, 3);
    Instance inst = random_instance(arch, 5, 109);

    SUBCASE("zero classifier gives uniform rows") {
        inst.model.classifier = Mat(arch.fusion_out, arch.num_classes);
        Mat p = infer(inst.model, inst.signals);
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(p.values()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("rows are probability vectors") {
        Mat p = infer(inst.model, inst.signals);
        for (std::size_t k = 0; k < p.rows(); ++k) {
            double sum = 0.0;
            for (std::size_t v = 0; v < p.cols(); ++v) {
                CHECK(p(k, v) >= 0.0);
                sum += p(k, v);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
    SUBCASE("prox and linear inference modes differ in general") {
        Mat with_prox = infer(inst.model, inst.signals);
        inst.model.arch.prox_inference = false;
        Mat linear = infer(inst.model, inst.signals);
        bool any_diff = false;
        for (std::size_t i = 0; i < with_prox.size(); ++i)
            if (std::abs(with_prox.values()[i] - linear.values()[i]) > 1e-12)
                any_diff = true;
        CHECK(any_diff);
    }
}

TEST_CASE("model JSON round-trip is exact") {
    ArchConfig arch = toy_arch(2, 8, 3);
    Instance inst = random_instance(arch, 2, 113);
    const std::string text = model_to_json(inst.model);
    SdcfModel back = model_from_json(text);
    REQUIRE(back.banks.size() == inst.model.banks.size());
    for (std::size_t c = 0; c < back.banks.size(); ++c)
        for (std::size_t l = 0; l < back.banks[c].layers.size(); ++l)
            CHECK(back.banks[c].layers[l].values() ==
                  inst.model.banks[c].layers[l].values());
    for (std::size_t c = 0; c < back.fusion.size(); ++c)
        CHECK(back.fusion[c].values() == inst.model.fusion[c].values());
    CHECK(back.classifier.values() == inst.model.classifier.values());
    CHECK(back.arch.window_size == arch.window_size);
    CHECK(back.arch.layers.size() == arch.layers.size());
    CHECK(model_to_json(back) == text);

    CHECK_THROWS(model_from_json("{ not json"));
}

TEST_CASE("arch validation") {
    ArchConfig arch = toy_arch(1, 8, 3);
    CHECK_NOTHROW(arch.validate());

    SUBCASE("last layer must be identity") {
        arch.layers.back().activation = ActivationKind::Selu;
        CHECK_THROWS_AS(arch.validate(), config_error);
    }
    SUBCASE("window must survive the pools") {
        arch.window_size = 3; // 3 -> 1, second pool impossible
        CHECK_THROWS_AS(arch.validate(), config_error);
    }
    SUBCASE("channel chaining is checked") {
        arch.layers[1].conv.in_channels = 5;
        CHECK_THROWS_AS(arch.validate(), config_error);
    }
    SUBCASE("fusion width is bounded by I*C") {
        arch.fusion_out = 1000;
        CHECK_THROWS_AS(arch.validate(), config_error);
    }
}
