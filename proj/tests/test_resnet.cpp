#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "hsi/patches.hpp"
#include "hsi/resnet.hpp"
#include "hsi/rng.hpp"
#include "hsi/synthgen.hpp"

using namespace hsi;

namespace {

// Tiny config that keeps forward/backward fast in the unit suite.
NetConfig tiny_config(uint64_t seed = 0) {
    NetConfig cfg;
    cfg.input_n = 9;
    cfg.input_bands = 3;
    cfg.stem_channels = 4;
    cfg.num_blocks = 2;
    cfg.channels_per_stage = {4, 6};
    cfg.seed = seed;
    return cfg;
}

PatchSet random_batch(const NetConfig& cfg, size_t count, uint64_t seed) {
    PatchSet set;
    Rng rng(seed);
    for (size_t i = 0; i < count; ++i) {
        Patch p;
        p.n = cfg.input_n;
        p.bands = cfg.input_bands;
        p.data.resize(static_cast<size_t>(p.n) * p.n * p.bands);
        for (float& v : p.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
        p.label = kRatingClasses[i % kRatingClasses.size()];
        p.row = static_cast<uint32_t>(i);
        set.append(std::move(p));
    }
    return set;
}

}  // namespace

TEST_SUITE_BEGIN("resnet");

TEST_CASE("parameter count matches the closed form") {
    CHECK(expected_param_count(NetConfig{}) == 32559);

    const NetConfig cfg = tiny_config();
    // stem 9*3*4+4; block0 (4->4): (9*16+4)*2; block1 (4->6):
    // 9*4*6+6 + 9*6*6+6 + proj 4*6+6; head 6*7+7.
    const size_t expect = (9 * 3 * 4 + 4) + (9 * 16 + 4) * 2 +
                          (9 * 24 + 6 + 9 * 36 + 6 + 24 + 6) + (6 * 7 + 7);
    CHECK(expected_param_count(cfg) == expect);

    const ResidualNet net = init_net(cfg);
    CHECK(net.param_count() == expect);

    // Layer spans tile the store without gaps.
    size_t cursor = 0;
    for (const LayerSpan& layer : net.layers) {
        CHECK(layer.weight_offset == cursor);
        cursor += layer.weight_count;
        CHECK(layer.bias_offset == cursor);
        cursor += layer.bias_count;
    }
    CHECK(cursor == net.param_count());
}

TEST_CASE("initialization is deterministic, seed-sensitive, zero-bias") {
    const ResidualNet a = init_net(tiny_config(5));
    const ResidualNet b = init_net(tiny_config(5));
    CHECK(a.params == b.params);
    const ResidualNet c = init_net(tiny_config(6));
    CHECK(a.params != c.params);

    for (const LayerSpan& layer : a.layers)
        for (size_t i = 0; i < layer.bias_count; ++i)
            CHECK(a.params[layer.bias_offset + i] == 0.0f);

    // Stem weights follow He scaling: sample variance near 2/fan_in.
    const LayerSpan& stem = a.layers.front();
    double sum = 0.0, sumsq = 0.0;
    for (size_t i = 0; i < stem.weight_count; ++i) {
        sum += a.params[stem.weight_offset + i];
        sumsq += static_cast<double>(a.params[stem.weight_offset + i]) *
                 a.params[stem.weight_offset + i];
    }
    const double n = static_cast<double>(stem.weight_count);
    const double var = sumsq / n - (sum / n) * (sum / n);
    const double expect_var = 2.0 / (9.0 * 3.0);
    CHECK(var == doctest::Approx(expect_var).epsilon(0.35));
}

TEST_CASE("config validation rejects inconsistent shapes") {
    NetConfig cfg = tiny_config();
    cfg.channels_per_stage = {4};
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg = tiny_config();
    cfg.input_n = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg = tiny_config();
    cfg.input_mean = {0.5f, 0.5f, 0.5f};
    CHECK_THROWS_AS(cfg.validate(), Error);  // gain missing
    cfg.input_gain = {1.0f, 1.0f};
    CHECK_THROWS_AS(cfg.validate(), Error);  // wrong length
    cfg.input_gain = {1.0f, 1.0f, 1.0f};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a zeroed residual branch is the identity on nonnegative input") {
    NetConfig cfg = tiny_config(3);
    ResidualNet net = init_net(cfg);
    // Block 0 keeps 4 channels: skip is the identity. Zero its convolutions.
    for (const LayerSpan& layer : net.layers) {
        if (layer.name.rfind("block0.", 0) != 0) continue;
        for (size_t i = 0; i < layer.weight_count; ++i)
            net.params[layer.weight_offset + i] = 0.0f;
    }
    Rng rng(31);
    std::vector<float> x(5 * 5 * 4);
    for (float& v : x) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const std::vector<float> y = residual_block_forward(net, 0, x, 5);
    REQUIRE(y.size() == x.size());
    for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    // A negative entry is clipped by the post-addition rectifier instead.
    x[7] = -0.25f;
    const std::vector<float> clipped = residual_block_forward(net, 0, x, 5);
    CHECK(clipped[7] == 0.0f);
}

TEST_CASE("logit shape and per-row softmax normalization") {
    const NetConfig cfg = tiny_config(11);
    const ResidualNet net = init_net(cfg);
    const PatchSet batch = random_batch(cfg, 5, 21);
    const std::vector<float> logits = forward(net, batch);
    REQUIRE(logits.size() == 5 * 7);

    for (size_t i = 0; i < 5; ++i) {
        double denom = 0.0;
        for (size_t k = 0; k < 7; ++k) denom += std::exp(static_cast<double>(logits[i * 7 + k]));
        double sum = 0.0;
        for (size_t k = 0; k < 7; ++k)
            sum += std::exp(static_cast<double>(logits[i * 7 + k])) / denom;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Duplicated item produces identical rows.
    PatchSet dup;
    dup.append(batch.patches[2]);
    Patch copy = batch.patches[2];
    dup.append(std::move(copy));
    const std::vector<float> two = forward(net, dup);
    for (size_t k = 0; k < 7; ++k) CHECK(two[k] == two[7 + k]);
}

TEST_CASE("zeroed head gives uniform logits and ln(7) loss") {
    const NetConfig cfg = tiny_config(13);
    ResidualNet net = init_net(cfg);
    const LayerSpan& head = net.layers.back();
    for (size_t i = 0; i < head.weight_count; ++i) net.params[head.weight_offset + i] = 0.0f;

    const PatchSet batch = random_batch(cfg, 4, 33);
    const std::vector<float> logits = forward(net, batch);
    for (float v : logits) CHECK(v == 0.0f);

    // The batch loss is evaluated at float precision, so ln(7) only holds to
    // float rounding.
    const auto [loss, grad] = loss_and_grad(net, batch, set_labels(batch));
    CHECK(loss == doctest::Approx(std::log(7.0)).epsilon(1e-6));
    CHECK(grad.size() == net.param_count());
}

TEST_CASE("duplicating the batch leaves the mean loss unchanged") {
    const NetConfig cfg = tiny_config(17);
    const ResidualNet net = init_net(cfg);
    const PatchSet batch = random_batch(cfg, 3, 41);
    PatchSet doubled = batch;
    for (const Patch& p : batch.patches) {
        Patch copy = p;
        doubled.append(std::move(copy));
    }
    const auto [loss1, grad1] = loss_and_grad(net, batch, set_labels(batch));
    const auto [loss2, grad2] = loss_and_grad(net, doubled, set_labels(doubled));
    CHECK(loss1 == doctest::Approx(loss2).epsilon(1e-12));
    for (size_t i = 0; i < grad1.size(); ++i)
        CHECK(grad1[i] == doctest::Approx(grad2[i]).epsilon(1e-6));
}

TEST_CASE("analytic gradient matches finite differences on a tiny net") {
    NetConfig cfg;
    cfg.input_n = 9;
    cfg.input_bands = 3;
    cfg.stem_channels = 4;
    cfg.num_blocks = 1;
    cfg.channels_per_stage = {4};
    cfg.seed = 2;
    const ResidualNet net = init_net(cfg);
    const PatchSet batch = random_batch(cfg, 2, 99);
    // 1e-4 steps stay below the rectifier kinks for this seed.
    CHECK(gradient_check(net, batch, 1e-4) < 1e-3);

    // The corruption hook must push the discrepancy above the bar. Corrupt
    // the entry with the largest gradient so the 10% scaling is visible.
    const auto [loss, grad] = loss_and_grad(net, batch, set_labels(batch));
    size_t worst = 0;
    for (size_t i = 0; i < grad.size(); ++i)
        if (std::abs(grad[i]) > std::abs(grad[worst])) worst = i;
    CHECK(gradient_check(net, batch, 1e-4, worst) > 1e-2);

    // Rectifiers off: the net is linear in activations, kinks vanish.
    cfg.use_rectifier = false;
    cfg.seed = 0;
    const ResidualNet linear = init_net(cfg);
    CHECK(gradient_check(linear, batch, 1e-3) < 1e-4);
}

TEST_CASE("standardized inputs shift the logits, not the API") {
    NetConfig cfg = tiny_config(19);
    const PatchSet batch = random_batch(cfg, 3, 55);
    const ResidualNet plain = init_net(cfg);

    cfg.input_mean = {0.5f, 0.5f, 0.5f};
    cfg.input_gain = {2.0f, 2.0f, 2.0f};
    const ResidualNet standardized = init_net(cfg);
    CHECK(plain.params == standardized.params);  // same seed, same draws
    CHECK(forward(plain, batch) != forward(standardized, batch));
}

TEST_CASE("training with zero learning rate changes nothing") {
    const NetConfig cfg = tiny_config(23);
    PatchSet set = random_batch(cfg, 21, 61);
    const SplitResult parts = split(set, {}, 7);
    ResidualNet net = init_net(cfg);
    // Standardization must be pinned, otherwise train() fills it in.
    net.config.input_mean = {0.0f, 0.0f, 0.0f};
    net.config.input_gain = {1.0f, 1.0f, 1.0f};
    const std::vector<float> before = net.params;

    TrainOptions options;
    options.epochs = 2;
    options.lr = 0.0;
    options.batch_size = 4;
    const auto [trained, report] = train(std::move(net), parts, options);
    CHECK(trained.params == before);
    CHECK(report.epochs.size() == 2);
}

TEST_CASE("train fills input standardization from the training split") {
    const NetConfig cfg = tiny_config(29);
    PatchSet set = random_batch(cfg, 30, 71);
    const SplitResult parts = split(set, {}, 9);
    TrainOptions options;
    options.epochs = 1;
    options.lr = 0.001;
    options.batch_size = 8;
    const auto [trained, report] = train(init_net(cfg), parts, options);
    REQUIRE(trained.config.input_mean.size() == 3);
    REQUIRE(trained.config.input_gain.size() == 3);

    // Uniform(0,1) values: mean near 0.5, std near 0.289 -> gain near 3.46.
    for (float m : trained.config.input_mean) CHECK(m == doctest::Approx(0.5).epsilon(0.15));
    for (float g : trained.config.input_gain)
        CHECK(g == doctest::Approx(1.0 / 0.2887).epsilon(0.2));
}

TEST_CASE("a single patch is memorized quickly") {
    NetConfig cfg = tiny_config(31);
    PatchSet one = random_batch(cfg, 1, 81);
    one.patches[0].label = 6;
    SplitResult parts;
    parts.train = one;
    parts.validation = one;
    parts.test = one;

    TrainOptions options;
    options.epochs = 25;
    options.lr = 0.02;
    options.batch_size = 1;
    const auto [net, report] = train(init_net(cfg), parts, options);
    CHECK(report.final_test_accuracy == doctest::Approx(1.0));
    CHECK(predict_net(net, one) == std::vector<int>{6});
    CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);
}

TEST_CASE("an untrained net scores near chance on balanced data") {
    const NetConfig base = tiny_config();
    PatchSet set = random_batch(base, 70, 91);
    double total = 0.0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        NetConfig cfg = tiny_config(seed);
        total += evaluate_net(init_net(cfg), set).accuracy;
    }
    const double mean = total / 10.0;
    CHECK(mean > 0.03);
    CHECK(mean < 0.35);
}

TEST_CASE("training is bitwise deterministic") {
    const NetConfig cfg = tiny_config(37);
    PatchSet set = random_batch(cfg, 28, 101);
    const SplitResult parts = split(set, {}, 3);
    TrainOptions options;
    options.epochs = 2;
    options.lr = 0.01;
    options.batch_size = 8;
    const auto [net_a, report_a] = train(init_net(cfg), parts, options);
    const auto [net_b, report_b] = train(init_net(cfg), parts, options);
    CHECK(net_a.params == net_b.params);
    REQUIRE(report_a.epochs.size() == report_b.epochs.size());
    for (size_t i = 0; i < report_a.epochs.size(); ++i) {
        CHECK(report_a.epochs[i].train_loss == report_b.epochs[i].train_loss);
        CHECK(report_a.epochs[i].val_accuracy == report_b.epochs[i].val_accuracy);
    }
}

TEST_CASE("serial and parallel passes agree bitwise") {
    const NetConfig cfg = tiny_config(41);
    const ResidualNet net = init_net(cfg);
    const PatchSet batch = random_batch(cfg, 9, 111);
    CHECK(forward(net, batch) == forward_serial(net, batch));
    const auto [loss_p, grad_p] = loss_and_grad(net, batch, set_labels(batch));
    const auto [loss_s, grad_s] = loss_and_grad_serial(net, batch, set_labels(batch));
    CHECK(loss_p == loss_s);
    CHECK(grad_p == grad_s);
}

TEST_CASE("network file round trip preserves everything") {
    hsi_test::TempDir dir("resnet_io");
    NetConfig cfg = tiny_config(43);
    cfg.input_mean = {0.4f, 0.5f, 0.6f};
    cfg.input_gain = {3.0f, 3.5f, 4.0f};
    const ResidualNet net = init_net(cfg);

    const auto path = dir / "net.hrn";
    save_net(net, path);
    const ResidualNet back = load_net(path);
    CHECK(back.params == net.params);
    CHECK(back.config.input_n == cfg.input_n);
    CHECK(back.config.input_bands == cfg.input_bands);
    CHECK(back.config.channels_per_stage == cfg.channels_per_stage);
    CHECK(back.config.use_rectifier == cfg.use_rectifier);
    CHECK(back.config.seed == cfg.seed);
    CHECK(back.config.input_mean == cfg.input_mean);
    CHECK(back.config.input_gain == cfg.input_gain);
    REQUIRE(back.layers.size() == net.layers.size());
    for (size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(back.layers[i].name == net.layers[i].name);
        CHECK(back.layers[i].weight_offset == net.layers[i].weight_offset);
        CHECK(back.layers[i].weight_count == net.layers[i].weight_count);
    }

    // A loaded net computes the same logits.
    const PatchSet batch = random_batch(cfg, 3, 121);
    CHECK(forward(back, batch) == forward(net, batch));
}

TEST_CASE("train report serializes as CSV") {
    TrainReport report;
    report.epochs.push_back({1, 1.5, 0.3, 0.25});
    report.epochs.push_back({2, 1.1, 0.5, 0.45});
    const std::string csv = train_report_to_csv(report);
    CHECK(csv.rfind("epoch,train_loss,train_acc,val_acc\n", 0) == 0);
    CHECK(csv.find("\n2,") != std::string::npos);
}

TEST_SUITE_END();
