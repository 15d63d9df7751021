#pragma once

// Small residual CNN with explicit forward and backward passes: 3x3 stem
// convolution -> residual blocks (conv3x3 -> rectifier -> conv3x3, identity
// or 1x1-projection skip, rectifier after the addition) -> global average
// pool -> fully-connected 7-way head. No batch normalization: the manual
// backward pass stays verifiable by finite differences without
// running-statistics state; He-style init compensates.
//
// Network file format (HRN, little-endian): magic "HRN1", u32 header length,
// JSON header (config + per-layer parameter offsets), raw f32 parameter blob.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hsi/patches.hpp"
#include "hsi/svm.hpp"  // EvalReport

namespace hsi {

struct NetConfig {
    uint32_t input_n = 19;
    uint32_t input_bands = 11;
    uint32_t stem_channels = 16;
    uint32_t stem_stride = 2;  // halves the spatial grid up front
    uint32_t num_blocks = 3;
    std::vector<uint32_t> channels_per_stage{16, 24, 32};
    uint32_t num_classes = 7;
    bool use_rectifier = true;  // off = fully linear net (gradient-check aid)
    uint64_t seed = 0;

    // Per-band input standardization x' = (x - mean) * gain applied ahead of
    // the stem. Both empty = identity. train() fills them from the training
    // split when empty, so a saved net carries its own input conditioning.
    // Reflectance patches sit around 0.4 with class-relevant variation a few
    // percent of that; without centering the cross-entropy stalls on the
    // common mode.
    std::vector<float> input_mean;
    std::vector<float> input_gain;

    void validate() const;
};

struct LayerSpan {
    std::string name;
    size_t weight_offset = 0;
    size_t weight_count = 0;
    size_t bias_offset = 0;
    size_t bias_count = 0;
};

struct ResidualNet {
    NetConfig config;
    std::vector<float> params;     // flat store; layer order documented below
    std::vector<LayerSpan> layers;

    size_t param_count() const { return params.size(); }
};

// Parameter store order: stem (W, b), then per block conv1 (W, b), conv2
// (W, b), projection (W, b) when in/out channels differ, then the head
// (W, b). Conv weights are [ky][kx][ci][co] with co contiguous; head weights
// [ci][co]. Closed form:
//   9*bands*c0 + c0
//   + sum over blocks: 9*ci*co + co + 9*co*co + co (+ ci*co + co if ci != co)
//   + c_last*classes + classes
size_t expected_param_count(const NetConfig& config);

// Convolution weights ~ N(0, 2/fan_in), biases zero; draws fill the store in
// parameter order (biases consume no draws). Deterministic given config.seed.
ResidualNet init_net(const NetConfig& config);

// y = rectifier(F(x) + skip(x)) for one block; x is HWC with the block's
// input channel count at the given spatial side. Exposed for direct testing.
std::vector<float> residual_block_forward(const ResidualNet& net, size_t block_index,
                                          const std::vector<float>& x, uint32_t spatial);

// Logits, batch x num_classes row-major.
std::vector<float> forward(const ResidualNet& net, const PatchSet& batch);
std::vector<float> forward_serial(const ResidualNet& net, const PatchSet& batch);

// Mean softmax cross-entropy over the batch and its gradient, aligned with
// the parameter store. Labels are rating classes. Per-item gradients are
// reduced serially in item order, so results do not depend on thread count.
std::pair<double, std::vector<float>> loss_and_grad(const ResidualNet& net,
                                                    const PatchSet& batch,
                                                    const std::vector<int>& labels);
std::pair<double, std::vector<float>> loss_and_grad_serial(const ResidualNet& net,
                                                           const PatchSet& batch,
                                                           const std::vector<int>& labels);

// Central finite differences (f(p+h) - f(p-h)) / 2h against the analytic
// gradient; returns max over parameters of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). Runs the same
// layer code instantiated in double precision so the difference quotient is
// not drowned by fp32 rounding of the loss. corrupt_param (when not SIZE_MAX)
// multiplies that analytic entry by 1.1 first — a forced-failure hook proving
// the oracle can fail.
double gradient_check(const ResidualNet& net, const PatchSet& batch, double step = 1e-3,
                      size_t corrupt_param = SIZE_MAX);

struct EpochRecord {
    uint32_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double final_test_accuracy = 0.0;
};

struct TrainOptions {
    uint32_t epochs = 30;
    double lr = 0.01;
    double momentum = 0.9;
    double lr_decay = 0.1;  // multiplied in at 60% and 85% of the epochs
    uint32_t batch_size = 32;
    uint64_t seed = 0;
};

// Mini-batch SGD with momentum (v <- momentum*v + g; p <- p - lr*v),
// seed-shuffled batches, decay milestones at floor(0.6*epochs) and
// floor(0.85*epochs). Train metrics are accumulated on the fly (pre-update
// per batch); validation is evaluated per epoch, test once at the end.
std::pair<ResidualNet, TrainReport> train(ResidualNet net, const SplitResult& split,
                                          const TrainOptions& options);

inline std::pair<ResidualNet, TrainReport> train(ResidualNet net, const SplitResult& split,
                                                 uint32_t epochs, double lr, double momentum,
                                                 double lr_decay, uint64_t seed) {
    TrainOptions options;
    options.epochs = epochs;
    options.lr = lr;
    options.momentum = momentum;
    options.lr_decay = lr_decay;
    options.seed = seed;
    return train(std::move(net), split, options);
}

std::vector<int> predict_net(const ResidualNet& net, const PatchSet& set);
EvalReport evaluate_net(const ResidualNet& net, const PatchSet& set);

// CSV columns: epoch,train_loss,train_acc,val_acc
std::string train_report_to_csv(const TrainReport& report);

void save_net(const ResidualNet& net, const std::filesystem::path& path);
ResidualNet load_net(const std::filesystem::path& path);

}  // namespace hsi
