#pragma once

// Shared stochastic sub-gradient trainer for linear hinge / epsilon-insensitive
// objectives. Used by pixel-level foreground segmentation and by the patch
// SVC/SVR baselines, which are contractually the same procedure.

#include <cstdint>
#include <vector>

namespace hsi {

struct LinearModel {
    std::vector<float> weights;
    float bias = 0.0f;
};

// Minimizes lambda/2 ||w||^2 + mean(max(0, 1 - y (w.x + b))), labels +-1.
// Step size 1/(lambda t) with t counting visited samples from 1; samples
// visited in a seed-shuffled order each epoch. The bias is carried as the
// weight of an implicit constant-1 feature, so it shares the
// (1 - 1/t) shrink — left unshrunk, the first step (eta = 1/lambda) throws
// it to +-1/lambda with no way back. The returned model is the average of
// the iterates over the second half of the schedule; the final iterate alone
// is one eta_t-sized step away from wherever the last sample pushed it,
// which for small lambda swamps the learned margins. The sequential order is
// part of the contract (determinism given seed).
LinearModel train_binary_hinge(const float* features, const int8_t* labels, size_t n, size_t dim,
                               double lambda, uint32_t epochs, uint64_t seed);

// Minimizes lambda/2 ||w||^2 + mean(max(0, |y - (w.x + b)| - epsilon_tube));
// same schedule and shuffling as the hinge trainer.
LinearModel train_epsilon_regression(const float* features, const float* targets, size_t n,
                                     size_t dim, double lambda, double epsilon_tube,
                                     uint32_t epochs, uint64_t seed);

double hinge_objective(const float* features, const int8_t* labels, size_t n, size_t dim,
                       const LinearModel& model, double lambda);

double linear_score(const float* x, size_t dim, const LinearModel& model);

}  // namespace hsi
