#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "driftbench/dataset.hpp"

namespace driftbench {

/// Layer widths. Defaults are the full-size network over 3 x 2304 features.
struct MlpShape {
    std::size_t input_dim = 6912;
    std::size_t hidden1 = 4096;
    std::size_t hidden2 = 512;
    std::size_t n_classes = 9;

    bool operator==(const MlpShape&) const = default;
};

/// Two fully connected blocks (linear, layer norm, ReLU, dropout) followed by
/// one independent linear head per class over the shared trunk. Weight
/// matrices are stored out x in.
struct MlpParams {
    MlpShape shape;
    Matrix w1;
    Vector b1, ln1_gain, ln1_bias;
    Matrix w2;
    Vector b2, ln2_gain, ln2_bias;
    Matrix head_w;
    Vector head_b;

    static MlpParams Zeros(const MlpShape& shape);

    /// Every tensor in checkpoint field order.
    std::vector<std::span<double>> Tensors();
    std::vector<std::span<const double>> Tensors() const;
    std::size_t ParameterCount() const;
    void Validate() const;

    bool operator==(const MlpParams& other) const;
};

inline constexpr double kLayerNormEps = 1e-5;

/// Inverted-dropout masks: entries are 0 or 1 / (1 - drop_prob).
struct DropoutMasks {
    Matrix layer1;  // batch x hidden1
    Matrix layer2;  // batch x hidden2
};

DropoutMasks SampleDropoutMasks(const MlpShape& shape, std::size_t batch, double drop_prob,
                                std::uint64_t seed);

/// Activations kept by a training-mode forward pass for Backward().
struct ForwardTrace {
    MlpShape shape;
    Matrix input;
    Matrix norm1, norm2;        // pre-affine normalized activations
    Vector inv_std1, inv_std2;  // per sample 1 / sqrt(var + eps)
    Matrix affine1, affine2;    // post-affine, pre-ReLU
    DropoutMasks masks;
    Matrix out1, out2;          // post-dropout block outputs
    Matrix logits;
};

/// Eval mode: no dropout.
Matrix Forward(const MlpParams& params, const Matrix& batch);

/// Training mode with seeded Bernoulli(1 - drop_prob) masks.
ForwardTrace ForwardTrain(const MlpParams& params, const Matrix& batch, double drop_prob,
                          std::uint64_t seed);

/// Training mode with caller-supplied masks.
ForwardTrace ForwardTrain(const MlpParams& params, const Matrix& batch, DropoutMasks masks);

struct LossResult {
    double loss = 0.0;
    Matrix grad_logits;
};

/// One-vs-all binary cross-entropy, mean over batch x classes, evaluated in
/// the stable logit form max(z, 0) - z*y + log1p(exp(-|z|)).
LossResult OvaBceLoss(const Matrix& logits, const Matrix& targets);

/// batch x n_classes one-hot targets.
Matrix OneHotTargets(std::span<const std::size_t> labels, std::size_t n_classes);

/// Gradients of the loss with respect to every parameter, shaped like params.
MlpParams Backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& grad_logits);

/// Row-wise argmax, ties to the lowest index.
std::vector<std::size_t> Predict(const Matrix& logits);

/// Weights uniform in (-s, s) with s = sqrt(6 / fan_in); biases 0; layer-norm
/// gain 1 and bias 0.
MlpParams InitParams(const MlpShape& shape, std::uint64_t seed);

/// "EMLP" | u32 input_dim, hidden1, hidden2, n_classes | tensors as f32.
void WriteCheckpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams ReadCheckpoint(const std::filesystem::path& path);

}  // namespace driftbench
