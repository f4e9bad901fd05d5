#include "driftbench/mlp.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "byte_io.hpp"
#include "rng.hpp"

namespace driftbench {

MlpParams MlpParams::Zeros(const MlpShape& s) {
    if (s.input_dim < 1 || s.hidden1 < 1 || s.hidden2 < 1) {
        throw Error(ErrorKind::kInvalidArgument, "layer widths must be positive");
    }
    if (s.n_classes < 2) throw Error(ErrorKind::kInvalidArgument, "n_classes must be at least 2");
    const auto in = static_cast<Eigen::Index>(s.input_dim);
    const auto h1 = static_cast<Eigen::Index>(s.hidden1);
    const auto h2 = static_cast<Eigen::Index>(s.hidden2);
    const auto c = static_cast<Eigen::Index>(s.n_classes);
    MlpParams p;
    p.shape = s;
    p.w1 = Matrix::Zero(h1, in);
    p.b1 = Vector::Zero(h1);
    p.ln1_gain = Vector::Zero(h1);
    p.ln1_bias = Vector::Zero(h1);
    p.w2 = Matrix::Zero(h2, h1);
    p.b2 = Vector::Zero(h2);
    p.ln2_gain = Vector::Zero(h2);
    p.ln2_bias = Vector::Zero(h2);
    p.head_w = Matrix::Zero(c, h2);
    p.head_b = Vector::Zero(c);
    return p;
}

namespace {

template <class Self>
auto TensorSpans(Self& p) {
    using Span = std::conditional_t<std::is_const_v<Self>, std::span<const double>, std::span<double>>;
    auto span_of = [](auto& t) { return Span(t.data(), static_cast<std::size_t>(t.size())); };
    return std::vector<Span>{span_of(p.w1),       span_of(p.b1),     span_of(p.ln1_gain),
                             span_of(p.ln1_bias), span_of(p.w2),     span_of(p.b2),
                             span_of(p.ln2_gain), span_of(p.ln2_bias), span_of(p.head_w),
                             span_of(p.head_b)};
}

}  // namespace

std::vector<std::span<double>> MlpParams::Tensors() { return TensorSpans(*this); }
std::vector<std::span<const double>> MlpParams::Tensors() const { return TensorSpans(*this); }

std::size_t MlpParams::ParameterCount() const {
    std::size_t n = 0;
    for (auto t : Tensors()) n += t.size();
    return n;
}

void MlpParams::Validate() const {
    const MlpParams expected = Zeros(shape);
    const auto want = expected.Tensors();
    const auto have = Tensors();
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (want[i].size() != have[i].size()) {
            throw Error(ErrorKind::kDimensionMismatch, "parameter tensor " + std::to_string(i) +
                                                           " does not match the declared shape");
        }
        for (double v : have[i]) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::kNonFinite,
                            "parameter tensor " + std::to_string(i) + " holds a non-finite value");
            }
        }
    }
}

bool MlpParams::operator==(const MlpParams& other) const {
    if (!(shape == other.shape)) return false;
    const auto a = Tensors();
    const auto b = other.Tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size() ||
            std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

DropoutMasks SampleDropoutMasks(const MlpShape& shape, std::size_t batch, double drop_prob,
                                std::uint64_t seed) {
    if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
        throw Error(ErrorKind::kInvalidArgument, "drop_prob must lie in [0, 1)");
    }
    std::mt19937_64 rng(seed);
    const double keep_scale = 1.0 / (1.0 - drop_prob);
    auto sample = [&](std::size_t width) {
        Matrix m(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(width));
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = detail::Uniform01(rng) >= drop_prob ? keep_scale : 0.0;
        }
        return m;
    };
    DropoutMasks masks;
    masks.layer1 = sample(shape.hidden1);
    masks.layer2 = sample(shape.hidden2);
    return masks;
}

namespace {

void CheckBatch(const MlpParams& params, const Matrix& batch) {
    if (static_cast<std::size_t>(batch.cols()) != params.shape.input_dim) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "batch width " + std::to_string(batch.cols()) + " != input_dim " +
                        std::to_string(params.shape.input_dim));
    }
    if (!batch.allFinite()) throw Error(ErrorKind::kNonFinite, "batch contains non-finite values");
}

// Normalizes each row of `pre` in place and returns 1 / sqrt(var + eps) per row.
Vector NormalizeRows(Matrix& pre) {
    Vector inv_std(pre.rows());
    const double width = static_cast<double>(pre.cols());
    for (Eigen::Index i = 0; i < pre.rows(); ++i) {
        auto row = pre.row(i);
        const double mean = row.sum() / width;
        row.array() -= mean;
        const double var = row.squaredNorm() / width;
        inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
        row *= inv_std(i);
    }
    return inv_std;
}

struct Block {
    Matrix norm;
    Vector inv_std;
    Matrix affine;
    Matrix out;
};

Block RunBlock(const Matrix& in, const Matrix& w, const Vector& b, const Vector& gain,
               const Vector& bias, const Matrix* mask) {
    Block blk;
    blk.norm.noalias() = in * w.transpose();
    blk.norm.rowwise() += b.transpose();
    blk.inv_std = NormalizeRows(blk.norm);
    blk.affine = (blk.norm.array().rowwise() * gain.transpose().array()).rowwise() +
                 bias.transpose().array();
    blk.out = blk.affine.cwiseMax(0.0);
    if (mask != nullptr) blk.out.array() *= mask->array();
    return blk;
}

Matrix Heads(const MlpParams& p, const Matrix& trunk) {
    Matrix logits = trunk * p.head_w.transpose();
    logits.rowwise() += p.head_b.transpose();
    return logits;
}

// Backprop through affine layer norm: returns d(pre-normalization input).
Matrix LayerNormBackward(const Matrix& d_affine, const Matrix& norm, const Vector& inv_std,
                         const Vector& gain, Vector& d_gain, Vector& d_bias) {
    d_gain = (d_affine.array() * norm.array()).colwise().sum().transpose();
    d_bias = d_affine.colwise().sum().transpose();
    Matrix d_norm = d_affine.array().rowwise() * gain.transpose().array();
    const double width = static_cast<double>(norm.cols());
    Matrix d_pre(norm.rows(), norm.cols());
    for (Eigen::Index i = 0; i < norm.rows(); ++i) {
        const double mean_d = d_norm.row(i).sum() / width;
        const double mean_dx = d_norm.row(i).dot(norm.row(i)) / width;
        d_pre.row(i) = inv_std(i) * (d_norm.row(i).array() - mean_d - norm.row(i).array() * mean_dx).matrix();
    }
    return d_pre;
}

}  // namespace

Matrix Forward(const MlpParams& params, const Matrix& batch) {
    CheckBatch(params, batch);
    const Block b1 = RunBlock(batch, params.w1, params.b1, params.ln1_gain, params.ln1_bias, nullptr);
    const Block b2 = RunBlock(b1.out, params.w2, params.b2, params.ln2_gain, params.ln2_bias, nullptr);
    return Heads(params, b2.out);
}

ForwardTrace ForwardTrain(const MlpParams& params, const Matrix& batch, double drop_prob,
                          std::uint64_t seed) {
    return ForwardTrain(params, batch,
                        SampleDropoutMasks(params.shape, static_cast<std::size_t>(batch.rows()),
                                           drop_prob, seed));
}

ForwardTrace ForwardTrain(const MlpParams& params, const Matrix& batch, DropoutMasks masks) {
    CheckBatch(params, batch);
    if (masks.layer1.rows() != batch.rows() || masks.layer2.rows() != batch.rows() ||
        static_cast<std::size_t>(masks.layer1.cols()) != params.shape.hidden1 ||
        static_cast<std::size_t>(masks.layer2.cols()) != params.shape.hidden2) {
        throw Error(ErrorKind::kDimensionMismatch, "dropout masks do not match batch and widths");
    }
    ForwardTrace t;
    t.shape = params.shape;
    t.input = batch;
    Block b1 = RunBlock(batch, params.w1, params.b1, params.ln1_gain, params.ln1_bias, &masks.layer1);
    Block b2 = RunBlock(b1.out, params.w2, params.b2, params.ln2_gain, params.ln2_bias, &masks.layer2);
    t.logits = Heads(params, b2.out);
    t.norm1 = std::move(b1.norm);
    t.inv_std1 = std::move(b1.inv_std);
    t.affine1 = std::move(b1.affine);
    t.out1 = std::move(b1.out);
    t.norm2 = std::move(b2.norm);
    t.inv_std2 = std::move(b2.inv_std);
    t.affine2 = std::move(b2.affine);
    t.out2 = std::move(b2.out);
    t.masks = std::move(masks);
    return t;
}

LossResult OvaBceLoss(const Matrix& logits, const Matrix& targets) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
        throw Error(ErrorKind::kDimensionMismatch, "logits and targets differ in shape");
    }
    const double denom = static_cast<double>(logits.size());
    LossResult r;
    r.grad_logits.resize(logits.rows(), logits.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double z = logits.data()[i];
        const double y = targets.data()[i];
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        const double prob = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        r.grad_logits.data()[i] = (prob - y) / denom;
    }
    r.loss = total / denom;
    return r;
}

Matrix OneHotTargets(std::span<const std::size_t> labels, std::size_t n_classes) {
    Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                            static_cast<Eigen::Index>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_classes) {
            throw Error(ErrorKind::kOutOfRange, "label " + std::to_string(labels[i]) +
                                                    " outside [0, " + std::to_string(n_classes) + ")");
        }
        t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;
    }
    return t;
}

MlpParams Backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& grad_logits) {
    if (!(trace.shape == params.shape) || grad_logits.rows() != trace.logits.rows() ||
        grad_logits.cols() != trace.logits.cols()) {
        throw Error(ErrorKind::kDimensionMismatch, "trace does not match params or gradient shape");
    }
    MlpParams g;
    g.shape = params.shape;

    g.head_w.noalias() = grad_logits.transpose() * trace.out2;
    g.head_b = grad_logits.colwise().sum().transpose();

    Matrix d_out2 = grad_logits * params.head_w;
    Matrix d_affine2 = (d_out2.array() * trace.masks.layer2.array() *
                        (trace.affine2.array() > 0.0).cast<double>()).matrix();
    const Matrix d_pre2 = LayerNormBackward(d_affine2, trace.norm2, trace.inv_std2, params.ln2_gain,
                                            g.ln2_gain, g.ln2_bias);
    g.w2.noalias() = d_pre2.transpose() * trace.out1;
    g.b2 = d_pre2.colwise().sum().transpose();

    Matrix d_out1 = d_pre2 * params.w2;
    Matrix d_affine1 = (d_out1.array() * trace.masks.layer1.array() *
                        (trace.affine1.array() > 0.0).cast<double>()).matrix();
    const Matrix d_pre1 = LayerNormBackward(d_affine1, trace.norm1, trace.inv_std1, params.ln1_gain,
                                            g.ln1_gain, g.ln1_bias);
    g.w1.noalias() = d_pre1.transpose() * trace.input;
    g.b1 = d_pre1.colwise().sum().transpose();
    return g;
}

std::vector<std::size_t> Predict(const Matrix& logits) {
    std::vector<std::size_t> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c) {
            if (logits(i, c) > logits(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return out;
}

MlpParams InitParams(const MlpShape& shape, std::uint64_t seed) {
    MlpParams p = MlpParams::Zeros(shape);
    std::mt19937_64 rng(seed);
    auto fill = [&](Matrix& w) {
        const double s = std::sqrt(6.0 / static_cast<double>(w.cols()));
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w.data()[i] = s * (2.0 * detail::Uniform01(rng) - 1.0);
        }
    };
    fill(p.w1);
    fill(p.w2);
    fill(p.head_w);
    p.ln1_gain.setOnes();
    p.ln2_gain.setOnes();
    return p;
}

void WriteCheckpoint(const std::filesystem::path& path, const MlpParams& params) {
    std::vector<std::uint8_t> bytes = {'E', 'M', 'L', 'P'};
    for (std::size_t dim : {params.shape.input_dim, params.shape.hidden1, params.shape.hidden2,
                            params.shape.n_classes}) {
        detail::AppendU32(bytes, static_cast<std::uint32_t>(dim));
    }
    bytes.reserve(bytes.size() + 4 * params.ParameterCount());
    for (auto tensor : params.Tensors()) {
        for (double v : tensor) detail::AppendF32(bytes, static_cast<float>(v));
    }
    detail::WriteFileBytes(path, bytes);
}

MlpParams ReadCheckpoint(const std::filesystem::path& path) {
    const auto bytes = detail::ReadFileBytes(path);
    const std::span<const std::uint8_t> view(bytes);
    if (bytes.size() < 20 || std::memcmp(bytes.data(), "EMLP", 4) != 0) {
        throw Error(ErrorKind::kBadMagic, path.string() + " is not an EMLP checkpoint");
    }
    MlpShape shape{detail::ReadU32(view.subspan(4)), detail::ReadU32(view.subspan(8)),
                   detail::ReadU32(view.subspan(12)), detail::ReadU32(view.subspan(16))};
    MlpParams p = MlpParams::Zeros(shape);
    if (bytes.size() != 20 + 4 * p.ParameterCount()) {
        throw Error(ErrorKind::kSizeMismatch, path.string() + ": checkpoint payload size mismatch");
    }
    std::size_t offset = 20;
    for (auto tensor : p.Tensors()) {
        for (double& v : tensor) {
            v = detail::ReadF32(view.subspan(offset));
            offset += 4;
        }
    }
    p.Validate();
    return p;
}

}  // namespace driftbench
