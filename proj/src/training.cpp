#include "driftbench/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "format.hpp"
#include "rng.hpp"

namespace driftbench {

void TrainConfig::Validate() const {
    if (!(learning_rate > 0.0) || batch_size < 1 || epochs < 0 || !(beta1 > 0.0 && beta1 < 1.0) ||
        !(beta2 > 0.0 && beta2 < 1.0) || !(eps > 0.0) || hidden1 < 1 || hidden2 < 1) {
        throw Error(ErrorKind::kInvalidArgument, "training hyperparameters must be positive");
    }
    if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
        throw Error(ErrorKind::kInvalidArgument, "drop_prob must lie in [0, 1)");
    }
}

AdamState AdamState::For(const MlpParams& params) {
    return {MlpParams::Zeros(params.shape), MlpParams::Zeros(params.shape), 0};
}

void AdamUpdate(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, std::uint64_t step, const TrainConfig& config) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
        throw Error(ErrorKind::kDimensionMismatch, "Adam tensors differ in size");
    }
    const double t = static_cast<double>(step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        if (!std::isfinite(g)) {
            throw Error(ErrorKind::kNonFinite,
                        "non-finite gradient at element " + std::to_string(i) + " (step " +
                            std::to_string(step) + ")");
        }
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

void AdamStep(MlpParams& params, const MlpParams& grads, AdamState& state, const TrainConfig& config) {
    if (!(params.shape == grads.shape) || !(params.shape == state.first_moment.shape)) {
        throw Error(ErrorKind::kDimensionMismatch, "Adam: params, grads and state shapes differ");
    }
    ++state.step;
    auto p = params.Tensors();
    const auto g = grads.Tensors();
    auto m = state.first_moment.Tensors();
    auto v = state.second_moment.Tensors();
    for (std::size_t i = 0; i < p.size(); ++i) AdamUpdate(p[i], g[i], m[i], v[i], state.step, config);
}

LabeledData LabeledData::Build(Manifest manifest, const FeatureSet& features, Pooling pooling) {
    LabeledData d;
    d.inputs = GatherRows(PoolTemporal(features, pooling), manifest.records);
    d.labels.reserve(manifest.records.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        const auto it = std::lower_bound(manifest.categories.begin(), manifest.categories.end(), r.category);
        if (it == manifest.categories.end() || *it != r.category) {
            throw Error(ErrorKind::kUnmappedLabel, "category '" + r.category + "' not in vocabulary");
        }
        d.labels.push_back(static_cast<std::size_t>(it - manifest.categories.begin()));
        d.row_of_.emplace(r.clip_id, i);
    }
    d.manifest = std::move(manifest);
    return d;
}

std::size_t LabeledData::RowOf(const std::string& clip_id) const {
    const auto it = row_of_.find(clip_id);
    if (it == row_of_.end()) throw Error(ErrorKind::kUnknownId, "unknown clip_id '" + clip_id + "'");
    return it->second;
}

std::vector<std::size_t> LabeledData::RowsOf(std::span<const std::string> ids) const {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) rows.push_back(RowOf(id));
    return rows;
}

namespace {

Matrix GatherInputs(const LabeledData& data, std::span<const std::size_t> rows) {
    Matrix batch(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) batch.row(static_cast<Eigen::Index>(i)) = data.inputs.row(rows[i]);
    return batch;
}

std::vector<std::size_t> PredictRows(const MlpParams& params, const LabeledData& data,
                                     std::span<const std::size_t> rows) {
    constexpr std::size_t kChunk = 512;
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
        const auto chunk = rows.subspan(begin, std::min(kChunk, rows.size() - begin));
        const auto pred = Predict(Forward(params, GatherInputs(data, chunk)));
        out.insert(out.end(), pred.begin(), pred.end());
    }
    return out;
}

double Top1(const MlpParams& params, const LabeledData& data, std::span<const std::size_t> rows) {
    const auto pred = PredictRows(params, data, rows);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == data.labels[rows[i]];
    return 100.0 * static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace

TrainResult Train(const LabeledData& data, const SplitSpec& split, const TrainConfig& config) {
    config.Validate();
    if (split.train_ids.empty()) throw Error(ErrorKind::kInvalidArgument, "empty train split");
    {
        const std::unordered_set<std::string> train(split.train_ids.begin(), split.train_ids.end());
        for (const auto* held : {&split.val_ids, &split.test_ids}) {
            for (const auto& id : *held) {
                if (train.contains(id)) {
                    throw Error(ErrorKind::kInvalidArgument,
                                "clip '" + id + "' is in train and in val/test");
                }
            }
        }
    }
    const auto train_rows = data.RowsOf(split.train_ids);
    const auto val_rows = data.RowsOf(split.val_ids);

    const MlpShape shape{static_cast<std::size_t>(data.inputs.cols()), config.hidden1,
                         config.hidden2, data.manifest.categories.size()};
    TrainResult result;
    MlpParams params = InitParams(shape, config.seed);
    result.best = params;
    AdamState state = AdamState::For(params);

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order = train_rows;
    std::optional<double> best_val;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle) detail::Shuffle(order, rng);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
            const auto rows = std::span(order).subspan(begin, std::min(config.batch_size, order.size() - begin));
            std::vector<std::size_t> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[rows[i]];

            const ForwardTrace trace = ForwardTrain(params, GatherInputs(data, rows), config.drop_prob, rng());
            const LossResult loss = OvaBceLoss(trace.logits, OneHotTargets(labels, shape.n_classes));
            if (!std::isfinite(loss.loss)) {
                throw Error(ErrorKind::kDivergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                                        " batch " + std::to_string(batch_index));
            }
            loss_sum += loss.loss * static_cast<double>(rows.size());
            AdamStep(params, Backward(params, trace, loss.grad_logits), state, config);
        }

        EpochRecord record{epoch, loss_sum / static_cast<double>(order.size()), std::nullopt};
        if (!val_rows.empty()) {
            record.val_top1 = Top1(params, data, val_rows);
            if (!best_val || *record.val_top1 > *best_val) {
                best_val = record.val_top1;
                result.best = params;
                result.best_epoch = epoch;
            }
        } else {
            result.best = params;
            result.best_epoch = epoch;
        }
        result.history.push_back(record);
    }
    return result;
}

std::string HistoryCsv(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_top1\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << detail::FormatReal(e.train_loss) << ','
            << (e.val_top1 ? detail::FormatReal(*e.val_top1) : "") << '\n';
    }
    return out.str();
}

EvalReport Evaluate(const MlpParams& params, const LabeledData& data, std::span<const std::string> ids,
                    const std::string& split_id) {
    if (ids.empty()) throw Error(ErrorKind::kInvalidArgument, "no clip ids to evaluate");
    const std::size_t n_classes = data.manifest.categories.size();
    if (params.shape.n_classes != n_classes ||
        params.shape.input_dim != static_cast<std::size_t>(data.inputs.cols())) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "checkpoint shape does not match the dataset (classes or input width)");
    }
    const auto rows = data.RowsOf(ids);
    const auto pred = PredictRows(params, data, rows);

    EvalReport report;
    report.split_id = split_id;
    report.categories = data.manifest.categories;
    report.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    report.n_evaluated = rows.size();
    std::map<std::string, std::size_t> correct;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto truth = data.labels[rows[i]];
        const auto& domain = data.manifest.records[rows[i]].domain;
        ++report.confusion[truth][pred[i]];
        ++report.per_domain_count[domain];
        correct[domain] += truth == pred[i];
    }
    for (const auto& [domain, count] : report.per_domain_count) {
        report.per_domain_top1[domain] = 100.0 * static_cast<double>(correct[domain]) / static_cast<double>(count);
    }
    std::size_t trace = 0;
    for (std::size_t c = 0; c < n_classes; ++c) trace += report.confusion[c][c];
    report.overall_top1 = 100.0 * static_cast<double>(trace) / static_cast<double>(report.n_evaluated);
    return report;
}

nlohmann::ordered_json ToJson(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["split_id"] = r.split_id;
    j["categories"] = r.categories;
    j["n_evaluated"] = r.n_evaluated;
    j["overall_top1"] = r.overall_top1;
    nlohmann::ordered_json per_domain = nlohmann::ordered_json::object();
    for (const auto& [domain, acc] : r.per_domain_top1) {
        per_domain[domain] = {{"top1", acc}, {"count", r.per_domain_count.at(domain)}};
    }
    j["per_domain"] = std::move(per_domain);
    j["confusion"] = r.confusion;
    return j;
}

EvalReport EvalReportFromJson(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.split_id = j.at("split_id").get<std::string>();
        r.categories = j.at("categories").get<std::vector<std::string>>();
        r.n_evaluated = j.at("n_evaluated").get<std::size_t>();
        r.overall_top1 = j.at("overall_top1").get<double>();
        for (const auto& [domain, entry] : j.at("per_domain").items()) {
            r.per_domain_top1[domain] = entry.at("top1").get<double>();
            r.per_domain_count[domain] = entry.at("count").get<std::size_t>();
        }
        r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, std::string("malformed eval report: ") + e.what());
    }
}

void WriteEvalReport(const std::filesystem::path& path, const EvalReport& report) {
    detail::WriteText(path, ToJson(report).dump(2) + "\n");
}

EvalReport ReadEvalReport(const std::filesystem::path& path) {
    return EvalReportFromJson(detail::ReadJson(path));
}

double UniformRandomBaseline(std::size_t n_classes) {
    if (n_classes < 1) throw Error(ErrorKind::kInvalidArgument, "n_classes must be at least 1");
    return 100.0 / static_cast<double>(n_classes);
}

}  // namespace driftbench
