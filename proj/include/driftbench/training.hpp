#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftbench/dataset.hpp"
#include "driftbench/mlp.hpp"
#include "driftbench/splits.hpp"

namespace driftbench {

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 128;
    int epochs = 100;
    double drop_prob = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::size_t hidden1 = 4096;
    std::size_t hidden2 = 512;

    void Validate() const;
};

struct AdamState {
    MlpParams first_moment;
    MlpParams second_moment;
    std::uint64_t step = 0;

    static AdamState For(const MlpParams& params);
};

/// Bias-corrected Adam update of one tensor; `step` is the 1-based count
/// including this update.
void AdamUpdate(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, std::uint64_t step, const TrainConfig& config);

/// Advances state.step and updates every tensor of params in place.
void AdamStep(MlpParams& params, const MlpParams& grads, AdamState& state, const TrainConfig& config);

/// Manifest joined with pooled features; row i of `inputs` is records[i].
struct LabeledData {
    Manifest manifest;
    Matrix inputs;
    std::vector<std::size_t> labels;  // index into manifest.categories

    static LabeledData Build(Manifest manifest, const FeatureSet& features, Pooling pooling);

    std::size_t RowOf(const std::string& clip_id) const;
    std::vector<std::size_t> RowsOf(std::span<const std::string> ids) const;

private:
    std::unordered_map<std::string, std::size_t> row_of_;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_top1;  // absent when the split has no val clips
};

struct TrainResult {
    MlpParams best;
    int best_epoch = 0;  // 0: initial params
    std::vector<EpochRecord> history;
};

/// Mini-batch Adam over split.train_ids. After each epoch the val top-1 is
/// measured and the best epoch (earliest on ties) is kept; without val clips
/// the last epoch is kept.
TrainResult Train(const LabeledData& data, const SplitSpec& split, const TrainConfig& config);

/// Columns: epoch,train_loss,val_top1.
std::string HistoryCsv(const std::vector<EpochRecord>& history);

struct EvalReport {
    std::string split_id;
    std::vector<std::string> categories;
    std::map<std::string, double> per_domain_top1;
    std::map<std::string, std::size_t> per_domain_count;
    double overall_top1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::size_t n_evaluated = 0;
};

EvalReport Evaluate(const MlpParams& params, const LabeledData& data,
                    std::span<const std::string> ids, const std::string& split_id = "");

nlohmann::ordered_json ToJson(const EvalReport& report);
EvalReport EvalReportFromJson(const nlohmann::json& j);
void WriteEvalReport(const std::filesystem::path& path, const EvalReport& report);
EvalReport ReadEvalReport(const std::filesystem::path& path);

/// Expected top-1 (%) of a predictor choosing uniformly among n_classes.
double UniformRandomBaseline(std::size_t n_classes);

}  // namespace driftbench
