#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftbench/shift_metric.hpp"

namespace driftbench {

/// Published per-domain values for the eight egocentric benchmark domains: shift-score
/// statistics, MLP-Lite top-1 accuracy and LODO split sizes.
struct PublishedDomainRow {
    std::string domain;
    double mu;
    double sigma;
    double score;
    double mlp_lite_top1;
    std::size_t train_count;
    std::size_t val_count;
    std::size_t test_count;
};

/// Rows in published order (descending shift score). Immutable.
std::span<const PublishedDomainRow> PublishedFixture();

/// FNV-1a over a canonical rendering of the fixture; guards against edits.
std::uint64_t FixtureDigest();

/// Shift report / accuracy map views of the fixture.
ShiftReport FixtureShiftReport();
std::map<std::string, double> FixtureAccuracies();

/// Tie-aware average ranks, 1-based.
std::vector<double> AverageRanks(std::span<const double> values);

double Pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks. Requires equal lengths >= 3 and
/// non-constant inputs.
double Spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationPair {
    std::string domain;
    double score;
    double accuracy;
};

struct CorrelationResult {
    double spearman = 0.0;
    double pearson = 0.0;
    std::size_t n_points = 0;
    std::vector<CorrelationPair> pairs;  // shift-report order
};

/// Pairs domain-mode shift scores with per-domain accuracies by name. Throws
/// when the two domain sets differ, naming the symmetric difference.
CorrelationResult CorrelateShiftAccuracy(const ShiftReport& shift,
                                         const std::map<std::string, double>& accuracy);

struct ConsistencyRow {
    std::string domain;
    double recomputed;
    double published;
    bool pass;
};

/// |mu + tau * sigma - score| <= tolerance per row; failures are reported,
/// not thrown.
std::vector<ConsistencyRow> CheckScoreConsistency(std::span<const PublishedDomainRow> rows,
                                                  double tau = 2.0, double tolerance = 0.01);

struct AnalysisReport {
    ShiftReport shift;
    std::map<std::string, double> accuracy;
    std::optional<CorrelationResult> correlation;
};

nlohmann::ordered_json ToJson(const AnalysisReport& report);
AnalysisReport AnalysisReportFromJson(const nlohmann::json& j);

/// Plain-text table in descending score order; omits the correlation section
/// with a notice when there is none.
std::string SummaryTable(const AnalysisReport& report);

/// Writes report.csv, report.json and summary.txt into out_dir.
void EmitReport(const AnalysisReport& report, const std::filesystem::path& out_dir);

}  // namespace driftbench
