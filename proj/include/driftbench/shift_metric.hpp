#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftbench/clustering.hpp"
#include "driftbench/dataset.hpp"

namespace driftbench {

enum class GroupingMode { kDomain, kClass, kDomainClass };

GroupingMode ParseGroupingMode(std::string_view name);
std::string_view GroupingModeName(GroupingMode mode);

/// Identifies a group. Domain mode carries only `domain`, Class mode only
/// `category`, DomainClass both.
struct GroupKey {
    GroupingMode mode = GroupingMode::kDomain;
    std::optional<std::string> domain;
    std::optional<std::string> category;

    static GroupKey For(GroupingMode mode, const ClipRecord& record);

    /// "india", "Gardening" or "india/Gardening".
    std::string Label() const;

    auto operator<=>(const GroupKey&) const = default;
    bool operator==(const GroupKey&) const = default;
};

struct GroupPrototype {
    GroupKey key;
    Vector prototype;
    std::size_t member_count = 0;
};

/// Distances from one group's prototype to every other prototype.
struct GroupDistances {
    GroupKey key;
    std::size_t member_count = 0;
    std::vector<double> distances;
};

struct GroupShift {
    GroupKey key;
    std::size_t member_count = 0;
    std::vector<double> distances;
    double mu = 0.0;
    double sigma = 0.0;
    double score = 0.0;
};

struct ShiftReport {
    double tau = 2.0;
    std::size_t k_clusters = 0;
    GroupingMode mode = GroupingMode::kDomain;
    std::vector<GroupShift> groups;  // descending score

    const GroupShift* Find(const std::string& label) const;
};

/// One prototype per nonempty group (sorted by key): the mean of the
/// centroids nearest to the group's members.
std::vector<GroupPrototype> GroupPrototypes(const Matrix& x,
                                            const std::vector<ClipRecord>& records,
                                            const ClusterModel& model, GroupingMode mode);

/// Euclidean distances from each prototype to every other one, in prototype
/// order with self skipped.
std::vector<GroupDistances> PrototypeDistances(const std::vector<GroupPrototype>& prototypes);

/// Mean, population standard deviation, and mu + tau * sigma per group.
ShiftReport ShiftScores(const std::vector<GroupDistances>& distances, double tau,
                        std::size_t k_clusters = 0,
                        GroupingMode mode = GroupingMode::kDomain);

struct ScoreOptions {
    KMeansOptions kmeans;
    GroupingMode mode = GroupingMode::kDomain;
    double tau = 2.0;
};

/// Fits k-means on x then scores groups under options.mode.
ShiftReport ScoreDataset(const Matrix& x, const std::vector<ClipRecord>& records,
                         const ScoreOptions& options);

/// Scores under a different grouping with an already fitted model.
ShiftReport ScoreWithModel(const Matrix& x, const std::vector<ClipRecord>& records,
                           const ClusterModel& model, GroupingMode mode, double tau);

nlohmann::ordered_json ToJson(const ShiftReport& report);
ShiftReport ShiftReportFromJson(const nlohmann::json& j);

/// Columns: group,mu,sigma,score,member_count.
std::string ShiftReportCsv(const ShiftReport& report);

void WriteShiftReport(const std::filesystem::path& csv_path,
                      const std::filesystem::path& json_path, const ShiftReport& report);
ShiftReport ReadShiftReport(const std::filesystem::path& json_path);

}  // namespace driftbench
