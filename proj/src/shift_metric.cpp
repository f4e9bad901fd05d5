#include "driftbench/shift_metric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "format.hpp"

namespace driftbench {

GroupingMode ParseGroupingMode(std::string_view name) {
    if (name == "domain") return GroupingMode::kDomain;
    if (name == "class") return GroupingMode::kClass;
    if (name == "domain-class") return GroupingMode::kDomainClass;
    throw Error(ErrorKind::kInvalidArgument, "unknown grouping '" + std::string(name) +
                                                 "' (expected domain|class|domain-class)");
}

std::string_view GroupingModeName(GroupingMode mode) {
    switch (mode) {
        case GroupingMode::kDomain: return "domain";
        case GroupingMode::kClass: return "class";
        case GroupingMode::kDomainClass: return "domain-class";
    }
    return "domain";
}

GroupKey GroupKey::For(GroupingMode mode, const ClipRecord& record) {
    GroupKey key;
    key.mode = mode;
    if (mode != GroupingMode::kClass) key.domain = record.domain;
    if (mode != GroupingMode::kDomain) key.category = record.category;
    return key;
}

std::string GroupKey::Label() const {
    if (domain && category) return *domain + "/" + *category;
    return domain ? *domain : category.value_or("");
}

const GroupShift* ShiftReport::Find(const std::string& label) const {
    for (const auto& g : groups) {
        if (g.key.Label() == label) return &g;
    }
    return nullptr;
}

std::vector<GroupPrototype> GroupPrototypes(const Matrix& x, const std::vector<ClipRecord>& records,
                                            const ClusterModel& model, GroupingMode mode) {
    if (records.empty() || x.rows() == 0) throw Error(ErrorKind::kInvalidArgument, "empty dataset");
    if (static_cast<std::size_t>(x.rows()) != records.size()) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "feature rows (" + std::to_string(x.rows()) + ") not aligned with records (" +
                        std::to_string(records.size()) + ")");
    }
    const auto nearest = AssignNearest(x, model.centroids);

    std::map<GroupKey, std::pair<Vector, std::size_t>> sums;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = sums.try_emplace(GroupKey::For(mode, records[i]),
                                               Vector::Zero(model.centroids.cols()), 0);
        it->second.first += model.centroids.row(nearest[i]).transpose();
        ++it->second.second;
    }

    std::vector<GroupPrototype> out;
    out.reserve(sums.size());
    for (auto& [key, acc] : sums) {
        out.push_back({key, acc.first / static_cast<double>(acc.second), acc.second});
    }
    return out;
}

std::vector<GroupDistances> PrototypeDistances(const std::vector<GroupPrototype>& prototypes) {
    if (prototypes.size() < 2) {
        throw Error(ErrorKind::kTooFewGroups, "need at least 2 groups to compare prototypes, got " +
                                                  std::to_string(prototypes.size()));
    }
    std::vector<GroupDistances> out;
    out.reserve(prototypes.size());
    for (std::size_t g = 0; g < prototypes.size(); ++g) {
        GroupDistances d{prototypes[g].key, prototypes[g].member_count, {}};
        d.distances.reserve(prototypes.size() - 1);
        for (std::size_t h = 0; h < prototypes.size(); ++h) {
            if (h != g) d.distances.push_back((prototypes[g].prototype - prototypes[h].prototype).norm());
        }
        out.push_back(std::move(d));
    }
    return out;
}

ShiftReport ShiftScores(const std::vector<GroupDistances>& distances, double tau,
                        std::size_t k_clusters, GroupingMode mode) {
    ShiftReport report;
    report.tau = tau;
    report.k_clusters = k_clusters;
    report.mode = mode;
    for (const auto& d : distances) {
        if (d.distances.empty()) {
            throw Error(ErrorKind::kInvalidArgument,
                        "group '" + d.key.Label() + "' has an empty distance set");
        }
        const double n = static_cast<double>(d.distances.size());
        double mu = 0.0;
        for (double v : d.distances) mu += v;
        mu /= n;
        double var = 0.0;
        for (double v : d.distances) var += (v - mu) * (v - mu);
        const double sigma = std::sqrt(var / n);
        report.groups.push_back({d.key, d.member_count, d.distances, mu, sigma, mu + tau * sigma});
    }
    std::stable_sort(report.groups.begin(), report.groups.end(),
                     [](const GroupShift& a, const GroupShift& b) { return a.score > b.score; });
    return report;
}

ShiftReport ScoreWithModel(const Matrix& x, const std::vector<ClipRecord>& records,
                           const ClusterModel& model, GroupingMode mode, double tau) {
    const auto prototypes = GroupPrototypes(x, records, model, mode);
    return ShiftScores(PrototypeDistances(prototypes), tau, model.k_clusters, mode);
}

ShiftReport ScoreDataset(const Matrix& x, const std::vector<ClipRecord>& records,
                         const ScoreOptions& options) {
    if (static_cast<std::size_t>(x.rows()) != records.size()) {
        throw Error(ErrorKind::kDimensionMismatch, "feature rows not aligned with records");
    }
    const ClusterModel model = KMeansFit(x, options.kmeans);
    return ScoreWithModel(x, records, model, options.mode, options.tau);
}

nlohmann::ordered_json ToJson(const ShiftReport& report) {
    nlohmann::ordered_json j;
    j["tau"] = report.tau;
    j["k_clusters"] = report.k_clusters;
    j["mode"] = GroupingModeName(report.mode);
    auto groups = nlohmann::ordered_json::array();
    for (const auto& g : report.groups) {
        nlohmann::ordered_json e;
        e["group"] = g.key.Label();
        e["domain"] = g.key.domain ? nlohmann::ordered_json(*g.key.domain) : nlohmann::ordered_json();
        e["category"] = g.key.category ? nlohmann::ordered_json(*g.key.category) : nlohmann::ordered_json();
        e["member_count"] = g.member_count;
        e["distances"] = g.distances;
        e["mu"] = g.mu;
        e["sigma"] = g.sigma;
        e["score"] = g.score;
        groups.push_back(std::move(e));
    }
    j["groups"] = std::move(groups);
    return j;
}

ShiftReport ShiftReportFromJson(const nlohmann::json& j) {
    try {
        ShiftReport r;
        r.tau = j.at("tau").get<double>();
        r.k_clusters = j.at("k_clusters").get<std::size_t>();
        r.mode = ParseGroupingMode(j.at("mode").get<std::string>());
        for (const auto& e : j.at("groups")) {
            GroupShift g;
            g.key.mode = r.mode;
            if (!e.at("domain").is_null()) g.key.domain = e["domain"].get<std::string>();
            if (!e.at("category").is_null()) g.key.category = e["category"].get<std::string>();
            g.member_count = e.at("member_count").get<std::size_t>();
            g.distances = e.at("distances").get<std::vector<double>>();
            g.mu = e.at("mu").get<double>();
            g.sigma = e.at("sigma").get<double>();
            g.score = e.at("score").get<double>();
            r.groups.push_back(std::move(g));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, std::string("malformed shift report: ") + e.what());
    }
}

std::string ShiftReportCsv(const ShiftReport& report) {
    std::ostringstream out;
    out << "group,mu,sigma,score,member_count\n";
    for (const auto& g : report.groups) {
        out << detail::CsvField(g.key.Label()) << ',' << detail::FormatReal(g.mu) << ','
            << detail::FormatReal(g.sigma) << ',' << detail::FormatReal(g.score) << ','
            << g.member_count << '\n';
    }
    return out.str();
}

void WriteShiftReport(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                      const ShiftReport& report) {
    detail::WriteText(csv_path, ShiftReportCsv(report));
    detail::WriteText(json_path, ToJson(report).dump(2) + "\n");
}

ShiftReport ReadShiftReport(const std::filesystem::path& json_path) {
    return ShiftReportFromJson(detail::ReadJson(json_path));
}

}  // namespace driftbench
