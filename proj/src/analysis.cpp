#include "driftbench/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "format.hpp"

namespace driftbench {

namespace {

// Domain, mu, sigma, score | MLP-Lite top-1 | train, val, test.
constexpr std::size_t kDomains = 8;
const std::array<PublishedDomainRow, kDomains> kPublished = {{
    {"India", 6.30, 0.24, 6.78, 45.83, 13440, 4096, 1920},
    {"FRL", 1.72, 2.09, 5.90, 36.16, 10112, 3072, 5248},
    {"US-Minnesota", 1.45, 2.05, 5.55, 49.47, 14208, 4480, 1152},
    {"UK", 1.41, 1.96, 5.33, 65.36, 14592, 4736, 768},
    {"Saudi Arabia", 1.34, 1.99, 5.32, 53.55, 12800, 4096, 2560},
    {"US-CMU", 1.41, 1.95, 5.31, 52.12, 13056, 4224, 2304},
    {"Italy", 1.34, 1.98, 5.30, 51.95, 14592, 4480, 768},
    {"Japan", 1.53, 1.86, 5.25, 77.73, 15104, 4736, 256},
}};

void RequireSameLength(std::span<const double> x, std::span<const double> y, std::size_t min_n) {
    if (x.size() != y.size()) {
        throw Error(ErrorKind::kDimensionMismatch, "correlation inputs differ in length (" +
                                                       std::to_string(x.size()) + " vs " +
                                                       std::to_string(y.size()) + ")");
    }
    if (x.size() < min_n) {
        throw Error(ErrorKind::kTooFewGroups,
                    "correlation needs at least " + std::to_string(min_n) + " points");
    }
}

}  // namespace

std::span<const PublishedDomainRow> PublishedFixture() { return kPublished; }

std::uint64_t FixtureDigest() {
    std::string canonical;
    for (const auto& r : kPublished) {
        canonical += r.domain + "|" + detail::FormatFixed(r.mu, 2) + "|" + detail::FormatFixed(r.sigma, 2) +
                     "|" + detail::FormatFixed(r.score, 2) + "|" + detail::FormatFixed(r.mlp_lite_top1, 2) +
                     "|" + std::to_string(r.train_count) + "|" + std::to_string(r.val_count) + "|" +
                     std::to_string(r.test_count) + "\n";
    }
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

ShiftReport FixtureShiftReport() {
    ShiftReport report;
    report.tau = 2.0;
    report.mode = GroupingMode::kDomain;
    for (const auto& r : kPublished) {
        GroupShift g;
        g.key.mode = GroupingMode::kDomain;
        g.key.domain = r.domain;
        g.member_count = r.test_count;
        g.mu = r.mu;
        g.sigma = r.sigma;
        g.score = r.score;
        report.groups.push_back(std::move(g));
    }
    return report;
}

std::map<std::string, double> FixtureAccuracies() {
    std::map<std::string, double> acc;
    for (const auto& r : kPublished) acc[r.domain] = r.mlp_lite_top1;
    return acc;
}

std::vector<double> AverageRanks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double Pearson(std::span<const double> x, std::span<const double> y) {
    RequireSameLength(x, y, 2);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(ErrorKind::kInvalidArgument, "correlation undefined for constant input");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double Spearman(std::span<const double> x, std::span<const double> y) {
    RequireSameLength(x, y, 3);
    const auto rx = AverageRanks(x);
    const auto ry = AverageRanks(y);
    return Pearson(rx, ry);
}

CorrelationResult CorrelateShiftAccuracy(const ShiftReport& shift,
                                         const std::map<std::string, double>& accuracy) {
    if (shift.mode != GroupingMode::kDomain) {
        throw Error(ErrorKind::kInvalidArgument, "correlation needs a domain-grouped shift report");
    }
    std::set<std::string> shift_domains;
    for (const auto& g : shift.groups) shift_domains.insert(g.key.Label());
    std::set<std::string> acc_domains;
    for (const auto& [domain, acc] : accuracy) acc_domains.insert(domain);
    if (shift_domains != acc_domains) {
        std::vector<std::string> diff;
        std::set_symmetric_difference(shift_domains.begin(), shift_domains.end(), acc_domains.begin(),
                                      acc_domains.end(), std::back_inserter(diff));
        std::string list;
        for (const auto& d : diff) list += (list.empty() ? "'" : ", '") + d + "'";
        throw Error(ErrorKind::kUnknownDomain, "domain sets differ: " + list);
    }

    CorrelationResult r;
    std::vector<double> scores, accs;
    for (const auto& g : shift.groups) {
        const auto label = g.key.Label();
        r.pairs.push_back({label, g.score, accuracy.at(label)});
        scores.push_back(g.score);
        accs.push_back(accuracy.at(label));
    }
    r.n_points = r.pairs.size();
    r.spearman = Spearman(scores, accs);
    r.pearson = Pearson(scores, accs);
    return r;
}

std::vector<ConsistencyRow> CheckScoreConsistency(std::span<const PublishedDomainRow> rows, double tau,
                                                  double tolerance) {
    std::vector<ConsistencyRow> out;
    for (const auto& r : rows) {
        const double recomputed = r.mu + tau * r.sigma;
        out.push_back({r.domain, recomputed, r.score, std::abs(recomputed - r.score) <= tolerance});
    }
    return out;
}

nlohmann::ordered_json ToJson(const AnalysisReport& report) {
    nlohmann::ordered_json j;
    j["shift"] = ToJson(report.shift);
    nlohmann::ordered_json acc = nlohmann::ordered_json::object();
    for (const auto& [domain, value] : report.accuracy) acc[domain] = value;
    j["accuracy"] = std::move(acc);
    if (report.correlation) {
        const auto& c = *report.correlation;
        nlohmann::ordered_json corr;
        corr["spearman"] = c.spearman;
        corr["pearson"] = c.pearson;
        corr["n_points"] = c.n_points;
        auto pairs = nlohmann::ordered_json::array();
        for (const auto& p : c.pairs) {
            pairs.push_back({{"domain", p.domain}, {"score", p.score}, {"accuracy", p.accuracy}});
        }
        corr["pairs"] = std::move(pairs);
        j["correlation"] = std::move(corr);
    } else {
        j["correlation"] = nullptr;
    }
    return j;
}

AnalysisReport AnalysisReportFromJson(const nlohmann::json& j) {
    try {
        AnalysisReport r;
        r.shift = ShiftReportFromJson(j.at("shift"));
        r.accuracy = j.at("accuracy").get<std::map<std::string, double>>();
        if (!j.at("correlation").is_null()) {
            const auto& c = j["correlation"];
            CorrelationResult corr;
            corr.spearman = c.at("spearman").get<double>();
            corr.pearson = c.at("pearson").get<double>();
            corr.n_points = c.at("n_points").get<std::size_t>();
            for (const auto& p : c.at("pairs")) {
                corr.pairs.push_back({p.at("domain").get<std::string>(), p.at("score").get<double>(),
                                      p.at("accuracy").get<double>()});
            }
            r.correlation = std::move(corr);
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParse, std::string("malformed analysis report: ") + e.what());
    }
}

std::string SummaryTable(const AnalysisReport& report) {
    std::ostringstream out;
    out << "Domain shift scores (k_clusters=" << report.shift.k_clusters
        << ", tau=" << detail::FormatReal(report.shift.tau) << "), descending score\n\n";
    std::size_t width = 6;
    for (const auto& g : report.shift.groups) width = std::max(width, g.key.Label().size());
    auto pad = [&](const std::string& s) { return s + std::string(width + 2 - s.size(), ' '); };
    out << pad("group") << "mu +- sigma      score    top1\n";
    for (const auto& g : report.shift.groups) {
        const auto label = g.key.Label();
        const auto acc = report.accuracy.find(label);
        out << pad(label) << detail::FormatFixed(g.mu, 2) << " +- " << detail::FormatFixed(g.sigma, 2)
            << "    " << detail::FormatFixed(g.score, 2) << "    "
            << (acc == report.accuracy.end() ? std::string("-") : detail::FormatFixed(acc->second, 2))
            << "\n";
    }
    out << "\n";
    if (report.correlation) {
        out << "Correlation over " << report.correlation->n_points << " domains: spearman "
            << detail::FormatFixed(report.correlation->spearman, 3) << ", pearson "
            << detail::FormatFixed(report.correlation->pearson, 3) << "\n";
    } else {
        out << "Correlation omitted: fewer than 3 paired domains.\n";
    }
    return out.str();
}

void EmitReport(const AnalysisReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

    std::ostringstream csv;
    csv << "group,mu,sigma,score,member_count,top1\n";
    for (const auto& g : report.shift.groups) {
        const auto acc = report.accuracy.find(g.key.Label());
        csv << detail::CsvField(g.key.Label()) << ',' << detail::FormatReal(g.mu) << ','
            << detail::FormatReal(g.sigma) << ',' << detail::FormatReal(g.score) << ',' << g.member_count
            << ',' << (acc == report.accuracy.end() ? "" : detail::FormatReal(acc->second)) << '\n';
    }
    detail::WriteText(out_dir / "report.csv", csv.str());
    detail::WriteText(out_dir / "report.json", ToJson(report).dump(2) + "\n");
    detail::WriteText(out_dir / "summary.txt", SummaryTable(report));
}

}  // namespace driftbench
