// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "driftbench/analysis.hpp"
#include "driftbench/clustering.hpp"
#include "driftbench/mlp.hpp"
#include "driftbench/shift_metric.hpp"
#include "driftbench/splits.hpp"
#include "driftbench/synth.hpp"
#include "driftbench/training.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "split_checks.hpp"
#include "temp_dir.hpp"

namespace {

using namespace driftbench;

struct Outcome {
    bool pass = false;
    std::string detail;
    std::vector<std::string> notes;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
};

std::string Fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

Matrix Pooled(const SyntheticDataset& ds) {
    return GatherRows(PoolTemporal(ds.features, Pooling::kMean), ds.manifest.records);
}

Outcome PublishedScoreConsistency() {
    Outcome o{true, {}, {}};
    double worst = 0.0;
    for (const auto& row : CheckScoreConsistency(PublishedFixture(), 2.0, 0.01)) {
        o.pass = o.pass && row.pass;
        worst = std::max(worst, std::abs(row.recomputed - row.published));
        if (!row.pass) o.notes.push_back(row.domain + " recomputed " + Fmt(row.recomputed) + " vs " + Fmt(row.published));
    }
    o.detail = "8 rows, max |mu + 2 sigma - score| = " + Fmt(worst, 3);
    return o;
}

Outcome PublishedCorrelation() {
    const auto shift = FixtureShiftReport();
    const auto acc = FixtureAccuracies();
    std::vector<double> scores, accs;
    for (const auto& g : shift.groups) {
        scores.push_back(g.score);
        accs.push_back(acc.at(g.key.Label()));
    }
    const double library = CorrelateShiftAccuracy(shift, acc).spearman;
    const double by_hand = testing::RankDifferenceSpearman(scores, accs);
    Outcome o;
    o.pass = std::abs(library - (-0.738)) <= 0.005 && std::abs(library - by_hand) < 1e-12;
    o.detail = "spearman " + Fmt(library, 6) + ", rank-difference oracle " + Fmt(by_hand, 6);
    return o;
}

Outcome KMeansOracle() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    int failures = 0;
    for (int instance = 0; instance < 25; ++instance) {
        const auto n = static_cast<Eigen::Index>(4 + rng() % 5);  // 4..8
        const auto d = static_cast<Eigen::Index>(1 + rng() % 3);  // 1..3
        const std::size_t k = 2 + rng() % 2;                      // 2..3
        const Matrix x = testing::RandomMatrix(n, d, rng(), 5.0);
        const double best = KMeansFitBest(x, {.k_clusters = k, .seed = 0}, 20).inertia;
        const double optimum = testing::BruteForceKMeansInertia(x, k);
        worst = std::max(worst, std::abs(best - optimum));
        failures += std::abs(best - optimum) > 1e-9;
    }
    return {failures == 0, "25 instances, max |best-of-20 - exhaustive| = " + Fmt(worst, 3) + ", misses " +
                               std::to_string(failures), {}};
}

Outcome ShiftHandCase() {
    GroupPrototype a{{}, Vector::Zero(2), 1};
    GroupPrototype b{{}, Vector::Zero(2), 1};
    a.key.domain = "a";
    b.key.domain = "b";
    b.prototype << 3.0, 4.0;
    const ShiftReport pair = ShiftScores(PrototypeDistances({a, b}), 2.0);
    GroupDistances spread{{}, 1, {1.0, 3.0}};
    spread.key.domain = "g";
    const ShiftReport single = ShiftScores({spread}, 2.0);
    const bool pass = pair.groups[0].score == 5.0 && pair.groups[1].score == 5.0 && single.groups[0].score == 4.0;
    return {pass, "distance 5 -> " + Fmt(pair.groups[0].score) + ", " + Fmt(pair.groups[1].score) +
                      "; [1,3] -> " + Fmt(single.groups[0].score), {}};
}

Outcome SyntheticMonotonicity() {
    SyntheticSpec spec;
    spec.n_domains = 4;
    spec.n_classes = 3;
    spec.samples_per_cell = 200;
    spec.feature_dim = 32;
    const std::string target = spec.DomainName(3);
    const std::vector<double> magnitudes{0, 1, 2, 4};
    const auto sets = OffsetSweep(spec, target, magnitudes, 7);

    std::vector<double> omega;
    std::string leader_at_4;
    double leader_score = 0.0;
    for (const auto& ds : sets) {
        ScoreOptions opts;
        opts.kmeans.seed = 7;
        const ShiftReport r = ScoreDataset(Pooled(ds), ds.manifest.records, opts);
        omega.push_back(r.Find(target)->score);
        leader_at_4 = r.groups.front().key.Label();
        leader_score = r.groups.front().score;
    }
    bool nondecreasing = true;
    for (std::size_t i = 1; i < omega.size(); ++i) nondecreasing = nondecreasing && omega[i] >= omega[i - 1];
    const bool max_at_4 = omega.back() > *std::max_element(omega.begin(), omega.end() - 1);

    Outcome o;
    o.pass = nondecreasing && max_at_4;
    o.detail = "target omega over {0,1,2,4}: " + Fmt(omega[0]) + ", " + Fmt(omega[1]) + ", " + Fmt(omega[2]) +
               ", " + Fmt(omega[3]);
    o.notes.push_back("strict maximum read across magnitudes; across domains at magnitude 4 the top group is " +
                      leader_at_4 + " (" + Fmt(leader_score) + "), since with four domains each unshifted group "
                      "scores about (1 + 2 sqrt 2) / 3 times the shifted one");
    return o;
}

Outcome GradientOracle() {
    const auto r = testing::CheckGradients({16, 8, 4, 3}, 8, 256, 7);
    return {r.coordinates >= 200 && r.max_relative_error < 1e-4,
            std::to_string(r.coordinates) + " coordinates, max relative error " + Fmt(r.max_relative_error, 3), {}};
}

// Least-squares one-hot regression on the train rows; top-1 on the test rows.
double LinearProbeTop1(const LabeledData& data, const SplitSpec& split) {
    const auto train = data.RowsOf(split.train_ids);
    const auto test = data.RowsOf(split.test_ids);
    const Eigen::Index d = data.inputs.cols();
    const auto classes = static_cast<Eigen::Index>(data.manifest.categories.size());
    Eigen::MatrixXd a(static_cast<Eigen::Index>(train.size()), d + 1);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(train.size()), classes);
    for (std::size_t i = 0; i < train.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) << data.inputs.row(static_cast<Eigen::Index>(train[i])), 1.0;
        y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(data.labels[train[i]])) = 1.0;
    }
    const Eigen::MatrixXd w = a.colPivHouseholderQr().solve(y);
    std::size_t correct = 0;
    for (auto row : test) {
        Eigen::RowVectorXd features(d + 1);
        features << data.inputs.row(static_cast<Eigen::Index>(row)), 1.0;
        Eigen::Index best = 0;
        (features * w).maxCoeff(&best);
        correct += static_cast<std::size_t>(best) == data.labels[row];
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

Outcome TrainerOracle() {
    SyntheticSpec spec;
    spec.n_domains = 3;
    spec.n_classes = 9;
    spec.samples_per_cell = 20;
    spec.feature_dim = 16;
    spec.noise_scale = 0.25;
    spec.class_separation = 4.0;
    const auto ds = Generate(spec, 3);
    const LabeledData data = LabeledData::Build(ds.manifest, ds.features, Pooling::kMean);
    const SplitSpec split = BuildLodoSplit(data.manifest, spec.DomainName(2), 0.24, 3);

    TrainConfig cfg;  // full-width network, default optimizer settings
    cfg.epochs = 50;
    cfg.drop_prob = 0.5;
    cfg.seed = 3;
    const TrainResult result = Train(data, split, cfg);
    const double mlp = Evaluate(result.best, data, split.test_ids).overall_top1;
    const double linear = LinearProbeTop1(data, split);
    return {mlp >= 95.0 && linear == 100.0,
            "held-out top-1 " + Fmt(mlp) + "% (best epoch " + std::to_string(result.best_epoch) +
                "), linear probe " + Fmt(linear) + "%",
            {}};
}

Outcome LossValues() {
    const Matrix y = testing::RandomMatrix(4, 5, 1).unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
    const double at_zero = OvaBceLoss(Matrix::Zero(4, 5), y).loss;
    Matrix saturated = (y.array() * 2.0 - 1.0) * 50.0;
    const double at_saturation = OvaBceLoss(saturated, y).loss;
    return {std::abs(at_zero - std::log(2.0)) <= 1e-12 && at_saturation < 1e-6,
            "logit 0: |loss - ln 2| = " + Fmt(std::abs(at_zero - std::log(2.0)), 3) + "; saturated: " +
                Fmt(at_saturation, 3),
            {}};
}

Outcome PipelineDeterminism() {
    testing::TempDir first, second;
    const std::string e1 = testing::RunSyntheticPipeline(first.path(), 42);
    const std::string e2 = testing::RunSyntheticPipeline(second.path(), 42);
    if (!e1.empty() || !e2.empty()) return {false, "pipeline failed: " + e1 + e2, {}};
    const auto a = testing::SnapshotTree(first.path());
    const auto b = testing::SnapshotTree(second.path());
    std::size_t differing = 0;
    for (const auto& [name, bytes] : a) differing += !b.count(name) || b.at(name) != bytes;
    differing += b.size() > a.size() ? b.size() - a.size() : 0;
    return {differing == 0 && !a.empty(),
            std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ", {}};
}

std::string NormalizedName(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

Outcome SplitIntegrity() {
    SyntheticSpec spec;
    spec.n_domains = 4;
    spec.n_classes = 5;
    spec.samples_per_cell = 23;
    const Manifest m = Generate(spec, 0).manifest;
    std::size_t problems = 0;
    std::vector<std::string> notes;
    for (const auto& split : BuildAllLodoSplits(m, 0.24, 0)) {
        for (const auto& p : testing::SplitViolations(m, split)) {
            ++problems;
            if (notes.size() < 5) notes.push_back(p);
        }
    }
    Outcome o{problems == 0, "synthetic: 4 splits, " + std::to_string(problems) + " violations", notes};

    const char* official = std::getenv("DRIFTBENCH_OFFICIAL_MANIFEST");
    if (official == nullptr || *official == '\0') {
        o.notes.push_back("official-manifest test counts skipped (set DRIFTBENCH_OFFICIAL_MANIFEST)");
        return o;
    }
    const Manifest om = LoadManifest(official);
    std::size_t mismatches = 0;
    for (const auto& row : PublishedFixture()) {
        std::size_t count = 0;
        std::string held;
        for (const auto& domain : om.domains) {
            if (NormalizedName(domain) == NormalizedName(row.domain)) held = domain;
        }
        if (held.empty()) {
            ++mismatches;
            o.notes.push_back("official manifest has no domain matching " + row.domain);
            continue;
        }
        const SplitSpec split = BuildLodoSplit(om, held, 0.24, 0);
        count = split.test_ids.size();
        for (const auto& p : testing::SplitViolations(om, split)) o.notes.push_back(held + ": " + p);
        if (count != row.test_count) {
            ++mismatches;
            o.notes.push_back(held + " test " + std::to_string(count) + " vs published " + std::to_string(row.test_count));
        }
    }
    o.pass = o.pass && mismatches == 0;
    o.detail += "; official: " + std::to_string(8 - mismatches) + "/8 test counts match";
    return o;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "published score consistency", 1.0, PublishedScoreConsistency},
        {2, "published correlation fixture", 1.0, PublishedCorrelation},
        {3, "k-means exhaustive oracle", 10.0, KMeansOracle},
        {4, "shift score hand case", 0.0, ShiftHandCase},
        {5, "synthetic offset monotonicity", 30.0, SyntheticMonotonicity},
        {6, "gradient oracle", 5.0, GradientOracle},
        {7, "trainer oracle", 120.0, TrainerOracle},
        {8, "loss values", 0.0, LossValues},
        {9, "pipeline determinism", 0.0, PipelineDeterminism},
        {10, "split integrity", 0.0, SplitIntegrity},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what(), {}};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = c.budget_s <= 0.0 || seconds < c.budget_s;
        const bool pass = o.pass && in_budget;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << ": " << o.detail
                  << " (" << std::fixed << std::setprecision(2) << seconds << " s"
                  << (c.budget_s > 0.0 ? " of " + Fmt(c.budget_s, 3) + " s" : std::string()) << ")"
                  << std::defaultfloat << "\n";
        if (!in_budget) std::cout << "        over the runtime budget\n";
        for (const auto& note : o.notes) std::cout << "        note: " << note << "\n";
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
    return failed == 0 ? 0 : 1;
}
