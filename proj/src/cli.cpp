#include "driftbench/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include "driftbench/analysis.hpp"
#include "driftbench/clustering.hpp"
#include "driftbench/dataset.hpp"
#include "driftbench/mlp.hpp"
#include "driftbench/shift_metric.hpp"
#include "driftbench/splits.hpp"
#include "driftbench/synth.hpp"
#include "driftbench/training.hpp"
#include "format.hpp"

namespace driftbench::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageFailure = 2;

const std::set<std::string> kSubcommands = {"validate", "score",   "splits", "train",
                                            "train-all", "eval",   "correlate", "synth",
                                            "check-fixtures"};

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool deterministic = true;
    int threads = 1;
    int verbosity = 0;

    int EffectiveThreads() const { return std::max(1, threads); }
};

struct DataOptions {
    std::string manifest;
    std::string features;
    std::string category_map;
    std::string pooling;

    void Add(CLI::App* cmd, const std::string& default_pooling, bool need_features = true) {
        pooling = default_pooling;
        cmd->add_option("--manifest", manifest, "Line-delimited clip manifest")->required();
        auto* f = cmd->add_option("--features", features, "EGF1 feature pack");
        if (need_features) f->required();
        cmd->add_option("--category-map", category_map, "Tab-separated label -> category mapping");
        cmd->add_option("--pooling", pooling, "Temporal pooling: mean|flatten")
            ->check(CLI::IsMember({"mean", "flatten"}))
            ->capture_default_str();
    }

    Manifest LoadManifestOnly(std::optional<std::size_t> n_rows = std::nullopt) const {
        Manifest m = LoadManifest(manifest, n_rows);
        if (!category_map.empty()) m = ApplyCategoryMapping(m, LoadCategoryMapping(category_map));
        return m;
    }

    std::pair<Manifest, FeatureSet> Load() const {
        FeatureSet f = LoadFeaturePack(features);
        return {LoadManifestOnly(f.n_clips), std::move(f)};
    }
};

void EnsureDir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::string FileSafe(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return out;
}

/// Accepts split files (role-filtered) or plain one-id-per-line lists.
std::vector<std::string> ReadIds(const fs::path& path, const std::string& role) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open id list " + path.string());
    std::string first;
    while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
    }
    in.close();
    if (!first.empty() && first.front() == '{') {
        const SplitSpec split = ReadSplitFile(path);
        if (role == "train") return split.train_ids;
        if (role == "val") return split.val_ids;
        return split.test_ids;
    }
    std::ifstream again(path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(again, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
        !kSubcommands.contains(args.front())) {
        err << "error: usage: unknown subcommand '" << args.front() << "'\n";
        return kUsageFailure;
    }

    CLI::App app{"Covariate-shift scoring and leave-one-domain-out benchmarking over clip features",
                 "driftbench"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--seed", global.seed, "Random seed")->envname("DRIFTBENCH_SEED")->capture_default_str();
    app.add_option("--threads", global.threads, "Worker threads")
        ->envname("DRIFTBENCH_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--deterministic,!--no-deterministic", global.deterministic,
                 "Sequential reductions for bitwise-reproducible results");
    app.add_flag("-v,--verbose", global.verbosity, "Increase verbosity");

    // validate ---------------------------------------------------------------
    DataOptions validate_data;
    auto* validate = app.add_subcommand("validate", "Check a manifest (and optionally a feature pack)");
    validate_data.Add(validate, "mean", false);

    // score ------------------------------------------------------------------
    DataOptions score_data;
    std::string grouping = "domain";
    std::size_t k_clusters = 64;
    double tau = 2.0;
    int max_iter = 300;
    double rel_tol = 1e-6;
    std::string score_out = ".";
    bool save_model = false;
    auto* score = app.add_subcommand("score", "Compute domain shift scores");
    score_data.Add(score, "mean");
    score->add_option("--grouping", grouping, "domain|class|domain-class")
        ->check(CLI::IsMember({"domain", "class", "domain-class"}))
        ->capture_default_str();
    score->add_option("--k-clusters", k_clusters, "Number of k-means clusters")->capture_default_str();
    score->add_option("--tau", tau, "Weight of the standard deviation term")->capture_default_str();
    score->add_option("--max-iter", max_iter, "Lloyd iteration cap")->capture_default_str();
    score->add_option("--rel-tol", rel_tol, "Relative inertia improvement to stop")->capture_default_str();
    score->add_option("--out-dir", score_out, "Output directory")->capture_default_str();
    score->add_flag("--save-model", save_model, "Also write clusters.ekm");

    // splits -----------------------------------------------------------------
    std::string splits_manifest;
    std::string hold_out;
    bool all_domains = false;
    double val_fraction = 0.24;
    std::string splits_out = ".";
    auto* splits = app.add_subcommand("splits", "Build leave-one-domain-out splits");
    splits->add_option("--manifest", splits_manifest, "Clip manifest")->required();
    auto* hold = splits->add_option("--hold-out", hold_out, "Held-out domain");
    auto* all = splits->add_flag("--all", all_domains, "One split per domain");
    hold->excludes(all);
    splits->add_option("--val-fraction", val_fraction, "Validation share of each source stratum")
        ->capture_default_str();
    splits->add_option("--out-dir", splits_out, "Output directory")->capture_default_str();

    // train ------------------------------------------------------------------
    DataOptions train_data;
    TrainConfig train_config;
    std::string split_path;
    std::string checkpoint_out;
    std::string history_out;
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--epochs", train_config.epochs, "Training epochs")->capture_default_str();
        cmd->add_option("--lr", train_config.learning_rate, "Adam learning rate")->capture_default_str();
        cmd->add_option("--batch", train_config.batch_size, "Mini-batch size")->capture_default_str();
        cmd->add_option("--drop-prob", train_config.drop_prob, "Dropout drop probability")
            ->capture_default_str();
        cmd->add_option("--hidden1", train_config.hidden1, "First hidden width")->capture_default_str();
        cmd->add_option("--hidden2", train_config.hidden2, "Second hidden width")->capture_default_str();
    };
    auto* train = app.add_subcommand("train", "Train the one-vs-all MLP on a split");
    train_data.Add(train, "flatten");
    train->add_option("--split", split_path, "Split file")->required();
    train->add_option("--out", checkpoint_out, "Checkpoint path")->required();
    train->add_option("--history", history_out, "History CSV (default <out>.history.csv)");
    add_train_flags(train);

    // train-all --------------------------------------------------------------
    DataOptions train_all_data;
    std::string train_all_out = ".";
    double train_all_val = 0.24;
    auto* train_all = app.add_subcommand("train-all", "Train and evaluate every LODO benchmark");
    train_all_data.Add(train_all, "flatten");
    train_all->add_option("--val-fraction", train_all_val, "Validation share")->capture_default_str();
    train_all->add_option("--out-dir", train_all_out, "Output directory")->capture_default_str();
    add_train_flags(train_all);

    // eval -------------------------------------------------------------------
    DataOptions eval_data;
    std::string eval_checkpoint;
    std::string eval_ids;
    std::string eval_role = "test";
    std::string eval_out = "eval.json";
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a list of clips");
    eval_data.Add(eval, "flatten");
    eval->add_option("--checkpoint", eval_checkpoint, "EMLP checkpoint")->required();
    eval->add_option("--ids", eval_ids, "Split file or one clip id per line")->required();
    eval->add_option("--role", eval_role, "Role to take from a split file")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    eval->add_option("--out", eval_out, "Eval report JSON")->capture_default_str();

    // correlate --------------------------------------------------------------
    std::string shift_path;
    std::vector<std::string> eval_paths;
    std::string correlate_out = ".";
    auto* correlate = app.add_subcommand("correlate", "Correlate shift scores with accuracies");
    correlate->add_option("--shift-report", shift_path, "Domain-grouped shift JSON")->required();
    correlate->add_option("--eval-report", eval_paths, "Eval report JSON (repeatable)")->required();
    correlate->add_option("--out-dir", correlate_out, "Output directory")->capture_default_str();

    // synth ------------------------------------------------------------------
    SyntheticSpec synth_spec;
    std::vector<std::string> synth_offsets;
    std::string synth_out = ".";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-domain dataset");
    synth->add_option("--domains", synth_spec.n_domains, "Number of domains")->capture_default_str();
    synth->add_option("--classes", synth_spec.n_classes, "Number of classes")->capture_default_str();
    synth->add_option("--per-cell", synth_spec.samples_per_cell, "Samples per domain x class")
        ->capture_default_str();
    synth->add_option("--dim", synth_spec.feature_dim, "Feature dimension")->capture_default_str();
    synth->add_option("--separation", synth_spec.class_separation, "Class mean distance from origin")
        ->capture_default_str();
    synth->add_option("--noise", synth_spec.noise_scale, "Isotropic noise standard deviation")
        ->capture_default_str();
    synth->add_option("--offset", synth_offsets, "<domain>=<norm>, repeatable");
    synth->add_option("--out-dir", synth_out, "Output directory")->capture_default_str();

    // check-fixtures ---------------------------------------------------------
    std::string fixtures_out;
    auto* check = app.add_subcommand("check-fixtures", "Verify the published-table fixtures");
    check->add_option("--out-dir", fixtures_out, "Optionally write the fixture report here");

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.emplace_back("driftbench");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: usage: " << msg << "\n";
        return kUsageFailure;
    }

    const std::uint64_t seed = global.seed;
    auto log = [&](int level, const std::string& line) {
        if (global.verbosity >= level) err << line << "\n";
    };

    try {
        if (validate->parsed()) {
            std::optional<FeatureSet> features;
            if (!validate_data.features.empty()) features = LoadFeaturePack(validate_data.features);
            const Manifest m = validate_data.LoadManifestOnly(
                features ? std::optional<std::size_t>(features->n_clips) : std::nullopt);
            out << "validate: ok " << m.records.size() << " records, " << m.domains.size() << " domains, "
                << m.categories.size() << " categories";
            if (features) {
                out << ", features " << features->n_clips << "x" << features->temporal_count << "x"
                    << features->feature_dim;
            }
            out << "\n";
        } else if (score->parsed()) {
            const auto [manifest, features] = score_data.Load();
            const Matrix x = GatherRows(PoolTemporal(features, ParsePooling(score_data.pooling)), manifest.records);
            KMeansOptions km;
            km.k_clusters = k_clusters;
            km.seed = seed;
            km.max_iter = max_iter;
            km.rel_tol = rel_tol;
            km.threads = global.EffectiveThreads();
            const ClusterModel model = KMeansFit(x, km);
            log(1, "k-means: " + std::to_string(model.iterations_run) + " iterations, inertia " +
                       detail::FormatReal(model.inertia));
            const GroupingMode mode = ParseGroupingMode(grouping);
            const ShiftReport report = ScoreWithModel(x, manifest.records, model, mode, tau);
            EnsureDir(score_out);
            WriteShiftReport(fs::path(score_out) / "shift.csv", fs::path(score_out) / "shift.json", report);
            if (mode == GroupingMode::kDomain) {
                const ShiftReport detail_report =
                    ScoreWithModel(x, manifest.records, model, GroupingMode::kDomainClass, tau);
                WriteShiftReport(fs::path(score_out) / "shift_domain_class.csv",
                                 fs::path(score_out) / "shift_domain_class.json", detail_report);
            }
            if (save_model) WriteClusterModel(fs::path(score_out) / "clusters.ekm", model);
            const auto& top = report.groups.front();
            out << "score: " << report.groups.size() << " groups, k_clusters=" << k_clusters << ", top '"
                << top.key.Label() << "' score=" << detail::FormatFixed(top.score, 4) << "\n";
        } else if (splits->parsed()) {
            const Manifest manifest = LoadManifest(splits_manifest);
            std::vector<SplitSpec> built;
            if (all_domains) {
                built = BuildAllLodoSplits(manifest, val_fraction, seed);
            } else {
                if (hold_out.empty()) {
                    throw Error(ErrorKind::kInvalidArgument, "splits needs --hold-out <domain> or --all");
                }
                built.push_back(BuildLodoSplit(manifest, hold_out, val_fraction, seed));
            }
            EnsureDir(splits_out);
            for (const auto& s : built) {
                WriteSplitFile(fs::path(splits_out) / ("split_" + FileSafe(s.held_out_domain) + ".jsonl"), s);
            }
            out << "splits: wrote " << built.size() << " split file(s)\n";
        } else if (train->parsed()) {
            train_config.seed = seed;
            const auto [manifest, features] = train_data.Load();
            const SplitSpec split = ReadSplitFile(split_path, &manifest);
            const LabeledData data = LabeledData::Build(manifest, features, ParsePooling(train_data.pooling));
            const TrainResult result = Train(data, split, train_config);
            WriteCheckpoint(checkpoint_out, result.best);
            const std::string history = history_out.empty() ? checkpoint_out + ".history.csv" : history_out;
            detail::WriteText(history, HistoryCsv(result.history));
            out << "train: " << result.history.size() << " epochs, best epoch " << result.best_epoch;
            if (!result.history.empty() && result.best_epoch > 0 &&
                result.history[result.best_epoch - 1].val_top1) {
                out << " val_top1=" << detail::FormatFixed(*result.history[result.best_epoch - 1].val_top1, 2);
            }
            out << "\n";
        } else if (train_all->parsed()) {
            const auto [manifest, features] = train_all_data.Load();
            const LabeledData data =
                LabeledData::Build(manifest, features, ParsePooling(train_all_data.pooling));
            const auto all_splits = BuildAllLodoSplits(manifest, train_all_val, seed);
            EnsureDir(train_all_out);
            std::vector<std::optional<EvalReport>> reports(all_splits.size());
            std::vector<std::string> failures(all_splits.size());
            std::atomic<std::size_t> next{0};
            auto worker = [&] {
                for (std::size_t i = next++; i < all_splits.size(); i = next++) {
                    try {
                        TrainConfig cfg = train_config;
                        cfg.seed = seed + i;
                        const auto& split = all_splits[i];
                        const auto stem = fs::path(train_all_out) / FileSafe(split.held_out_domain);
                        const TrainResult result = Train(data, split, cfg);
                        WriteSplitFile(stem.string() + ".split.jsonl", split);
                        WriteCheckpoint(stem.string() + ".emlp", result.best);
                        detail::WriteText(stem.string() + ".history.csv", HistoryCsv(result.history));
                        reports[i] = Evaluate(result.best, data, split.test_ids, split.held_out_domain);
                        WriteEvalReport(stem.string() + ".eval.json", *reports[i]);
                    } catch (const std::exception& e) {
                        failures[i] = e.what();
                    }
                }
            };
            {
                const int workers = std::min<int>(global.EffectiveThreads(), static_cast<int>(all_splits.size()));
                std::vector<std::jthread> pool;
                for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
                worker();
            }
            for (std::size_t i = 0; i < failures.size(); ++i) {
                if (!failures[i].empty()) {
                    throw Error(ErrorKind::kDivergence,
                                "benchmark '" + all_splits[i].held_out_domain + "': " + failures[i]);
                }
            }
            nlohmann::ordered_json acc = nlohmann::ordered_json::object();
            for (std::size_t i = 0; i < all_splits.size(); ++i) {
                acc[all_splits[i].held_out_domain] = reports[i]->overall_top1;
            }
            detail::WriteText(fs::path(train_all_out) / "accuracies.json", acc.dump(2) + "\n");
            out << "train-all: " << all_splits.size() << " benchmarks\n";
        } else if (eval->parsed()) {
            const auto [manifest, features] = eval_data.Load();
            const LabeledData data = LabeledData::Build(manifest, features, ParsePooling(eval_data.pooling));
            const MlpParams params = ReadCheckpoint(eval_checkpoint);
            const auto ids = ReadIds(eval_ids, eval_role);
            const EvalReport report = Evaluate(params, data, ids, fs::path(eval_ids).stem().string());
            WriteEvalReport(eval_out, report);
            out << "eval: " << report.n_evaluated << " clips, top1=" << detail::FormatFixed(report.overall_top1, 2)
                << "\n";
        } else if (correlate->parsed()) {
            AnalysisReport report;
            report.shift = ReadShiftReport(shift_path);
            for (const auto& path : eval_paths) {
                for (const auto& [domain, acc] : ReadEvalReport(path).per_domain_top1) {
                    if (!report.accuracy.emplace(domain, acc).second) {
                        throw Error(ErrorKind::kDuplicateId, "domain '" + domain + "' appears in several eval reports");
                    }
                }
            }
            if (report.accuracy.size() >= 3) {
                report.correlation = CorrelateShiftAccuracy(report.shift, report.accuracy);
            }
            EmitReport(report, correlate_out);
            out << "correlate: ";
            if (report.correlation) {
                out << report.correlation->n_points << " domains, spearman="
                    << detail::FormatFixed(report.correlation->spearman, 4) << "\n";
            } else {
                out << "fewer than 3 domains, correlation omitted\n";
            }
        } else if (synth->parsed()) {
            for (const auto& entry : synth_offsets) {
                const auto eq = entry.find('=');
                if (eq == std::string::npos) {
                    throw Error(ErrorKind::kInvalidArgument, "--offset expects <domain>=<norm>, got '" + entry + "'");
                }
                const std::string name = entry.substr(0, eq);
                double norm = 0.0;
                try {
                    norm = std::stod(entry.substr(eq + 1));
                } catch (const std::exception&) {
                    throw Error(ErrorKind::kInvalidArgument, "bad offset norm in '" + entry + "'");
                }
                std::size_t d = 0;
                if (!name.empty() && std::all_of(name.begin(), name.end(), ::isdigit)) {
                    d = std::stoul(name);
                    if (d >= synth_spec.n_domains) throw Error(ErrorKind::kUnknownDomain, "unknown domain '" + name + "'");
                } else {
                    d = synth_spec.DomainIndex(name);
                }
                if (synth_spec.domain_offsets.empty()) {
                    synth_spec.domain_offsets.assign(synth_spec.n_domains,
                                                     std::vector<double>(synth_spec.feature_dim, 0.0));
                }
                const auto dir = DefaultOffsetDirection(synth_spec);
                for (std::size_t k = 0; k < dir.size(); ++k) synth_spec.domain_offsets[d][k] = norm * dir[k];
            }
            const SyntheticDataset ds = Generate(synth_spec, seed);
            EnsureDir(synth_out);
            WriteManifest(fs::path(synth_out) / "manifest.jsonl", ds.manifest);
            WriteFeaturePack(fs::path(synth_out) / "features.egf", ds.features);
            out << "synth: " << ds.manifest.records.size() << " clips, " << ds.manifest.domains.size()
                << " domains, " << ds.manifest.categories.size() << " classes\n";
        } else if (check->parsed()) {
            bool ok = true;
            for (const auto& row : CheckScoreConsistency(PublishedFixture())) {
                out << (row.pass ? "PASS " : "FAIL ") << row.domain << ": mu+2sigma="
                    << detail::FormatFixed(row.recomputed, 2) << " published=" << detail::FormatFixed(row.published, 2)
                    << "\n";
                ok = ok && row.pass;
            }
            AnalysisReport report{FixtureShiftReport(), FixtureAccuracies(), std::nullopt};
            report.correlation = CorrelateShiftAccuracy(report.shift, report.accuracy);
            out << "spearman(score, MLP-Lite top1) = " << detail::FormatFixed(report.correlation->spearman, 4)
                << "\n";
            if (!fixtures_out.empty()) EmitReport(report, fixtures_out);
            if (!ok) {
                err << "error: fixture: published score inconsistent with mu + 2 sigma\n";
                return kRuntimeFailure;
            }
        }
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << ErrorKindName(e.kind()) << ": " << msg << "\n";
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: internal: " << msg << "\n";
        return kRuntimeFailure;
    }
    return 0;
}

}  // namespace driftbench::cli
