#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "driftbench/cli.hpp"

namespace driftbench::testing {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult RunCli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::Run(args, out, err);
    return {code, out.str(), err.str()};
}

/// synth -> score -> splits -> train -> eval -> correlate through the command
/// line entry point, every artifact written under `dir`. Returns the first
/// failing step's output, or an empty string.
inline std::string RunSyntheticPipeline(const std::filesystem::path& dir, std::uint64_t seed,
                                        int epochs = 5) {
    const std::string d = dir.string();
    const std::string s = std::to_string(seed);
    const std::string data = "--manifest=" + d + "/manifest.jsonl";
    const std::string feats = "--features=" + d + "/features.egf";
    std::vector<std::vector<std::string>> steps = {
        {"synth", "--seed", s, "--domains", "3", "--classes", "3", "--per-cell", "20", "--dim", "8",
         "--offset", "domain2=2", "--out-dir", d},
        {"score", "--seed", s, data, feats, "--k-clusters", "8", "--out-dir", d + "/score", "--save-model"},
        {"splits", "--seed", s, data, "--all", "--out-dir", d + "/splits"},
    };
    std::vector<std::string> evals;
    for (const char* domain : {"domain0", "domain1", "domain2"}) {
        const std::string split = d + "/splits/split_" + domain + ".jsonl";
        const std::string ckpt = d + "/" + domain + ".emlp";
        const std::string eval = d + "/" + domain + ".eval.json";
        steps.push_back({"train", "--seed", s, data, feats, "--split", split, "--out", ckpt, "--epochs",
                         std::to_string(epochs), "--hidden1", "32", "--hidden2", "16", "--batch", "16",
                         "--drop-prob", "0.2"});
        steps.push_back({"eval", data, feats, "--checkpoint", ckpt, "--ids", split, "--role", "test", "--out", eval});
        evals.push_back(eval);
    }
    std::vector<std::string> correlate = {"correlate", "--shift-report", d + "/score/shift.json", "--out-dir",
                                          d + "/report"};
    for (const auto& e : evals) {
        correlate.push_back("--eval-report");
        correlate.push_back(e);
    }
    steps.push_back(correlate);

    for (const auto& step : steps) {
        const CliResult r = RunCli(step);
        if (r.code != 0) return step.front() + " exited " + std::to_string(r.code) + ": " + r.err;
    }
    return {};
}

/// Relative path -> file bytes for every regular file below root.
inline std::map<std::string, std::string> SnapshotTree(const std::filesystem::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[std::filesystem::relative(entry.path(), root).string()] = ss.str();
    }
    return files;
}

}  // namespace driftbench::testing
