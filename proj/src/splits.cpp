#include "driftbench/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rng.hpp"

namespace driftbench {

SplitSpec BuildLodoSplit(const Manifest& manifest, const std::string& held_out_domain,
                         double val_fraction, std::uint64_t seed) {
    if (!std::binary_search(manifest.domains.begin(), manifest.domains.end(), held_out_domain)) {
        throw Error(ErrorKind::kUnknownDomain, "unknown domain '" + held_out_domain + "'");
    }
    if (manifest.domains.size() < 2) {
        throw Error(ErrorKind::kTooFewGroups,
                    "leave-one-domain-out needs at least two domains in the manifest");
    }
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
        throw Error(ErrorKind::kInvalidArgument, "val_fraction must lie in [0, 1)");
    }

    SplitSpec split;
    split.held_out_domain = held_out_domain;
    split.val_fraction = val_fraction;
    split.seed = seed;

    // Record positions per source stratum, strata visited in sorted order.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.domain != held_out_domain) strata[{r.domain, r.category}].push_back(i);
    }

    std::mt19937_64 rng(seed);
    std::vector<bool> is_val(manifest.records.size(), false);
    for (auto& [stratum, members] : strata) {
        detail::Shuffle(members, rng);
        const auto n_val = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(members.size())));
        for (std::size_t j = 0; j < n_val; ++j) is_val[members[j]] = true;
    }

    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.domain == held_out_domain) {
            split.test_ids.push_back(r.clip_id);
        } else if (is_val[i]) {
            split.val_ids.push_back(r.clip_id);
        } else {
            split.train_ids.push_back(r.clip_id);
        }
    }
    return split;
}

std::vector<SplitSpec> BuildAllLodoSplits(const Manifest& manifest, double val_fraction,
                                          std::uint64_t seed) {
    std::vector<SplitSpec> out;
    out.reserve(manifest.domains.size());
    for (const auto& domain : manifest.domains) {
        out.push_back(BuildLodoSplit(manifest, domain, val_fraction, seed));
    }
    return out;
}

void WriteSplitFile(const std::filesystem::path& path, const SplitSpec& split) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIo, "cannot write split file " + path.string());
    auto emit = [&](const std::vector<std::string>& ids, const char* role) {
        for (const auto& id : ids) {
            nlohmann::ordered_json line;
            line["clip_id"] = id;
            line["role"] = role;
            out << line.dump() << '\n';
        }
    };
    emit(split.train_ids, "train");
    emit(split.val_ids, "val");
    emit(split.test_ids, "test");
}

SplitSpec ReadSplitFile(const std::filesystem::path& path, const Manifest* manifest) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open split file " + path.string());
    SplitSpec split;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        try {
            const auto obj = nlohmann::json::parse(line);
            const auto id = obj.at("clip_id").get<std::string>();
            const auto role = obj.at("role").get<std::string>();
            if (role == "train") {
                split.train_ids.push_back(id);
            } else if (role == "val") {
                split.val_ids.push_back(id);
            } else if (role == "test") {
                split.test_ids.push_back(id);
            } else {
                throw Error(ErrorKind::kParse, where + ": unknown role '" + role + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::kParse, where + ": " + e.what());
        }
    }
    if (manifest != nullptr && !split.test_ids.empty()) {
        for (const auto& r : manifest->records) {
            if (r.clip_id == split.test_ids.front()) {
                split.held_out_domain = r.domain;
                break;
            }
        }
    }
    return split;
}

}  // namespace driftbench
