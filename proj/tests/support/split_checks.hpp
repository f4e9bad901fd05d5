#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "driftbench/dataset.hpp"
#include "driftbench/splits.hpp"

namespace driftbench::testing {

/// Every violated split property, one message each. Checks disjointness,
/// coverage of the manifest, that test holds exactly the held-out domain, and
/// that each source (domain, category) stratum puts within one clip of
/// val_fraction * n into val.
inline std::vector<std::string> SplitViolations(const Manifest& manifest, const SplitSpec& split) {
    std::vector<std::string> problems;
    std::map<std::string, const ClipRecord*> by_id;
    for (const auto& r : manifest.records) by_id[r.clip_id] = &r;

    std::map<std::string, int> seen;
    for (const auto* ids : {&split.train_ids, &split.val_ids, &split.test_ids}) {
        for (const auto& id : *ids) ++seen[id];
    }
    for (const auto& [id, count] : seen) {
        if (count > 1) problems.push_back("clip " + id + " appears in " + std::to_string(count) + " roles");
        if (!by_id.count(id)) problems.push_back("clip " + id + " is not in the manifest");
    }
    if (seen.size() != manifest.records.size()) problems.push_back("split does not cover the manifest");

    for (const auto& id : split.test_ids) {
        if (by_id.count(id) && by_id[id]->domain != split.held_out_domain) {
            problems.push_back("test clip " + id + " is not from " + split.held_out_domain);
        }
    }
    for (const auto* ids : {&split.train_ids, &split.val_ids}) {
        for (const auto& id : *ids) {
            if (by_id.count(id) && by_id[id]->domain == split.held_out_domain) {
                problems.push_back("source clip " + id + " is from the held-out domain");
            }
        }
    }

    std::map<std::pair<std::string, std::string>, std::pair<double, double>> strata;  // (n, n_val)
    for (const auto& r : manifest.records) {
        if (r.domain != split.held_out_domain) strata[{r.domain, r.category}].first += 1;
    }
    for (const auto& id : split.val_ids) {
        if (by_id.count(id)) strata[{by_id[id]->domain, by_id[id]->category}].second += 1;
    }
    for (const auto& [key, counts] : strata) {
        if (std::abs(counts.second - split.val_fraction * counts.first) > 1.0) {
            problems.push_back("stratum " + key.first + "/" + key.second + " has " +
                               std::to_string(static_cast<int>(counts.second)) + " val clips of " +
                               std::to_string(static_cast<int>(counts.first)));
        }
    }
    return problems;
}

}  // namespace driftbench::testing
