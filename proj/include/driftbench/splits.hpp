#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "driftbench/dataset.hpp"

namespace driftbench {

/// Leave-one-domain-out partition. Id lists follow manifest order.
struct SplitSpec {
    std::string held_out_domain;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
    double val_fraction = 0.24;
    std::uint64_t seed = 0;

    bool operator==(const SplitSpec&) const = default;
};

/// Test = every clip of held_out_domain. Each remaining (domain, category)
/// stratum is shuffled with the seed and its first round(val_fraction * n)
/// clips go to val, the rest to train.
SplitSpec BuildLodoSplit(const Manifest& manifest, const std::string& held_out_domain,
                         double val_fraction, std::uint64_t seed);

/// One split per domain, in vocabulary order.
std::vector<SplitSpec> BuildAllLodoSplits(const Manifest& manifest, double val_fraction,
                                          std::uint64_t seed);

/// Line-delimited {"clip_id": ..., "role": "train"|"val"|"test"}.
void WriteSplitFile(const std::filesystem::path& path, const SplitSpec& split);

/// Reads a split file. held_out_domain is recovered from the manifest when
/// one is given.
SplitSpec ReadSplitFile(const std::filesystem::path& path, const Manifest* manifest = nullptr);

}  // namespace driftbench
