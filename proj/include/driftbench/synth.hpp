#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftbench/dataset.hpp"

namespace driftbench {

/// Gaussian blobs with class means on orthogonal axes and an additive
/// per-domain offset (covariate shift). Optional per-domain label priors
/// introduce prior shift.
struct SyntheticSpec {
    std::size_t n_domains = 4;
    std::size_t n_classes = 3;
    std::size_t samples_per_cell = 50;
    std::size_t feature_dim = 8;
    double class_separation = 4.0;
    std::vector<std::vector<double>> domain_offsets;  // empty or n_domains x feature_dim
    double noise_scale = 1.0;
    std::optional<std::vector<std::vector<double>>> label_priors;  // n_domains x n_classes

    void Validate() const;
    std::string DomainName(std::size_t d) const;
    std::string ClassName(std::size_t c) const;
    std::size_t DomainIndex(const std::string& name) const;
};

struct SyntheticDataset {
    Manifest manifest;
    FeatureSet features;  // temporal_count 1
};

/// Rows are emitted domain by domain, class by class. Noise draws are
/// independent of the offsets, so datasets differing only in offsets share
/// every random number.
SyntheticDataset Generate(const SyntheticSpec& spec, std::uint64_t seed);

/// Unit direction used for domain offsets given only a norm: the last axis,
/// which is orthogonal to every class mean when feature_dim > n_classes.
std::vector<double> DefaultOffsetDirection(const SyntheticSpec& spec);

/// One dataset per magnitude with the target domain's offset rescaled to that
/// norm (along its base direction, or the default direction when zero).
std::vector<SyntheticDataset> OffsetSweep(const SyntheticSpec& base, const std::string& domain,
                                          const std::vector<double>& magnitudes, std::uint64_t seed);

}  // namespace driftbench
