#include "driftbench/synth.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace driftbench {

namespace {

std::string Padded(const char* prefix, std::size_t i, std::size_t count) {
    const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
    std::string digits = std::to_string(i);
    return prefix + std::string(width - digits.size(), '0') + digits;
}

// Largest-remainder apportionment of `total` samples over `weights`.
std::vector<std::size_t> Apportion(std::size_t total, const std::vector<double>& weights) {
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double exact = weights[c] * static_cast<double>(total);
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i].second];
    return counts;
}

}  // namespace

void SyntheticSpec::Validate() const {
    if (n_domains < 1 || n_classes < 1 || samples_per_cell < 1 || feature_dim < 1) {
        throw Error(ErrorKind::kInvalidArgument, "synthetic counts must be positive");
    }
    if (feature_dim < n_classes) {
        throw Error(ErrorKind::kInvalidArgument, "feature_dim (" + std::to_string(feature_dim) +
                                                     ") must be at least n_classes (" +
                                                     std::to_string(n_classes) + ")");
    }
    if (!(noise_scale >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "noise_scale must be >= 0");
    if (!domain_offsets.empty()) {
        if (domain_offsets.size() != n_domains) {
            throw Error(ErrorKind::kInvalidArgument, "need one offset per domain");
        }
        for (const auto& o : domain_offsets) {
            if (o.size() != feature_dim) {
                throw Error(ErrorKind::kInvalidArgument, "offset length must equal feature_dim");
            }
        }
    }
    if (label_priors) {
        if (label_priors->size() != n_domains) {
            throw Error(ErrorKind::kInvalidArgument, "need one prior vector per domain");
        }
        for (const auto& p : *label_priors) {
            const double sum = std::accumulate(p.begin(), p.end(), 0.0);
            const bool nonneg = std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0; });
            if (p.size() != n_classes || !nonneg || std::abs(sum - 1.0) > 1e-9) {
                throw Error(ErrorKind::kInvalidArgument,
                            "label priors must be n_classes nonnegative values summing to 1");
            }
        }
    }
}

std::string SyntheticSpec::DomainName(std::size_t d) const { return Padded("domain", d, n_domains); }
std::string SyntheticSpec::ClassName(std::size_t c) const { return Padded("class", c, n_classes); }

std::size_t SyntheticSpec::DomainIndex(const std::string& name) const {
    for (std::size_t d = 0; d < n_domains; ++d) {
        if (DomainName(d) == name) return d;
    }
    throw Error(ErrorKind::kUnknownDomain, "unknown domain '" + name + "'");
}

std::vector<double> DefaultOffsetDirection(const SyntheticSpec& spec) {
    std::vector<double> dir(spec.feature_dim, 0.0);
    dir.back() = 1.0;
    return dir;
}

SyntheticDataset Generate(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.Validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<ClipRecord> records;
    SyntheticDataset out;
    FeatureSet& fs = out.features;
    fs.temporal_count = 1;
    fs.feature_dim = spec.feature_dim;

    const std::size_t per_domain = spec.samples_per_cell * spec.n_classes;
    for (std::size_t d = 0; d < spec.n_domains; ++d) {
        std::vector<std::size_t> counts(spec.n_classes, spec.samples_per_cell);
        if (spec.label_priors) counts = Apportion(per_domain, (*spec.label_priors)[d]);
        for (std::size_t c = 0; c < spec.n_classes; ++c) {
            for (std::size_t i = 0; i < counts[c]; ++i) {
                const std::size_t row = records.size();
                records.push_back({spec.DomainName(d) + "_" + spec.ClassName(c) + "_" + std::to_string(i),
                                   spec.DomainName(d), spec.ClassName(c), row});
                for (std::size_t k = 0; k < spec.feature_dim; ++k) {
                    double v = spec.noise_scale * gauss(rng);
                    if (k == c) v += spec.class_separation;
                    if (!spec.domain_offsets.empty()) v += spec.domain_offsets[d][k];
                    fs.values.push_back(static_cast<float>(v));
                }
            }
        }
    }
    fs.n_clips = records.size();
    for (const auto& r : records) fs.clip_ids.push_back(r.clip_id);
    out.manifest = MakeManifest(std::move(records), fs.n_clips);
    return out;
}

std::vector<SyntheticDataset> OffsetSweep(const SyntheticSpec& base, const std::string& domain,
                                          const std::vector<double>& magnitudes, std::uint64_t seed) {
    base.Validate();
    const std::size_t target = base.DomainIndex(domain);
    SyntheticSpec spec = base;
    if (spec.domain_offsets.empty()) {
        spec.domain_offsets.assign(spec.n_domains, std::vector<double>(spec.feature_dim, 0.0));
    }
    std::vector<double> direction = spec.domain_offsets[target];
    double norm = 0.0;
    for (double v : direction) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : direction) v /= norm;
    } else {
        direction = DefaultOffsetDirection(spec);
    }

    std::vector<SyntheticDataset> out;
    out.reserve(magnitudes.size());
    for (double magnitude : magnitudes) {
        for (std::size_t k = 0; k < spec.feature_dim; ++k) {
            spec.domain_offsets[target][k] = magnitude * direction[k];
        }
        out.push_back(Generate(spec, seed));
    }
    return out;
}

}  // namespace driftbench
