#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "driftbench/error.hpp"

namespace driftbench {

/// Row-major dense matrix used throughout the toolkit (one sample per row).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ClipRecord {
    std::string clip_id;
    std::string domain;
    std::string category;
    std::size_t row_index = 0;

    bool operator==(const ClipRecord&) const = default;
};

/// Records in file order plus the sorted distinct domain/category names.
struct Manifest {
    std::vector<ClipRecord> records;
    std::vector<std::string> domains;
    std::vector<std::string> categories;
};

/// Packed clip features: n_clips x temporal_count x feature_dim floats,
/// row-major in (clip, temporal, feature) order.
struct FeatureSet {
    std::size_t n_clips = 0;
    std::size_t temporal_count = 0;
    std::size_t feature_dim = 0;
    std::vector<float> values;
    std::vector<std::string> clip_ids;

    std::span<const float> Row(std::size_t clip) const {
        const std::size_t width = temporal_count * feature_dim;
        return {values.data() + clip * width, width};
    }
};

enum class Pooling { kMean, kFlatten };

Pooling ParsePooling(std::string_view name);

/// Fine-grained label -> category.
struct CategoryMapping {
    std::map<std::string, std::string> entries;
};

/// Builds sorted vocabularies and validates id uniqueness. When n_rows is
/// given, every row_index must be below it.
Manifest MakeManifest(std::vector<ClipRecord> records,
                      std::optional<std::size_t> n_rows = std::nullopt);

Manifest LoadManifest(const std::filesystem::path& path,
                      std::optional<std::size_t> n_rows = std::nullopt);
void WriteManifest(const std::filesystem::path& path, const Manifest& manifest);

FeatureSet LoadFeaturePack(const std::filesystem::path& path);
void WriteFeaturePack(const std::filesystem::path& path, const FeatureSet& features);

/// Decodes a feature pack from an in-memory byte buffer.
FeatureSet DecodeFeaturePack(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> EncodeFeaturePack(const FeatureSet& features);

/// Throws kNonFinite naming the first offending row.
void ValidateFinite(const FeatureSet& features);

/// Mean: N x D average over the temporal axis. Flatten: N x (T*D).
Matrix PoolTemporal(const FeatureSet& features, Pooling mode);

/// Rows of the pooled matrix reordered so row i corresponds to records[i].
Matrix GatherRows(const Matrix& pooled, const std::vector<ClipRecord>& records);

CategoryMapping LoadCategoryMapping(const std::filesystem::path& path);

/// Replaces every record's category. Throws kUnmappedLabel listing all labels
/// that have no entry.
Manifest ApplyCategoryMapping(const Manifest& manifest, const CategoryMapping& mapping);

}  // namespace driftbench
