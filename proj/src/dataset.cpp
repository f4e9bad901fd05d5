#include "driftbench/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "byte_io.hpp"

namespace driftbench {

std::string_view ErrorKindName(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kParse: return "parse";
        case ErrorKind::kDuplicateId: return "duplicate_id";
        case ErrorKind::kOutOfRange: return "out_of_range";
        case ErrorKind::kBadMagic: return "bad_magic";
        case ErrorKind::kSizeMismatch: return "size_mismatch";
        case ErrorKind::kNonFinite: return "non_finite";
        case ErrorKind::kUnmappedLabel: return "unmapped_label";
        case ErrorKind::kInvalidArgument: return "invalid_argument";
        case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
        case ErrorKind::kTooFewGroups: return "too_few_groups";
        case ErrorKind::kUnknownDomain: return "unknown_domain";
        case ErrorKind::kUnknownId: return "unknown_id";
        case ErrorKind::kDivergence: return "divergence";
        case ErrorKind::kIo: return "io";
    }
    return "unknown";
}

Pooling ParsePooling(std::string_view name) {
    if (name == "mean") return Pooling::kMean;
    if (name == "flatten") return Pooling::kFlatten;
    throw Error(ErrorKind::kInvalidArgument,
                "unknown pooling mode '" + std::string(name) + "' (expected mean|flatten)");
}

namespace {

std::vector<std::string> SortedDistinct(const std::vector<ClipRecord>& records,
                                        std::string ClipRecord::*field) {
    std::set<std::string> names;
    for (const auto& r : records) names.insert(r.*field);
    return {names.begin(), names.end()};
}

}  // namespace

Manifest MakeManifest(std::vector<ClipRecord> records, std::optional<std::size_t> n_rows) {
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (const auto& r : records) {
        if (!seen.insert(r.clip_id).second) {
            throw Error(ErrorKind::kDuplicateId, "duplicate clip_id '" + r.clip_id + "'");
        }
        if (n_rows && r.row_index >= *n_rows) {
            throw Error(ErrorKind::kOutOfRange,
                        "row_index " + std::to_string(r.row_index) + " of clip '" + r.clip_id +
                            "' is outside [0, " + std::to_string(*n_rows) + ")");
        }
    }
    Manifest m;
    m.domains = SortedDistinct(records, &ClipRecord::domain);
    m.categories = SortedDistinct(records, &ClipRecord::category);
    m.records = std::move(records);
    return m;
}

Manifest LoadManifest(const std::filesystem::path& path, std::optional<std::size_t> n_rows) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open manifest " + path.string());

    std::vector<ClipRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::kParse, where + ": malformed record: " + e.what());
        }
        if (!obj.is_object()) throw Error(ErrorKind::kParse, where + ": record is not an object");
        ClipRecord r;
        for (auto [key, field] : {std::pair{"clip_id", &ClipRecord::clip_id},
                                  std::pair{"domain", &ClipRecord::domain},
                                  std::pair{"category", &ClipRecord::category}}) {
            auto it = obj.find(key);
            if (it == obj.end() || !it->is_string()) {
                throw Error(ErrorKind::kParse,
                            where + ": missing or non-string field '" + key + "'");
            }
            r.*field = it->get<std::string>();
        }
        auto it = obj.find("row_index");
        if (it == obj.end() || !it->is_number_integer() ||
            (it->is_number_integer() && !it->is_number_unsigned() && it->get<long long>() < 0)) {
            throw Error(ErrorKind::kParse,
                        where + ": missing or invalid integer field 'row_index'");
        }
        r.row_index = it->get<std::size_t>();
        records.push_back(std::move(r));
    }
    return MakeManifest(std::move(records), n_rows);
}

void WriteManifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIo, "cannot write manifest " + path.string());
    for (const auto& r : manifest.records) {
        nlohmann::ordered_json obj;
        obj["clip_id"] = r.clip_id;
        obj["domain"] = r.domain;
        obj["category"] = r.category;
        obj["row_index"] = r.row_index;
        out << obj.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Feature pack: "EGF1" | u32 N | u32 T | u32 D | N*T*D f32, little-endian.

namespace {
constexpr char kPackMagic[4] = {'E', 'G', 'F', '1'};
constexpr std::size_t kPackHeader = 16;
}  // namespace

FeatureSet DecodeFeaturePack(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kPackHeader || std::memcmp(bytes.data(), kPackMagic, 4) != 0) {
        throw Error(ErrorKind::kBadMagic, "feature pack does not start with magic EGF1");
    }
    FeatureSet fs;
    fs.n_clips = detail::ReadU32(bytes.subspan(4));
    fs.temporal_count = detail::ReadU32(bytes.subspan(8));
    fs.feature_dim = detail::ReadU32(bytes.subspan(12));
    if (fs.temporal_count < 1 || fs.feature_dim < 1) {
        throw Error(ErrorKind::kSizeMismatch, "feature pack declares T or D of zero");
    }
    const std::size_t count = fs.n_clips * fs.temporal_count * fs.feature_dim;
    const std::size_t expected = kPackHeader + count * 4;
    if (bytes.size() != expected) {
        throw Error(ErrorKind::kSizeMismatch,
                    "feature pack declares " + std::to_string(fs.n_clips) + "x" +
                        std::to_string(fs.temporal_count) + "x" +
                        std::to_string(fs.feature_dim) + " (" + std::to_string(expected) +
                        " bytes) but holds " + std::to_string(bytes.size()) + " bytes");
    }
    fs.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        fs.values[i] = detail::ReadF32(bytes.subspan(kPackHeader + 4 * i));
    }
    ValidateFinite(fs);
    return fs;
}

std::vector<std::uint8_t> EncodeFeaturePack(const FeatureSet& fs) {
    const std::size_t count = fs.n_clips * fs.temporal_count * fs.feature_dim;
    if (fs.values.size() != count) {
        throw Error(ErrorKind::kSizeMismatch, "feature values do not match declared shape");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(kPackHeader + 4 * count);
    bytes.insert(bytes.end(), std::begin(kPackMagic), std::end(kPackMagic));
    detail::AppendU32(bytes, static_cast<std::uint32_t>(fs.n_clips));
    detail::AppendU32(bytes, static_cast<std::uint32_t>(fs.temporal_count));
    detail::AppendU32(bytes, static_cast<std::uint32_t>(fs.feature_dim));
    for (float v : fs.values) detail::AppendF32(bytes, v);
    return bytes;
}

FeatureSet LoadFeaturePack(const std::filesystem::path& path) {
    return DecodeFeaturePack(detail::ReadFileBytes(path));
}

void WriteFeaturePack(const std::filesystem::path& path, const FeatureSet& features) {
    detail::WriteFileBytes(path, EncodeFeaturePack(features));
}

void ValidateFinite(const FeatureSet& fs) {
    const std::size_t width = fs.temporal_count * fs.feature_dim;
    for (std::size_t i = 0; i < fs.values.size(); ++i) {
        if (!std::isfinite(fs.values[i])) {
            throw Error(ErrorKind::kNonFinite,
                        "non-finite feature value at row " + std::to_string(i / width));
        }
    }
}

Matrix PoolTemporal(const FeatureSet& fs, Pooling mode) {
    const std::size_t t_count = fs.temporal_count;
    const std::size_t dim = fs.feature_dim;
    if (mode == Pooling::kFlatten) {
        Matrix out(fs.n_clips, t_count * dim);
        for (std::size_t i = 0; i < fs.values.size(); ++i) out.data()[i] = fs.values[i];
        return out;
    }
    Matrix out = Matrix::Zero(fs.n_clips, dim);
    for (std::size_t n = 0; n < fs.n_clips; ++n) {
        const auto row = fs.Row(n);
        for (std::size_t t = 0; t < t_count; ++t) {
            for (std::size_t d = 0; d < dim; ++d) out(n, d) += row[t * dim + d];
        }
    }
    out /= static_cast<double>(t_count);
    return out;
}

Matrix GatherRows(const Matrix& pooled, const std::vector<ClipRecord>& records) {
    Matrix out(records.size(), pooled.cols());
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].row_index >= static_cast<std::size_t>(pooled.rows())) {
            throw Error(ErrorKind::kOutOfRange, "row_index " +
                                                    std::to_string(records[i].row_index) +
                                                    " of clip '" + records[i].clip_id +
                                                    "' exceeds feature rows");
        }
        out.row(i) = pooled.row(records[i].row_index);
    }
    return out;
}

CategoryMapping LoadCategoryMapping(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open category mapping " + path.string());
    CategoryMapping mapping;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) +
                                               ": expected two tab-separated columns");
        }
        mapping.entries[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return mapping;
}

Manifest ApplyCategoryMapping(const Manifest& manifest, const CategoryMapping& mapping) {
    std::set<std::string> missing;
    std::vector<ClipRecord> records = manifest.records;
    for (auto& r : records) {
        auto it = mapping.entries.find(r.category);
        if (it == mapping.entries.end()) {
            missing.insert(r.category);
        } else {
            r.category = it->second;
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& label : missing) list += (list.empty() ? "'" : ", '") + label + "'";
        throw Error(ErrorKind::kUnmappedLabel, "unmapped labels: " + list);
    }
    Manifest out;
    out.records = std::move(records);
    out.domains = manifest.domains;
    std::set<std::string> codomain;
    for (const auto& [label, category] : mapping.entries) codomain.insert(category);
    out.categories.assign(codomain.begin(), codomain.end());
    return out;
}

}  // namespace driftbench
