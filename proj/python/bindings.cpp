#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "driftbench/analysis.hpp"
#include "driftbench/cli.hpp"
#include "driftbench/clustering.hpp"
#include "driftbench/dataset.hpp"
#include "driftbench/mlp.hpp"
#include "driftbench/shift_metric.hpp"
#include "driftbench/splits.hpp"
#include "driftbench/synth.hpp"
#include "driftbench/training.hpp"

namespace py = pybind11;
using namespace driftbench;

namespace {

py::array_t<float> FeaturesToArray(const FeatureSet& fs) {
    py::array_t<float> arr({fs.n_clips, fs.temporal_count, fs.feature_dim});
    std::copy(fs.values.begin(), fs.values.end(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_driftbench, m) {
    m.doc() = "Covariate-shift scoring, LODO splits and one-vs-all MLP training over clip features.";

    static py::exception<Error> error_type(m, "DriftbenchError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const auto msg = std::string(ErrorKindName(e.kind())) + ": " + e.what();
            PyErr_SetString(error_type.ptr(), msg.c_str());
        }
    });

    py::class_<ClipRecord>(m, "ClipRecord")
        .def(py::init<std::string, std::string, std::string, std::size_t>(), py::arg("clip_id"),
             py::arg("domain"), py::arg("category"), py::arg("row_index"))
        .def_readwrite("clip_id", &ClipRecord::clip_id)
        .def_readwrite("domain", &ClipRecord::domain)
        .def_readwrite("category", &ClipRecord::category)
        .def_readwrite("row_index", &ClipRecord::row_index);

    py::class_<Manifest>(m, "Manifest")
        .def(py::init([](std::vector<ClipRecord> records) { return MakeManifest(std::move(records)); }),
             py::arg("records"))
        .def_readonly("records", &Manifest::records)
        .def_readonly("domains", &Manifest::domains)
        .def_readonly("categories", &Manifest::categories);

    m.def("load_manifest", [](const std::filesystem::path& p) { return LoadManifest(p); }, py::arg("path"));
    m.def("load_features",
          [](const std::filesystem::path& p) { return FeaturesToArray(LoadFeaturePack(p)); },
          py::arg("path"), "Feature pack as an (N, T, D) float32 array.");
    m.def(
        "pool_temporal",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> values, const std::string& mode) {
            if (values.ndim() != 3) throw Error(ErrorKind::kDimensionMismatch, "expected an (N, T, D) array");
            FeatureSet fs;
            fs.n_clips = values.shape(0);
            fs.temporal_count = values.shape(1);
            fs.feature_dim = values.shape(2);
            fs.values.assign(values.data(), values.data() + values.size());
            return PoolTemporal(fs, ParsePooling(mode));
        },
        py::arg("values"), py::arg("mode") = "mean");

    py::class_<ClusterModel>(m, "ClusterModel")
        .def_readonly("k_clusters", &ClusterModel::k_clusters)
        .def_readonly("centroids", &ClusterModel::centroids)
        .def_readonly("assignments", &ClusterModel::assignments)
        .def_readonly("inertia", &ClusterModel::inertia)
        .def_readonly("seed", &ClusterModel::seed)
        .def_readonly("iterations_run", &ClusterModel::iterations_run);

    m.def(
        "kmeans_fit",
        [](const Matrix& x, std::size_t k_clusters, std::uint64_t seed, int max_iter, double rel_tol) {
            return KMeansFit(x, {k_clusters, seed, max_iter, rel_tol, 1});
        },
        py::arg("x"), py::arg("k_clusters"), py::arg("seed") = 0, py::arg("max_iter") = 300,
        py::arg("rel_tol") = 1e-6);
    m.def("assign_nearest", [](const Matrix& x, const Matrix& c) { return AssignNearest(x, c); },
          py::arg("x"), py::arg("centroids"));

    py::class_<GroupShift>(m, "GroupShift")
        .def_property_readonly("group", [](const GroupShift& g) { return g.key.Label(); })
        .def_property_readonly("domain", [](const GroupShift& g) { return g.key.domain; })
        .def_property_readonly("category", [](const GroupShift& g) { return g.key.category; })
        .def_readonly("member_count", &GroupShift::member_count)
        .def_readonly("distances", &GroupShift::distances)
        .def_readonly("mu", &GroupShift::mu)
        .def_readonly("sigma", &GroupShift::sigma)
        .def_readonly("score", &GroupShift::score);

    py::class_<ShiftReport>(m, "ShiftReport")
        .def_readonly("tau", &ShiftReport::tau)
        .def_readonly("k_clusters", &ShiftReport::k_clusters)
        .def_property_readonly("mode", [](const ShiftReport& r) { return std::string(GroupingModeName(r.mode)); })
        .def_readonly("groups", &ShiftReport::groups)
        .def("to_json", [](const ShiftReport& r) { return ToJson(r).dump(); });

    m.def(
        "score_dataset",
        [](const Matrix& x, const std::vector<ClipRecord>& records, std::size_t k_clusters, std::uint64_t seed,
           const std::string& grouping, double tau) {
            ScoreOptions opts;
            opts.kmeans.k_clusters = k_clusters;
            opts.kmeans.seed = seed;
            opts.mode = ParseGroupingMode(grouping);
            opts.tau = tau;
            return ScoreDataset(x, records, opts);
        },
        py::arg("x"), py::arg("records"), py::arg("k_clusters") = 64, py::arg("seed") = 0,
        py::arg("grouping") = "domain", py::arg("tau") = 2.0);
    m.def(
        "shift_scores",
        [](const std::vector<std::vector<double>>& distances, double tau) {
            std::vector<GroupDistances> groups;
            for (std::size_t i = 0; i < distances.size(); ++i) {
                GroupKey key;
                key.domain = "group" + std::to_string(i);
                groups.push_back({key, 0, distances[i]});
            }
            return ShiftScores(groups, tau);
        },
        py::arg("distances"), py::arg("tau") = 2.0);

    py::class_<SplitSpec>(m, "SplitSpec")
        .def_readonly("held_out_domain", &SplitSpec::held_out_domain)
        .def_readonly("train_ids", &SplitSpec::train_ids)
        .def_readonly("val_ids", &SplitSpec::val_ids)
        .def_readonly("test_ids", &SplitSpec::test_ids)
        .def_readonly("val_fraction", &SplitSpec::val_fraction)
        .def_readonly("seed", &SplitSpec::seed);
    m.def("build_lodo_split", &BuildLodoSplit, py::arg("manifest"), py::arg("held_out_domain"),
          py::arg("val_fraction") = 0.24, py::arg("seed") = 0);
    m.def("build_all_lodo_splits", &BuildAllLodoSplits, py::arg("manifest"), py::arg("val_fraction") = 0.24,
          py::arg("seed") = 0);

    m.def(
        "generate_synthetic",
        [](std::size_t n_domains, std::size_t n_classes, std::size_t samples_per_cell, std::size_t feature_dim,
           double class_separation, double noise_scale, std::vector<std::vector<double>> domain_offsets,
           std::uint64_t seed) {
            SyntheticSpec spec{n_domains, n_classes, samples_per_cell, feature_dim, class_separation,
                               std::move(domain_offsets), noise_scale, std::nullopt};
            SyntheticDataset ds = Generate(spec, seed);
            return py::make_tuple(ds.manifest, FeaturesToArray(ds.features));
        },
        py::arg("n_domains"), py::arg("n_classes"), py::arg("samples_per_cell"), py::arg("feature_dim"),
        py::arg("class_separation") = 4.0, py::arg("noise_scale") = 1.0,
        py::arg("domain_offsets") = std::vector<std::vector<double>>{}, py::arg("seed") = 0,
        "Returns (Manifest, (N, 1, D) float32 features).");

    m.def(
        "ova_bce_loss",
        [](const Matrix& logits, const Matrix& targets) {
            LossResult r = OvaBceLoss(logits, targets);
            return py::make_tuple(r.loss, r.grad_logits);
        },
        py::arg("logits"), py::arg("targets"));
    m.def("predict", &Predict, py::arg("logits"));
    m.def(
        "parameter_count",
        [](std::size_t input_dim, std::size_t hidden1, std::size_t hidden2, std::size_t n_classes) {
            return MlpParams::Zeros({input_dim, hidden1, hidden2, n_classes}).ParameterCount();
        },
        py::arg("input_dim") = 6912, py::arg("hidden1") = 4096, py::arg("hidden2") = 512,
        py::arg("n_classes") = 9);
    m.def("uniform_random_baseline", &UniformRandomBaseline, py::arg("n_classes"));

    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return Spearman(x, y); },
          py::arg("x"), py::arg("y"));
    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return Pearson(x, y); },
          py::arg("x"), py::arg("y"));
    m.def("check_fixtures", [] {
        py::list rows;
        for (const auto& r : CheckScoreConsistency(PublishedFixture())) {
            rows.append(py::make_tuple(r.domain, r.recomputed, r.published, r.pass));
        }
        return rows;
    });
    m.def("fixture_spearman", [] {
        return CorrelateShiftAccuracy(FixtureShiftReport(), FixtureAccuracies()).spearman;
    });

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::Run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one driftbench subcommand; returns (exit_code, stdout, stderr).");
}
