#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "driftbench/splits.hpp"
#include "driftbench/synth.hpp"
#include "error_matchers.hpp"
#include "split_checks.hpp"
#include "temp_dir.hpp"

namespace driftbench {
namespace {

using testing::KindOf;
using testing::SplitViolations;

Manifest SmallManifest() {
    return MakeManifest({{"a1", "A", "x", 0}, {"a2", "A", "x", 1}, {"a3", "A", "x", 2}, {"a4", "A", "x", 3},
                         {"b1", "B", "x", 4}, {"b2", "B", "x", 5}});
}

Manifest SyntheticManifest(std::size_t domains = 3) {
    SyntheticSpec spec;
    spec.n_domains = domains;
    spec.n_classes = 4;
    spec.samples_per_cell = 13;
    return Generate(spec, 1).manifest;
}

std::set<std::string> AsSet(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

TEST(Lodo, CountsForTwoDomains) {
    const SplitSpec s = BuildLodoSplit(SmallManifest(), "B", 0.25, 0);
    EXPECT_EQ(s.test_ids, (std::vector<std::string>{"b1", "b2"}));
    EXPECT_EQ(s.val_ids.size(), 1u);
    EXPECT_EQ(s.train_ids.size(), 3u);
    EXPECT_TRUE(SplitViolations(SmallManifest(), s).empty());
}

TEST(Lodo, ZeroValFraction) {
    const SplitSpec s = BuildLodoSplit(SmallManifest(), "A", 0.0, 0);
    EXPECT_TRUE(s.val_ids.empty());
    EXPECT_EQ(s.train_ids, (std::vector<std::string>{"b1", "b2"}));
}

TEST(Lodo, InvalidArguments) {
    EXPECT_EQ(KindOf([] { BuildLodoSplit(SmallManifest(), "C", 0.2, 0); }), ErrorKind::kUnknownDomain);
    EXPECT_EQ(KindOf([] { BuildLodoSplit(SmallManifest(), "A", 1.0, 0); }), ErrorKind::kInvalidArgument);
    EXPECT_EQ(KindOf([] { BuildLodoSplit(SmallManifest(), "A", -0.1, 0); }), ErrorKind::kInvalidArgument);
    const Manifest one = MakeManifest({{"a", "A", "x", 0}});
    EXPECT_EQ(KindOf([&] { BuildLodoSplit(one, "A", 0.2, 0); }), ErrorKind::kTooFewGroups);
}

TEST(Lodo, AllSplitsPartitionTheDataset) {
    const Manifest m = SyntheticManifest();
    const auto splits = BuildAllLodoSplits(m, 0.24, 5);
    ASSERT_EQ(splits.size(), 3u);
    std::multiset<std::string> tests;
    for (const auto& s : splits) tests.insert(s.test_ids.begin(), s.test_ids.end());
    EXPECT_EQ(tests.size(), m.records.size());
    EXPECT_EQ(std::set<std::string>(tests.begin(), tests.end()).size(), m.records.size());
}

TEST(Lodo, EightDomainsGiveEightSplits) {
    EXPECT_EQ(BuildAllLodoSplits(SyntheticManifest(8), 0.24, 0).size(), 8u);
}

TEST(Lodo, EverySplitPassesIntegrityChecks) {
    const Manifest m = SyntheticManifest(4);
    for (double frac : {0.0, 0.1, 0.24, 0.5, 0.9}) {
        for (const auto& s : BuildAllLodoSplits(m, frac, 17)) {
            const auto problems = SplitViolations(m, s);
            EXPECT_TRUE(problems.empty()) << s.held_out_domain << " frac " << frac << ": " << problems.front();
        }
    }
}

TEST(Lodo, SameSeedSameLists) {
    const Manifest m = SyntheticManifest();
    EXPECT_EQ(BuildLodoSplit(m, "domain1", 0.24, 3), BuildLodoSplit(m, "domain1", 0.24, 3));
}

TEST(Lodo, SeedOnlyMovesClipsBetweenTrainAndVal) {
    const Manifest m = SyntheticManifest();
    const SplitSpec a = BuildLodoSplit(m, "domain0", 0.24, 1);
    const SplitSpec b = BuildLodoSplit(m, "domain0", 0.24, 2);
    EXPECT_EQ(a.test_ids, b.test_ids);
    EXPECT_EQ(a.val_ids.size(), b.val_ids.size());
    EXPECT_NE(a.val_ids, b.val_ids);
    auto source_a = AsSet(a.train_ids);
    source_a.merge(AsSet(a.val_ids));
    auto source_b = AsSet(b.train_ids);
    source_b.merge(AsSet(b.val_ids));
    EXPECT_EQ(source_a, source_b);
}

TEST(Lodo, IdsFollowManifestOrder) {
    const Manifest m = SyntheticManifest();
    const SplitSpec s = BuildLodoSplit(m, "domain2", 0.3, 4);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < m.records.size(); ++i) pos[m.records[i].clip_id] = i;
    for (const auto* ids : {&s.train_ids, &s.val_ids, &s.test_ids}) {
        EXPECT_TRUE(std::is_sorted(ids->begin(), ids->end(),
                                   [&](const auto& x, const auto& y) { return pos[x] < pos[y]; }));
    }
}

TEST(SplitFile, RoundTrip) {
    testing::TempDir dir;
    const Manifest m = SyntheticManifest();
    SplitSpec s = BuildLodoSplit(m, "domain1", 0.24, 9);
    WriteSplitFile(dir / "s.jsonl", s);
    const SplitSpec back = ReadSplitFile(dir / "s.jsonl", &m);
    EXPECT_EQ(back.held_out_domain, "domain1");
    EXPECT_EQ(back.train_ids, s.train_ids);
    EXPECT_EQ(back.val_ids, s.val_ids);
    EXPECT_EQ(back.test_ids, s.test_ids);

    testing::WriteFile(dir / "bad.jsonl", R"({"clip_id":"a","role":"holdout"})" "\n");
    EXPECT_EQ(KindOf([&] { ReadSplitFile(dir / "bad.jsonl"); }), ErrorKind::kParse);
}

}  // namespace
}  // namespace driftbench
