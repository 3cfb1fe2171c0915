#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

using namespace pstrat;
using namespace pstrat::testing;

namespace {

Dataset full_design() {
    std::vector<LevelCells> lv(4, LevelCells{5, 3, 2, 1, 4, 2, 3, 2});
    return dataset_from_cells(lv);
}

bool has_flag(const std::vector<std::string>& v, const std::string& text) {
    return std::find(v.begin(), v.end(), text) != v.end();
}

} // namespace

TEST(Dataset, RejectsMalformedRecordsWithIdentity) {
    std::vector<SubjectRecord> recs{binary_record(0, 0, 0, 1, "a"), binary_record(2, 0, 0, 1, "bad")};
    try {
        Dataset d(recs, 1);
        FAIL() << "expected MalformedRecord";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MalformedRecord);
        EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
    }
    EXPECT_THROW(Dataset({binary_record(0, 3, 0, 1)}, 3), Error);
    EXPECT_THROW(Dataset({binary_record(0, 0, 0, 2)}, 1), Error);
    EXPECT_THROW(Dataset({survival_record(0, 0, 0, -1.0, 1)}, 1, 1.0), Error);
}

TEST(Dataset, MixedOutcomeKindsRejected) {
    std::vector<SubjectRecord> recs{binary_record(0, 0, 0, 1), survival_record(1, 0, 0, 2.0, 1)};
    EXPECT_THROW(Dataset(recs, 1, 1.0), Error);
}

TEST(Dataset, SurvivalRequiresHorizon) {
    try {
        Dataset d({survival_record(0, 0, 0, 2.0, 1)}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    }
    EXPECT_THROW(Dataset({binary_record(0, 0, 0, 1)}, 1, 3.0), Error);
    EXPECT_THROW(Dataset({}, 1), Error);
}

TEST(Validate, FullyPopulatedDesignHasNoFlags) {
    const auto rep = validate(full_design());
    EXPECT_TRUE(rep.ok());
    EXPECT_TRUE(rep.flags.empty());
    EXPECT_TRUE(rep.warnings.empty());
    ASSERT_EQ(rep.levels.size(), 4u);
    EXPECT_EQ(rep.levels[2].arm_counts[0], 7);
    EXPECT_EQ(rep.levels[2].arm_counts[1], 7);
}

TEST(Validate, MissingControlLevelIsFlagged) {
    std::vector<LevelCells> lv(4, LevelCells{5, 3, 2, 1, 4, 2, 3, 2});
    lv[2].n00 = lv[2].n01 = 0;
    lv[2].y00 = lv[2].y01 = 0;
    const auto rep = validate(dataset_from_cells(lv));
    EXPECT_FALSE(rep.ok());
    EXPECT_TRUE(has_flag(rep.flags, "empty cell (z=0, x=2)"));
}

TEST(Validate, EmptyControlNonResponderCellIsFlagged) {
    std::vector<LevelCells> lv(3, LevelCells{5, 3, 2, 1, 4, 2, 3, 2});
    lv[1].n00 = lv[1].y00 = 0;
    const auto rep = validate(dataset_from_cells(lv));
    EXPECT_TRUE(has_flag(rep.flags, "empty cell (z=0, s=0, x=1)"));
}

TEST(Validate, MonotonicityViolationWarns) {
    // x=3: control 2/10 responders, treatment 1/10.
    std::vector<LevelCells> lv(4, LevelCells{5, 3, 2, 1, 4, 2, 3, 2});
    lv[3] = LevelCells{8, 4, 2, 1, 9, 5, 1, 1};
    const auto rep = validate(dataset_from_cells(lv));
    EXPECT_TRUE(rep.ok());
    EXPECT_DOUBLE_EQ(rep.levels[3].q0, 0.2);
    EXPECT_DOUBLE_EQ(rep.levels[3].q1, 0.1);
    ASSERT_EQ(rep.warnings.size(), 1u);
    EXPECT_NE(rep.warnings[0].find("x=3"), std::string::npos);
}

TEST(Tabulate, SingleRecordPerCell) {
    Dataset d({binary_record(0, 0, 0, 1), binary_record(0, 0, 1, 0), binary_record(1, 0, 0, 1), binary_record(1, 0, 1, 1)},
              1);
    const CountTable t = tabulate(d);
    for (int z = 0; z < 2; ++z)
        for (int s = 0; s < 2; ++s) EXPECT_EQ(t.count(z, s, 0), 1);
    EXPECT_EQ(t.total(), 4);
}

TEST(Tabulate, EmptyLevelGivesZeroCounts) {
    Dataset d({binary_record(0, 0, 0, 1), binary_record(1, 0, 1, 1)}, 3);
    const CountTable t = tabulate(d);
    EXPECT_EQ(t.level_total(1), 0);
    EXPECT_EQ(t.level_total(2), 0);
    EXPECT_EQ(t.total(), 2);
}

TEST(Tabulate, SumsReconcileAndIgnoreOrder) {
    Rng rng(11);
    const auto sim = simulate_dataset(preset("setting1", 1000), rng);
    const CountTable t = tabulate(sim.observed);
    EXPECT_EQ(t.total(), 1000);

    auto recs = sim.observed.records();
    std::mt19937 shuffler(5);
    std::shuffle(recs.begin(), recs.end(), shuffler);
    const CountTable u = tabulate(sim.observed.with_records(recs));
    for (int x = 0; x < 4; ++x)
        for (int z = 0; z < 2; ++z)
            for (int s = 0; s < 2; ++s) {
                EXPECT_EQ(t.count(z, s, x), u.count(z, s, x));
                EXPECT_EQ(t.successes(z, s, x), u.successes(z, s, x));
            }
}
