#include <gtest/gtest.h>

#include <cmath>

#include "jsq/statespace.hpp"
#include "oracles.hpp"

using namespace jsq;

TEST(Enumerate, SmallCases) {
    auto idx = BackgroundIndex::enumerate(2, 1);
    ASSERT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx.label(0), "(0,0)");
    EXPECT_EQ(idx.label(1), "(0,1)");
    EXPECT_EQ(idx.label(2), "(1,0)");
    EXPECT_EQ(BackgroundIndex::enumerate(2, 3).size(), 7u);
    EXPECT_EQ(BackgroundIndex::enumerate(3, 2).size(), 19u);
}

TEST(Enumerate, MatchesBruteForce) {
    for (int k = 2; k <= 4; ++k) {
        for (int D = 1; D <= 6; ++D) {
            auto idx = BackgroundIndex::enumerate(k, D);
            auto ref = oracle::brute_force_H(k, D);
            ASSERT_EQ(idx.size(), ref.size()) << "k=" << k << " D=" << D;
            auto formula = static_cast<std::size_t>(std::pow(D + 1, k) - std::pow(D, k));
            EXPECT_EQ(idx.size(), formula);
            for (std::size_t i = 0; i < ref.size(); ++i) {
                auto h = idx.state(i);
                EXPECT_TRUE(std::equal(h.begin(), h.end(), ref[i].begin())) << "lexicographic order";
                EXPECT_EQ(idx.index_of(ref[i]), i);
            }
        }
    }
}

TEST(Enumerate, FaceConsistency) {
    auto idx = BackgroundIndex::enumerate(3, 4);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto h = idx.state(i);
        auto f = idx.face(i);
        EXPECT_GT(f.size(), 0);
        for (int j = 0; j < 3; ++j) EXPECT_EQ(f.contains(j), h[static_cast<std::size_t>(j)] == 0);
    }
}

TEST(Enumerate, InteriorMask) {
    auto idx = BackgroundIndex::enumerate(2, 3);
    // (0,3): the shortest-queue service gives (0,4)
    EXPECT_FALSE(idx.interior(idx.index_of(std::vector<int>{0, 3})));
    EXPECT_TRUE(idx.interior(idx.index_of(std::vector<int>{0, 2})));
    // (0,0) moves to (1,0) or (0,1)
    EXPECT_TRUE(idx.interior(idx.index_of(std::vector<int>{0, 0})));
    auto idx3 = BackgroundIndex::enumerate(3, 2);
    EXPECT_FALSE(idx3.interior(idx3.index_of(std::vector<int>{0, 0, 2})));
    EXPECT_TRUE(idx3.interior(idx3.index_of(std::vector<int>{0, 1, 1})));
}

TEST(Enumerate, Errors) {
    EXPECT_THROW(BackgroundIndex::enumerate(1, 3), InvalidParameter);
    EXPECT_THROW(BackgroundIndex::enumerate(2, 0), InvalidParameter);
    EXPECT_THROW(BackgroundIndex::enumerate(8, 20), SizeLimitExceeded);
    EXPECT_THROW(BackgroundIndex::enumerate(3, 10, 1000), SizeLimitExceeded);
    auto idx = BackgroundIndex::enumerate(2, 3);
    EXPECT_THROW(idx.index_of(std::vector<int>{1, 2}), InvalidState);
    EXPECT_THROW(idx.index_of(std::vector<int>{0, 4}), InvalidState);
    EXPECT_FALSE(idx.find(std::vector<int>{0, 0, 0}).has_value());
}

TEST(FaceOf, Examples) {
    EXPECT_EQ(face_of(std::vector<int>{0, 0}).mask, 0b11u);
    EXPECT_EQ(face_of(std::vector<int>{0, 3}).mask, 0b01u);
    EXPECT_EQ(face_of(std::vector<int>{0, 2, 0}).mask, 0b101u);
    EXPECT_THROW(face_of(std::vector<int>{1, 2}), InvalidState);
    EXPECT_THROW(face_of(std::vector<int>{0, -1}), InvalidState);
    EXPECT_EQ(face_members(0b101u, 3), (std::vector<int>{0, 2}));
    EXPECT_EQ(all_faces(3).size(), 7u);
}
