#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "microhd/encoder.hpp"

using namespace microhd;

namespace {

FeatureVector random_features(Rng& rng, std::size_t L = 5) {
    FeatureVector f;
    std::vector<double> w(2 * L);
    double total = 0.0;
    for (auto& x : w) total += (x = 1.0 + static_cast<double>(uniform_below(rng, 50)));
    for (std::size_t i = 0; i < L; ++i) {
        f.p_bid.push_back(w[i] / total);
        f.p_ask.push_back(w[L + i] / total);
    }
    f.spread = 1 + static_cast<Ticks>(uniform_below(rng, 4));
    f.delta_m.half_ticks = static_cast<std::int64_t>(uniform_below(rng, 5)) - 2;
    f.g_star = (static_cast<double>(uniform_below(rng, 9)) - 4.0) / 8.0;
    return f;
}

}  // namespace

TEST(Encoder, QuantizeExamples) {
    EXPECT_EQ(quantize_unit(0.0, 16), 0u);
    EXPECT_EQ(quantize_unit(1.0, 16), 15u);
    EXPECT_EQ(quantize_unit(0.25, 16), 4u);
    EXPECT_EQ(quantize_unit(0.2499, 16), 3u);
    EXPECT_THROW((void)quantize_unit(1.01, 16), Error);
    EXPECT_THROW((void)quantize_unit(-0.1, 16), Error);
}

TEST(Encoder, HalfTickSymbols) {
    EXPECT_EQ(half_tick_symbol(0.0), 0);
    EXPECT_EQ(half_tick_symbol(0.25), 1);
    EXPECT_EQ(half_tick_symbol(-0.25), -1);
    EXPECT_EQ(half_tick_symbol(0.74), 1);
    EXPECT_EQ(half_tick_symbol(1.0), 2);
}

TEST(Encoder, Deterministic) {
    Rng rng(1);
    const auto f = random_features(rng);
    const Encoder a, b;
    EXPECT_EQ(a.encode(f), b.encode(f));
    SparseHypervector out(a.shape());
    a.encode_into(f, out);
    EXPECT_EQ(out, a.encode(f));
    EXPECT_TRUE(out.full());
}

TEST(Encoder, MirroredBookIsDistinct) {
    // Heavy-tailed sizes so the two sides usually quantize differently. A book
    // whose sides agree after quantization encodes onto its own mirror.
    Rng rng(2);
    const Encoder enc;
    int compared = 0;
    double total = 0.0;
    for (int k = 0; k < 2000; ++k) {
        FeatureVector f;
        std::vector<double> w(10);
        double sum = 0.0;
        for (auto& x : w) {
            const double u = uniform01(rng);
            sum += (x = 1.0 + 400.0 * u * u * u);
        }
        for (std::size_t i = 0; i < 5; ++i) {
            f.p_bid.push_back(w[i] / sum);
            f.p_ask.push_back(w[5 + i] / sum);
        }
        f.spread = 1 + static_cast<Ticks>(uniform_below(rng, 4));
        f.delta_m.half_ticks = static_cast<std::int64_t>(uniform_below(rng, 5)) - 2;
        f.g_star = (static_cast<double>(uniform_below(rng, 9)) - 4.0) / 8.0;
        int differing = 0;
        for (std::size_t i = 0; i < 5; ++i) differing += quantize_unit(f.p_bid[i], 16) != quantize_unit(f.p_ask[i], 16);
        if (differing < 3) continue;
        const double s = similarity(enc.encode(f), enc.encode(f.mirrored()));
        EXPECT_LT(s, 0.5);
        total += s;
        ++compared;
    }
    ASSERT_GT(compared, 1000);
    EXPECT_LT(total / compared, 0.25);
}

TEST(Encoder, OneLevelChangeStaysClose) {
    Rng rng(3);
    const Encoder enc;
    std::vector<double> random_pairs;
    for (int k = 0; k < 400; ++k) random_pairs.push_back(similarity(enc.encode(random_features(rng)), enc.encode(random_features(rng))));
    double mean = 0.0, var = 0.0;
    for (double s : random_pairs) mean += s;
    mean /= static_cast<double>(random_pairs.size());
    for (double s : random_pairs) var += (s - mean) * (s - mean);
    const double sd = std::sqrt(var / static_cast<double>(random_pairs.size() - 1));
    for (int k = 0; k < 200; ++k) {
        auto f = random_features(rng);
        auto g = f;
        const auto q = quantize_unit(f.p_bid[2], 16);
        g.p_bid[2] = q < 15 ? (q + 1.5) / 16.0 : (q - 0.5) / 16.0;
        ASSERT_EQ(std::abs(static_cast<int>(quantize_unit(g.p_bid[2], 16)) - static_cast<int>(q)), 1);
        EXPECT_GT(similarity(enc.encode(f), enc.encode(g)), mean + 5.0 * sd);
    }
}

TEST(Encoder, RankKeysSeparateEqualShares) {
    const Encoder enc;
    const double sigma = std::sqrt((1.0 / 32) * (31.0 / 32) / 256);
    for (std::uint32_t q = 0; q < 16; q += 5) {
        const auto& level = enc.codebook().get(SymbolDomain::unit_level, q);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = i + 1; j < 10; ++j)
                EXPECT_NEAR(similarity(bind(enc.rank_key(i), level), bind(enc.rank_key(j), level)), 1.0 / 32,
                            4.0 * sigma);
    }
}

TEST(Encoder, InjectiveOnQuantizedTuples) {
    Rng rng(4);
    const Encoder enc;
    std::set<std::vector<std::uint32_t>> tuples;
    std::set<std::vector<SparseHypervector::Index>> codes;
    for (int k = 0; k < 20000; ++k) {
        FeatureVector f;
        std::vector<std::uint32_t> t;
        for (int i = 0; i < 10; ++i) t.push_back(static_cast<std::uint32_t>(uniform_below(rng, 16)));
        for (int i = 0; i < 5; ++i) {
            f.p_bid.push_back((t[i] + 0.5) / 16.0);
            f.p_ask.push_back((t[5 + i] + 0.5) / 16.0);
        }
        f.spread = 1 + static_cast<Ticks>(uniform_below(rng, 5));
        f.delta_m.half_ticks = static_cast<std::int64_t>(uniform_below(rng, 9)) - 4;
        f.g_star = (static_cast<double>(uniform_below(rng, 9)) - 4.0) / 2.0;
        t.push_back(static_cast<std::uint32_t>(f.spread));
        t.push_back(static_cast<std::uint32_t>(f.delta_m.half_ticks + 4));
        t.push_back(static_cast<std::uint32_t>(half_tick_symbol(f.g_star) + 8));
        if (!tuples.insert(t).second) continue;
        const auto hv = enc.encode(f);
        codes.insert(std::vector(hv.indices().begin(), hv.indices().end()));
    }
    EXPECT_EQ(codes.size(), tuples.size());
}

TEST(Encoder, VocabularyClampIsCounted) {
    Rng rng(5);
    const Encoder enc;
    auto f = random_features(rng);
    EncodeStats stats;
    (void)enc.encode(f, &stats);
    EXPECT_EQ(stats.clamped, 0u);
    f.spread = 40;
    f.g_star = -30.0;
    (void)enc.encode(f, &stats);
    EXPECT_EQ(stats.clamped, 2u);
}

TEST(Encoder, DepthMismatch) {
    Rng rng(6);
    EXPECT_THROW((void)Encoder().encode(random_features(rng, 3)), Error);
}

TEST(Encoder, LiteralArrayExample) {
    const SparseHypervector hv(4, {1, 3});
    const auto bits = to_literal_array(hv);
    ASSERT_EQ(bits.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(bits.test(i), i == 1 || i == 7) << i;
}

TEST(Encoder, LiteralArrayRoundTrip) {
    Rng rng(7);
    const Encoder enc;
    for (int k = 0; k < 100; ++k) {
        const auto hv = enc.encode(random_features(rng));
        const auto bits = to_literal_array(hv);
        EXPECT_EQ(bits.count(), 256u);
        EXPECT_EQ(from_literal_array(bits, hv.shape()), hv);
    }
    BitVector two(8);
    two.set(0);
    two.set(1);
    EXPECT_THROW((void)from_literal_array(two, {2, 4}), Error);
}
