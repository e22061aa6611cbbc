#include <gtest/gtest.h>

#include <sstream>

#include "microhd/tsetlin.hpp"

using namespace microhd;

namespace {

TMConfig small_config(std::uint32_t features, std::uint32_t clauses) {
    TMConfig c;
    c.n_features = features;
    c.n_clauses = clauses;
    c.ta_states = 16;
    c.threshold = 16;
    c.specificity = 3.0;
    return c;
}

BitVector bits(std::initializer_list<int> values) {
    BitVector b(values.size());
    std::size_t i = 0;
    for (int v : values) b.set(i++, v != 0);
    return b;
}

// Class = number of set bits among the first four inputs; the rest is noise.
std::pair<std::vector<BitVector>, std::vector<std::uint32_t>> count_rule(std::size_t n, std::uint32_t width, Rng& rng) {
    std::vector<BitVector> xs;
    std::vector<std::uint32_t> ys;
    for (std::size_t i = 0; i < n; ++i) {
        BitVector x(width);
        std::uint32_t c = 0;
        for (std::uint32_t b = 0; b < width; ++b) {
            const bool on = bernoulli(rng, 0.5);
            x.set(b, on);
            if (b < 4 && on) ++c;
        }
        xs.push_back(x);
        ys.push_back(c);
    }
    return {xs, ys};
}

void expect_invariants(const TsetlinMachine& tm) {
    const auto& c = tm.config();
    for (std::size_t j = 0; j < c.n_clauses; ++j) {
        EXPECT_LE(tm.included(j).size(), c.max_literals);
        for (std::uint32_t l = 0; l < c.n_literals(); ++l) {
            const auto st = tm.ta_state(j, l);
            ASSERT_GE(st, 1);
            ASSERT_LE(st, 2 * c.ta_states);
        }
    }
}

}  // namespace

TEST(Tsetlin, ClauseEvaluation) {
    TsetlinMachine tm(small_config(2, 2));
    const auto ta = tm.config().ta_states;
    tm.set_ta_state(0, 0, static_cast<std::uint16_t>(ta + 1));  // x0
    EXPECT_TRUE(tm.clause_output(0, bits({1, 0})));
    EXPECT_FALSE(tm.clause_output(0, bits({0, 0})));
    tm.set_ta_state(0, 2 + 1, static_cast<std::uint16_t>(ta + 1));  // not x1
    EXPECT_FALSE(tm.clause_output(0, bits({1, 1})));
    EXPECT_TRUE(tm.clause_output(0, bits({1, 0})));
    // Clause 1 is empty: 0 at inference, 1 while training.
    EXPECT_FALSE(tm.clause_output(1, bits({1, 1})));
    EXPECT_TRUE(tm.clause_output(1, bits({1, 1}), true));
}

TEST(Tsetlin, PredictFromWeights) {
    TsetlinMachine tm(small_config(2, 1));
    for (std::uint32_t c = 0; c < 5; ++c) tm.set_weight(c, 0, 0);
    EXPECT_EQ(tm.predict(bits({1, 0})), 2u);  // all scores zero
    tm.set_ta_state(0, 0, static_cast<std::uint16_t>(tm.config().ta_states + 1));
    tm.set_weight(4, 0, 3);
    EXPECT_EQ(tm.predict(bits({1, 0})), 4u);
    EXPECT_EQ(tm.scores(bits({1, 0}))[4], 3);
    // Clause silent: back to the neutral tie.
    EXPECT_EQ(tm.predict(bits({0, 0})), 2u);
    // Ties between non-neutral classes go to the lowest index.
    tm.set_weight(1, 0, 3);
    EXPECT_EQ(tm.predict(bits({1, 0})), 1u);
}

TEST(Tsetlin, FreshPoolIsNeutral) {
    TsetlinMachine tm(small_config(8, 16));
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        BitVector x(8);
        for (int b = 0; b < 8; ++b) x.set(b, bernoulli(rng, 0.5));
        EXPECT_EQ(tm.predict(x), 2u);
    }
}

TEST(Tsetlin, SingleClauseLearnsLiteral) {
    TsetlinMachine tm(small_config(4, 1));
    tm.set_weight(4, 0, 1);
    Rng rng(3);
    const auto x = bits({1, 0, 0, 0});
    for (int i = 0; i < 100; ++i) tm.fit_one(x, 4, rng);
    const auto inc = tm.included(0);
    EXPECT_NE(std::find(inc.begin(), inc.end(), 0U), inc.end());
    EXPECT_GT(tm.weight(4, 0), 0);
}

TEST(Tsetlin, SaturatedVoteLeavesPoolUnchanged) {
    auto cfg = small_config(4, 1);
    TsetlinMachine tm(cfg);
    for (std::uint32_t c = 0; c < 5; ++c) tm.set_weight(c, 0, c == 4 ? cfg.threshold : -cfg.threshold);
    const TsetlinMachine before = tm;
    Rng rng(4);
    for (int i = 0; i < 200; ++i) tm.fit_one(bits({1, 0, 1, 0}), 4, rng);
    EXPECT_TRUE(tm == before);
}

TEST(Tsetlin, LiteralBudgetHolds) {
    auto cfg = small_config(6, 8);
    cfg.max_literals = 2;
    TsetlinMachine tm(cfg);
    // Class 4 needs x0 & x1 & x2; everything else is class 0.
    Rng data(5);
    std::vector<BitVector> xs;
    std::vector<std::uint32_t> ys;
    for (int i = 0; i < 400; ++i) {
        BitVector x(6);
        for (int b = 0; b < 6; ++b) x.set(b, bernoulli(data, 0.7));
        ys.push_back(x.test(0) && x.test(1) && x.test(2) ? 4 : 0);
        xs.push_back(x);
    }
    const auto r = tm.train(xs, ys, 20);
    EXPECT_LE(r.max_included, 2u);
    expect_invariants(tm);
    EXPECT_THROW(
        {
            tm.set_ta_state(0, 3, static_cast<std::uint16_t>(cfg.ta_states + 1));
            tm.set_ta_state(0, 4, static_cast<std::uint16_t>(cfg.ta_states + 1));
            tm.set_ta_state(0, 5, static_cast<std::uint16_t>(cfg.ta_states + 1));
        },
        Error);
}

TEST(Tsetlin, RepeatedSampleLearnedInOneEpoch) {
    TsetlinMachine tm(small_config(8, 16));
    const auto x = bits({1, 1, 0, 0, 1, 0, 1, 0});
    std::vector<BitVector> xs(50, x);
    std::vector<std::uint32_t> ys(50, 3);
    const auto r = tm.train(xs, ys, 1);
    EXPECT_EQ(r.epochs_run, 1u);
    EXPECT_EQ(r.final_accuracy, 1.0);
}

TEST(Tsetlin, LearnsNoiseFreeRule) {
    // class = x0 + x1 + 2 (x2 & x3) over 12 bits, default machine settings.
    Rng rng(6);
    auto draw = [&](std::size_t n) {
        std::vector<BitVector> xs;
        std::vector<std::uint32_t> ys;
        for (std::size_t i = 0; i < n; ++i) {
            BitVector x(12);
            for (std::uint32_t b = 0; b < 12; ++b) x.set(b, bernoulli(rng, 0.5));
            ys.push_back(x.test(0) + x.test(1) + 2 * (x.test(2) && x.test(3)));
            xs.push_back(x);
        }
        return std::pair{xs, ys};
    };
    auto [xs, ys] = draw(1500);
    auto [xt, yt] = draw(300);
    TMConfig cfg;
    cfg.n_features = 12;
    TsetlinMachine tm(cfg);
    const auto r = tm.train(xs, ys, 40);
    EXPECT_EQ(r.epoch_accuracy.size(), 40u);
    EXPECT_EQ(tm.accuracy(xt, yt), 1.0);
    expect_invariants(tm);
}

TEST(Tsetlin, TrainingIsDeterministic) {
    Rng rng(7);
    auto [xs, ys] = count_rule(300, 10, rng);
    TsetlinMachine a(small_config(10, 32)), b(small_config(10, 32));
    const auto ra = a.train(xs, ys, 5);
    const auto rb = b.train(xs, ys, 5);
    EXPECT_TRUE(a == b);
    EXPECT_EQ(ra.epoch_accuracy, rb.epoch_accuracy);
    auto cfg = small_config(10, 32);
    cfg.seed = 43;
    TsetlinMachine c(cfg);
    (void)c.train(xs, ys, 5);
    EXPECT_FALSE(a == c);
}

TEST(Tsetlin, EpochHookCanStop) {
    Rng rng(8);
    auto [xs, ys] = count_rule(100, 10, rng);
    TsetlinMachine tm(small_config(10, 16));
    std::vector<std::uint32_t> seen;
    const auto r = tm.train(xs, ys, 10, 2.0, [&](std::uint32_t e, const TsetlinMachine&) {
        seen.push_back(e);
        return e < 3;
    });
    EXPECT_EQ(seen, (std::vector<std::uint32_t>{1, 2, 3}));
    EXPECT_EQ(r.epochs_run, 3u);
}

TEST(Tsetlin, InputChecks) {
    TsetlinMachine tm(small_config(4, 2));
    Rng rng(9);
    EXPECT_THROW(tm.fit_one(bits({1, 0, 0, 0}), 5, rng), Error);
    EXPECT_THROW((void)tm.predict(bits({1, 0})), Error);
    std::vector<BitVector> xs{bits({1, 0, 0, 0})};
    std::vector<std::uint32_t> ys{7};
    EXPECT_THROW((void)tm.train(xs, ys, 1), Error);
    auto bad = small_config(4, 2);
    bad.specificity = 1.0;
    EXPECT_THROW(TsetlinMachine{bad}, Error);
}

TEST(Tsetlin, PoolRoundTrip) {
    Rng rng(10);
    auto [xs, ys] = count_rule(200, 10, rng);
    TsetlinMachine tm(small_config(10, 24));
    (void)tm.train(xs, ys, 3);
    std::stringstream buf;
    tm.save(buf);
    const auto back = TsetlinMachine::load(buf);
    EXPECT_TRUE(back == tm);
    std::stringstream a, b;
    tm.save(a);
    back.save(b);
    EXPECT_EQ(a.str(), b.str());
    std::stringstream junk("not a pool");
    EXPECT_THROW((void)TsetlinMachine::load(junk), Error);
}
