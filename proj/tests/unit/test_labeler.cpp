#include <gtest/gtest.h>

#include <sstream>

#include "microhd/labeler.hpp"
#include "microhd/synth.hpp"

using namespace microhd;

namespace {

std::vector<TradePrint> prints_of(const std::vector<std::int64_t>& sizes, double price = 100.0) {
    std::vector<TradePrint> out;
    for (std::size_t i = 0; i < sizes.size(); ++i) out.push_back({static_cast<std::int64_t>(10 * (i + 1)), price, sizes[i]});
    return out;
}

std::vector<TradePrint> synthetic_prints(std::uint64_t seed) {
    SynthParams sp;
    sp.n_events = 20000;
    sp.trade_rate = 0.05;
    std::vector<TradePrint> out;
    for (const auto& e : synth_generate(sp, seed))
        if (e.action == Action::trade) out.push_back({e.ts_ns, static_cast<double>(e.price), e.size});
    return out;
}

LabeledSample sample() {
    LabeledSample s;
    s.ts_ns = 5;
    s.features = FeatureVector{{0.25, 0.125}, {0.5, 0.125}, 2, MidDelta{1}, 0.25};
    s.microprice = 101.25;
    s.future_close = 103.0;
    s.future_ts = 9;
    s.raw_delta = 2;
    s.label = 4;
    return s;
}

}  // namespace

TEST(Labeler, VolumeBarExample) {
    const auto bars = build_bars(prints_of({3, 4, 5}), {BarKind::volume, 10.0, false}, 0.01);
    ASSERT_EQ(bars.size(), 1u);
    EXPECT_EQ(bars[0].last_print, 2u);
    EXPECT_EQ(bars[0].volume, 12);
    EXPECT_TRUE(bars[0].complete);
}

TEST(Labeler, TickBarExample) {
    const auto bars = build_bars(prints_of({1, 1, 1, 1, 1}), {BarKind::tick, 2.0, false}, 0.01);
    ASSERT_EQ(bars.size(), 2u);
    EXPECT_EQ(bars[0].last_print, 1u);
    EXPECT_EQ(bars[1].last_print, 3u);
    EXPECT_EQ(bars[1].first_print, 2u);
}

TEST(Labeler, PartialBarIsFlagged) {
    const auto bars = build_bars(prints_of({1, 1, 1, 1, 1}), {BarKind::tick, 2.0, true}, 0.01);
    ASSERT_EQ(bars.size(), 3u);
    EXPECT_FALSE(bars[2].complete);
    EXPECT_EQ(bars[2].last_print, 4u);
}

TEST(Labeler, DollarBarsMatchCumulativeScanner) {
    const auto prints = synthetic_prints(15);
    ASSERT_GT(prints.size(), 500u);
    const double tick = 0.01, threshold = 2500.0;
    std::vector<std::size_t> closes;
    double acc = 0.0;
    for (std::size_t i = 0; i < prints.size(); ++i) {
        acc += prints[i].price * tick * static_cast<double>(prints[i].size);
        if (acc >= threshold) {
            closes.push_back(i);
            acc = 0.0;
        }
    }
    const auto bars = build_bars(prints, {BarKind::dollar, threshold, false}, tick);
    ASSERT_EQ(bars.size(), closes.size());
    for (std::size_t k = 0; k < bars.size(); ++k) {
        EXPECT_EQ(bars[k].last_print, closes[k]);
        EXPECT_EQ(bars[k].close_price, prints[closes[k]].price);
        EXPECT_EQ(bars[k].close_ts, prints[closes[k]].ts_ns);
    }
}

TEST(Labeler, StreamingEqualsBatch) {
    const auto prints = synthetic_prints(16);
    const BarSpec spec{BarKind::volume, 25.0, true};
    const auto batch = build_bars(prints, spec, 0.01);
    // Feed in uneven chunks through one builder.
    BarBuilder builder(spec, 0.01);
    std::vector<Bar> streamed;
    std::size_t i = 0, chunk = 1;
    while (i < prints.size()) {
        for (std::size_t k = 0; k < chunk && i < prints.size(); ++k, ++i)
            if (auto b = builder.push(prints[i])) streamed.push_back(*b);
        chunk = chunk * 3 % 17 + 1;
    }
    if (auto b = builder.finish()) streamed.push_back(*b);
    EXPECT_EQ(streamed, batch);
}

TEST(Labeler, BarSpecValidation) {
    EXPECT_THROW((BarSpec{BarKind::tick, 0.0, false}.validate()), Error);
    EXPECT_EQ(parse_bar_kind("dollar"), BarKind::dollar);
    EXPECT_THROW((void)parse_bar_kind("imbalance"), Error);
}

TEST(Labeler, FirstBarStrictlyAfter) {
    const auto bars = build_bars(prints_of({1, 1, 1, 1}), {BarKind::tick, 1.0, false}, 0.01);
    EXPECT_EQ(first_bar_after(bars, 5), 0u);
    EXPECT_EQ(first_bar_after(bars, 10), 1u);
    EXPECT_EQ(first_bar_after(bars, 40), 4u);
}

TEST(Labeler, ClassMapping) {
    EXPECT_EQ(label_ticks(101.0, 101.0).cls, 2u);
    EXPECT_EQ(label_ticks(102.0, 101.0).cls, 3u);
    EXPECT_EQ(label_ticks(106.0, 101.0).cls, 4u);
    EXPECT_EQ(label_ticks(106.0, 101.0).raw_delta, 5);
    EXPECT_EQ(label_ticks(95.0, 101.0).cls, 0u);
    EXPECT_EQ(label_ticks(99.0, 101.0).cls, 0u);
    EXPECT_EQ(label_ticks(100.0, 101.0).cls, 1u);
    // Half-tick moves round away from zero.
    EXPECT_EQ(label_ticks(101.5, 101.0).raw_delta, 1);
    EXPECT_EQ(label_ticks(100.5, 101.0).raw_delta, -1);
    EXPECT_EQ(label_ticks(101.25, 101.0).raw_delta, 0);
    // Price units.
    EXPECT_EQ(label(101.01, 101.00, 0.01).cls, 3u);
    EXPECT_EQ(label(101.00, 101.00, 0.01).cls, 2u);
    EXPECT_EQ(label_ticks(105.0, 101.0, 7).cls, 6u);
    EXPECT_THROW((void)label_ticks(1.0, 1.0, 4), Error);
}

TEST(Labeler, RoundingIgnoresFloatNoise) {
    EXPECT_EQ(round_half_away(0.5 - 1e-12), 1);
    EXPECT_EQ(round_half_away(-0.5 + 1e-12), -1);
    EXPECT_EQ(round_half_away(0.49), 0);
    EXPECT_EQ(round_half_away(2.5), 3);
    EXPECT_EQ(round_half_away(0.1 + 0.2 + 0.2 - 0.5), 0);
}

TEST(Labeler, MirroredSample) {
    const auto s = sample();
    const auto m = mirrored(s);
    EXPECT_EQ(m.label, 0u);
    EXPECT_EQ(m.raw_delta, -2);
    EXPECT_EQ(m.features.p_ask, s.features.p_bid);
    // Mid is 101.0; prices reflect through it.
    EXPECT_DOUBLE_EQ(m.microprice, 100.75);
    EXPECT_DOUBLE_EQ(m.future_close, 99.0);
    EXPECT_EQ(label_ticks(m.future_close, m.microprice).cls, m.label);
    EXPECT_EQ(mirrored(m), s);
}

TEST(Labeler, DatasetRoundTrips) {
    std::vector<LabeledSample> data{sample(), mirrored(sample())};
    data[1].ts_ns = 11;
    std::stringstream csv;
    write_dataset_csv(csv, data);
    EXPECT_EQ(read_dataset_csv(csv), data);
    std::stringstream bin;
    write_dataset_binary(bin, data);
    EXPECT_EQ(read_dataset_binary(bin), data);
    std::stringstream bad("garbage\n1,2\n");
    EXPECT_THROW((void)read_dataset_csv(bad), Error);
}
