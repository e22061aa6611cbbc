#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "microhd/pipeline.hpp"
#include "microhd/synth.hpp"

using namespace microhd;

namespace {

std::vector<OrderEvent> stream(double p_signal, std::size_t n, std::uint64_t seed) {
    SynthParams sp;
    sp.p_signal = p_signal;
    sp.n_events = n;
    sp.trade_rate = 0.05;
    return synth_generate(sp, seed);
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.tm.n_clauses = 64;
    cfg.tm.epochs = 4;
    cfg.tm_max_samples = 600;
    cfg.sync();
    return cfg;
}

struct Trained {
    std::vector<OrderEvent> events;
    PipelineConfig cfg;
    ExperimentResult x;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained t;
        t.events = stream(0.9, 40000, 3);
        t.cfg = small_config();
        t.x = run_experiment(t.events, t.cfg);
        return t;
    }();
    return t;
}

// Two complementary single-literal clauses: exactly one fires on any input.
TsetlinMachine always_class(const TMConfig& cfg, std::uint32_t cls) {
    TsetlinMachine tm(cfg);
    for (std::uint32_t c = 0; c < cfg.n_classes; ++c)
        for (std::size_t j = 0; j < cfg.n_clauses; ++j) tm.set_weight(c, j, 0);
    tm.set_ta_state(0, 0, static_cast<std::uint16_t>(cfg.ta_states + 1));
    tm.set_ta_state(1, cfg.n_features, static_cast<std::uint16_t>(cfg.ta_states + 1));
    tm.set_weight(cls, 0, 1);
    tm.set_weight(cls, 1, 1);
    return tm;
}

double two_pass_l2(const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
    std::vector<double> sq;
    for (std::size_t t = 0; t + n < p.size(); ++t) sq.push_back((p[t] - y[t + n]) * (p[t] - y[t + n]));
    double mean = 0.0;
    for (double v : sq) mean += v;
    mean /= static_cast<double>(sq.size());
    double corr = 0.0;
    for (double v : sq) corr += v - mean;
    return std::sqrt(mean + corr / static_cast<double>(sq.size()));
}

}  // namespace

TEST(Config, RoundTrip) {
    PipelineConfig cfg;
    cfg.n_future = 5;
    cfg.tm.specificity = 4.5;
    cfg.label_price = PriceSource::trade;
    cfg.tm_mirror = false;
    cfg.sync();
    std::stringstream ss;
    write_config(ss, cfg);
    PipelineConfig back;
    read_config(ss, back);
    EXPECT_EQ(back, cfg);
    for (const auto& key : config_keys()) {
        PipelineConfig copy;
        set_config_value(copy, key, get_config_value(cfg, key));
        EXPECT_EQ(get_config_value(copy, key), get_config_value(cfg, key)) << key;
    }
}

TEST(Config, ErrorsNameTheLine) {
    PipelineConfig cfg;
    auto line_of = [&](const std::string& text) {
        std::istringstream in(text);
        try {
            read_config(in, cfg);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::parse_error);
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(line_of("# comment\nn_future = 3\nnot a pair\n").find("line 3"), std::string::npos);
    EXPECT_NE(line_of("no_such_key = 1\n").find("line 1"), std::string::npos);
    EXPECT_NE(line_of("\nn_future = many\n").find("line 2"), std::string::npos);
    PipelineConfig bad;
    bad.tm_validation = 1.0;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Jobs, SplitIndexStartsATimestampGroup) {
    const auto ev = stream(0.9, 5000, 1);
    for (double f : {0.1, 0.37, 0.5, 0.9}) {
        const auto k = split_index(ev, f);
        ASSERT_GT(k, 0u);
        ASSERT_LT(k, ev.size());
        EXPECT_NE(ev[k - 1].ts_ns, ev[k].ts_ns);
        EXPECT_LE(k, static_cast<std::size_t>(f * static_cast<double>(ev.size())));
    }
}

TEST(Evaluate, Examples) {
    const std::vector<double> truth{1, 2, 3, 5, 8, 13};
    std::vector<double> pred(truth.size());
    for (std::size_t t = 0; t + 2 < truth.size(); ++t) pred[t] = truth[t + 2];
    EXPECT_DOUBLE_EQ(evaluate_l2(pred, truth, 2), 0.0);
    for (std::size_t t = 0; t + 2 < truth.size(); ++t) pred[t] = truth[t + 2] + 1.0;
    EXPECT_DOUBLE_EQ(evaluate_l2(pred, truth, 2), 1.0);
}

TEST(Evaluate, MatchesTwoPassOracleAndIsTranslationInvariant) {
    Rng rng(11);
    std::vector<double> p(5000), y(5000);
    for (std::size_t t = 0; t < p.size(); ++t) {
        y[t] = 1000.0 + uniform01(rng) * 10.0;
        p[t] = 1000.0 + uniform01(rng) * 10.0;
    }
    const double l2 = evaluate_l2(p, y, 7);
    EXPECT_NEAR(l2, two_pass_l2(p, y, 7), 1e-12);
    std::vector<double> ps = p, ys = y;
    for (auto& v : ps) v += 5e4;
    for (auto& v : ys) v += 5e4;
    EXPECT_NEAR(evaluate_l2(ps, ys, 7), l2, 1e-8);
}

TEST(Evaluate, Errors) {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    auto code = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::io_error;
    };
    EXPECT_EQ(code([&] { (void)evaluate_l2(a, b, 1); }), ErrorCode::dimension_mismatch);
    EXPECT_EQ(code([&] { (void)evaluate_l2(a, a, 0); }), ErrorCode::invalid_argument);
    EXPECT_EQ(code([&] { (void)evaluate_l2(a, a, 3); }), ErrorCode::insufficient_data);
}

TEST(Pipeline, NeutralPoolLeavesMicropriceAlone) {
    const auto& t = trained();
    const TsetlinMachine fresh(t.cfg.tm);
    BacktestSeries s;
    const auto r = backtest(t.events, t.cfg, t.x.table, fresh, {.start = t.x.split}, &s);
    ASSERT_GT(s.plain.size(), 100u);
    for (std::size_t k = 0; k < s.plain.size(); ++k) {
        ASSERT_EQ(s.cls[k], 2u);
        ASSERT_EQ(s.adjusted[k], s.plain[k]);
    }
    EXPECT_DOUBLE_EQ(r.improvement_pct, 0.0);
}

TEST(Pipeline, ClassFourAddsTwoTicks) {
    const auto& t = trained();
    Pipeline p(t.cfg, t.x.table, always_class(t.cfg.tm, 4));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < 3000; ++i) {
        const auto r = p.run_update(t.events[i]);
        if (!r.valid) continue;
        ASSERT_EQ(r.cls, 4u);
        ASSERT_DOUBLE_EQ(r.adjusted - r.plain, 2.0);
        EXPECT_NEAR((r.adjusted - r.plain) * t.cfg.book.tick_size, 0.02, 1e-15);
        ++checked;
    }
    EXPECT_GT(checked, 1000u);
}

TEST(Pipeline, AdjustmentStaysWithinTwoTicks) {
    const auto& t = trained();
    Pipeline p(t.cfg, t.x.table, t.x.tm);
    for (std::size_t i = 0; i < 10000; ++i) {
        const auto r = p.run_update(t.events[i]);
        if (!r.valid) continue;
        ASSERT_LE(std::abs(r.adjusted - r.plain), 2.0);
        ASSERT_LT(r.cls, 5u);
    }
    EXPECT_EQ(p.counters().events, 10000u);
}

TEST(Pipeline, DegenerateBookPassesThrough) {
    const auto& t = trained();
    Pipeline p(t.cfg, t.x.table, t.x.tm);
    const auto r = p.run_update({0, Action::add, Side::bid, 100, 5, std::nullopt});
    EXPECT_FALSE(r.valid);
    EXPECT_EQ(r.cls, 2u);
    EXPECT_EQ(p.counters().degenerate, 1u);
}

TEST(Pipeline, RejectsMismatchedModels) {
    const auto& t = trained();
    TMConfig narrow = t.cfg.tm;
    narrow.n_features = 64;
    EXPECT_THROW(Pipeline(t.cfg, t.x.table, TsetlinMachine(narrow)), Error);
    EXPECT_THROW(Pipeline(t.cfg, MicropriceTable{}, t.x.tm), Error);
}

TEST(Backtest, OracleAndPlayback) {
    const auto& t = trained();
    BacktestSeries s;
    const auto oracle = backtest(t.events, t.cfg, t.x.table, t.x.tm,
                                 {.start = t.x.split, .source = ClassSource::oracle}, &s);
    EXPECT_LE(oracle.l2_adjusted_ticks, oracle.l2_plain_ticks);
    EXPECT_GT(oracle.improvement_pct, 0.0);

    BacktestOptions opt{.start = t.x.split, .source = ClassSource::playback};
    opt.playback.assign(s.plain.size(), 4);
    BacktestSeries s4;
    const auto r4 = backtest(t.events, t.cfg, t.x.table, t.x.tm, opt, &s4);
    for (std::size_t k = 0; k < s4.plain.size(); ++k) ASSERT_DOUBLE_EQ(s4.adjusted[k] - s4.plain[k], 2.0);
    EXPECT_EQ(r4.predicted_histogram[4], r4.scored);

    opt.playback.pop_back();
    EXPECT_THROW(backtest(t.events, t.cfg, t.x.table, t.x.tm, opt), Error);
}

TEST(Labels, NoLookAhead) {
    const auto& t = trained();
    LabelStats st;
    const auto samples = make_labels(t.events, t.cfg, t.x.table, 0, t.x.split, &st);
    ASSERT_GT(samples.size(), 100u);
    EXPECT_EQ(st.lookahead_violations, 0u);
    EXPECT_EQ(st.samples, samples.size());
    for (const auto& s : samples) {
        ASSERT_LT(s.ts_ns, s.future_ts);
        ASSERT_LE(s.future_ts, t.events[t.x.split - 1].ts_ns);
    }
}

TEST(Labels, ClassesSymmetricWithoutSignal) {
    const auto ev = stream(0.5, 60000, 4);
    auto cfg = small_config();
    const auto table = train_microprice_job(ev, cfg);
    LabelStats st;
    make_labels(ev, cfg, table, &st);
    const auto& h = st.class_histogram;
    for (int k = 0; k < 2; ++k) {
        const double a = static_cast<double>(h[k]), b = static_cast<double>(h[4 - k]);
        EXPECT_LE(std::abs(a - b), 4.0 * std::sqrt(a + b) + 1.0) << k;
    }
}

TEST(Train, HeldOutSnapshotSelection) {
    const auto& t = trained();
    const auto& r = t.x.train;
    ASSERT_EQ(r.validation_score.size(), r.epochs_run + 1);
    ASSERT_LE(r.selected_epoch, r.epochs_run);
    for (double v : r.validation_score) EXPECT_GE(v, r.validation_score[r.selected_epoch]);

    auto cfg = t.cfg;
    cfg.tm_validation = 0.0;
    const auto samples = make_labels(t.events, cfg, t.x.table, 0, t.x.split);
    TrainReport plain;
    const auto tm = train_tm_job(samples, cfg, &plain);
    EXPECT_TRUE(plain.validation_score.empty());
    EXPECT_EQ(plain.epochs_run, cfg.tm.epochs);
    EXPECT_LE(plain.max_included, cfg.tm.max_literals);
    (void)tm;
}

TEST(Experiment, Deterministic) {
    const auto& t = trained();
    const auto again = run_experiment(t.events, t.cfg);
    EXPECT_TRUE(again.table == t.x.table);
    EXPECT_TRUE(again.tm == t.x.tm);
    std::ostringstream a, b;
    write_report_jsonl(a, t.x.report);
    write_report_jsonl(b, again.report);
    EXPECT_EQ(a.str(), b.str());
}
