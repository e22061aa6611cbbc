#include <gtest/gtest.h>

#include <map>

#include "support/oracles.hpp"
#include "unit/helpers.hpp"
#include "microhd/book.hpp"
#include "microhd/synth.hpp"

using namespace microhd;
using microhd::test::ev;
using microhd::test::make_book;

namespace {

std::vector<Level> levels_desc(const std::map<Ticks, std::int64_t>& m) {
    std::vector<Level> out;
    for (auto it = m.rbegin(); it != m.rend(); ++it) out.push_back({it->first, it->second});
    return out;
}

std::vector<Level> levels_asc(const std::map<Ticks, std::int64_t>& m) {
    std::vector<Level> out;
    for (auto [p, q] : m) out.push_back({p, q});
    return out;
}

std::vector<OrderEvent> small_stream(std::size_t n, std::uint64_t seed) {
    SynthParams sp;
    sp.n_events = n;
    sp.trade_rate = 0.05;
    return synth_generate(sp, seed);
}

}  // namespace

TEST(Book, AddToEmptyBook) {
    BookState b;
    b.apply(ev(Action::add, Side::bid, 100, 20));
    ASSERT_EQ(b.bids().size(), 1u);
    EXPECT_EQ(b.bids()[0], (Level{100, 20}));
    EXPECT_TRUE(b.asks().empty());
}

TEST(Book, TradeDecrementsAndRecordsPrice) {
    auto b = make_book({{100, 20}}, {});
    b.apply(ev(Action::trade, Side::bid, 100, 5));
    EXPECT_EQ(b.bids()[0], (Level{100, 15}));
    ASSERT_TRUE(b.last_trade_price());
    EXPECT_EQ(*b.last_trade_price(), 100);
}

TEST(Book, ZeroSizeLevelsAreRemoved) {
    auto b = make_book({{100, 20}, {99, 5}}, {{102, 10}});
    b.apply(ev(Action::cancel, Side::bid, 100, 20));
    ASSERT_EQ(b.bids().size(), 1u);
    EXPECT_EQ(b.bids()[0].price, 99);
    b.apply(ev(Action::trade, Side::ask, 102, 10));
    EXPECT_TRUE(b.asks().empty());
}

TEST(Book, ReplayMatchesBruteForceLadder) {
    const auto events = small_stream(10000, 3);
    BookState book;
    oracle::BruteLadder brute;
    for (const auto& e : events) {
        ASSERT_FALSE(e.order_id);
        book.apply(e);
        brute.apply(e);
    }
    EXPECT_EQ(std::vector<Level>(book.bids().begin(), book.bids().end()), levels_desc(brute.bid));
    EXPECT_EQ(std::vector<Level>(book.asks().begin(), book.asks().end()), levels_asc(brute.ask));
    EXPECT_EQ(book.counters().ignored, 0u);
}

TEST(Book, TopOfBookExamples) {
    auto b = make_book({{100, 20}}, {{102, 20}});
    EXPECT_EQ(*top_of_book(b), (TopOfBook{100, 20, 102, 20}));
    auto c = make_book({{100, 20}, {99, 5}}, {{102, 10}, {103, 7}});
    EXPECT_EQ(*top_of_book(c), (TopOfBook{100, 20, 102, 10}));
    EXPECT_FALSE(top_of_book(make_book({{100, 20}}, {})));
}

TEST(Book, TopOfBookMatchesLinearScan) {
    Rng rng(17);
    BookState book;
    std::map<Ticks, std::int64_t> bid, ask;
    for (int step = 0; step < 10000; ++step) {
        // Random non-crossing adds and cancels around 1000.
        const bool is_bid = bernoulli(rng, 0.5);
        auto& m = is_bid ? bid : ask;
        const Ticks price = is_bid ? 1000 - static_cast<Ticks>(uniform_below(rng, 20))
                                   : 1001 + static_cast<Ticks>(uniform_below(rng, 20));
        if (bernoulli(rng, 0.6) || !m.contains(price)) {
            const auto q = static_cast<std::int64_t>(1 + uniform_below(rng, 50));
            book.apply(ev(Action::add, is_bid ? Side::bid : Side::ask, price, q));
            m[price] += q;
        } else {
            book.apply(ev(Action::cancel, is_bid ? Side::bid : Side::ask, price, 0));
            m.erase(price);
        }
        if (bid.empty() || ask.empty()) {
            EXPECT_FALSE(top_of_book(book));
            continue;
        }
        Ticks best_bid = 0, best_ask = 0;
        bool first = true;
        for (auto [p, q] : bid) if (first || p > best_bid) { best_bid = p; first = false; }
        first = true;
        for (auto [p, q] : ask) if (first || p < best_ask) { best_ask = p; first = false; }
        const auto top = top_of_book(book);
        ASSERT_TRUE(top);
        ASSERT_EQ(*top, (TopOfBook{best_bid, bid[best_bid], best_ask, ask[best_ask]}));
    }
}

TEST(Book, MidPriceExamples) {
    EXPECT_EQ(mid_price(make_book({{100, 1}}, {{102, 1}}))->ticks(), 101.0);
    EXPECT_EQ(mid_price(make_book({{100, 1}}, {{101, 1}}))->ticks(), 100.5);
    EXPECT_EQ(mid_price(make_book({{100, 1}}, {{101, 1}}))->twice, 201);
    EXPECT_FALSE(mid_price(make_book({}, {{101, 1}})));
}

TEST(Book, MidWithinQuotesOnRandomBooks) {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
        const Ticks pb = 100 + static_cast<Ticks>(uniform_below(rng, 50));
        const Ticks pa = pb + 1 + static_cast<Ticks>(uniform_below(rng, 10));
        auto b = make_book({{pb, 1 + static_cast<std::int64_t>(uniform_below(rng, 9))}},
                           {{pa, 1 + static_cast<std::int64_t>(uniform_below(rng, 9))}});
        const double m = mid_price(b)->ticks();
        EXPECT_GE(m, static_cast<double>(pb));
        EXPECT_LE(m, static_cast<double>(pa));
        const double w = *weighted_mid(b);
        EXPECT_GE(w, static_cast<double>(pb));
        EXPECT_LE(w, static_cast<double>(pa));
    }
}

TEST(Book, ImbalanceExamplesAndSymmetry) {
    EXPECT_EQ(*imbalance(make_book({{100, 20}}, {{101, 20}})), 0.5);
    EXPECT_EQ(*imbalance(make_book({{100, 30}}, {{101, 10}})), 0.75);
    Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        const auto qb = static_cast<std::int64_t>(1 + uniform_below(rng, 100));
        const auto qa = static_cast<std::int64_t>(1 + uniform_below(rng, 100));
        const double i = *imbalance(make_book({{100, qb}}, {{101, qa}}));
        const double j = *imbalance(make_book({{100, qa}}, {{101, qb}}));
        EXPECT_NEAR(i, 1.0 - j, 1e-15);
    }
}

TEST(Book, SpreadExamples) {
    EXPECT_EQ(*spread_ticks(make_book({{100, 1}}, {{102, 1}})), 2);
    EXPECT_EQ(*spread_ticks(make_book({{100, 1}}, {{101, 1}})), 1);
    EXPECT_FALSE(spread_ticks(make_book({{100, 1}}, {})));
}

TEST(Book, SyntheticStreamStaysUncrossed) {
    BookState book;
    for (const auto& e : small_stream(20000, 4)) {
        book.apply(e);
        if (!book.two_sided()) continue;
        ASSERT_GE(*spread_ticks(book), 1);
        for (const auto& l : book.bids()) ASSERT_GT(l.size, 0);
        for (const auto& l : book.asks()) ASSERT_GT(l.size, 0);
    }
}

TEST(Book, WeightedMidExamples) {
    auto even = make_book({{100, 20}}, {{102, 20}});
    EXPECT_EQ(*weighted_mid(even), mid_price(even)->ticks());
    EXPECT_EQ(*weighted_mid(make_book({{100, 30}}, {{102, 10}})), 101.5);
}

TEST(Book, ReplayIsDeterministicAndEqualsFold) {
    const auto events = small_stream(5000, 8);
    const auto a = replay(events);
    const auto b = replay(events);
    EXPECT_TRUE(a == b);
    BookState c;
    for (const auto& e : events) c.apply(e);
    EXPECT_TRUE(a == c);
}

TEST(Book, LenientIgnoresAbsentLevelStrictRejects) {
    auto lenient = make_book({{100, 20}}, {{102, 20}});
    auto r = lenient.apply(ev(Action::cancel, Side::bid, 95, 5));
    EXPECT_EQ(r.status, ApplyStatus::ignored);
    EXPECT_FALSE(r.diagnostic.empty());
    EXPECT_EQ(lenient.counters().ignored, 1u);

    BookConfig cfg;
    cfg.mode = IngestMode::strict;
    BookState strict(cfg);
    strict.apply(ev(Action::add, Side::bid, 100, 20));
    r = strict.apply(ev(Action::modify, Side::bid, 95, 5));
    EXPECT_EQ(r.status, ApplyStatus::rejected);
    EXPECT_EQ(strict.counters().rejected, 1u);
    EXPECT_EQ(strict.bids()[0], (Level{100, 20}));
}

TEST(Book, CrossingQuoteConsumedOrRejected) {
    auto b = make_book({{100, 20}}, {{101, 5}, {102, 5}});
    b.apply(ev(Action::add, Side::bid, 101, 8));
    // 5 filled at 101, the remaining 3 rest as the new best bid.
    EXPECT_EQ(b.bids()[0], (Level{101, 3}));
    EXPECT_EQ(b.asks()[0], (Level{102, 5}));
    EXPECT_EQ(*b.last_trade_price(), 101);
    EXPECT_EQ(b.counters().crossing_fills, 1u);

    BookConfig cfg;
    cfg.mode = IngestMode::strict;
    BookState s(cfg);
    s.apply(ev(Action::add, Side::ask, 101, 5));
    EXPECT_EQ(s.apply(ev(Action::add, Side::bid, 101, 8)).status, ApplyStatus::rejected);
    EXPECT_TRUE(s.bids().empty());
}

TEST(Book, OrderIdsRouteDeltas) {
    BookState b;
    b.apply(ev(Action::add, Side::bid, 100, 10, 0, 1));
    b.apply(ev(Action::add, Side::bid, 100, 5, 0, 2));
    b.apply(ev(Action::add, Side::ask, 103, 7, 0, 3));
    EXPECT_EQ(b.size_at(Side::bid, 100), 15);
    b.apply(ev(Action::cancel, Side::bid, 0 + 1, 0, 0, 1));  // price ignored when the id is known
    EXPECT_EQ(b.size_at(Side::bid, 100), 5);
    b.apply(ev(Action::modify, Side::bid, 101, 9, 0, 2));
    EXPECT_EQ(b.size_at(Side::bid, 100), 0);
    EXPECT_EQ(b.size_at(Side::bid, 101), 9);
    b.apply(ev(Action::trade, Side::ask, 1, 2, 0, 3));
    EXPECT_EQ(b.size_at(Side::ask, 103), 5);
    EXPECT_EQ(*b.last_trade_price(), 103);
}

TEST(Book, RanksRespectDepthLimit) {
    auto b = make_book({{100, 1}, {99, 1}, {98, 1}, {97, 1}}, {{101, 1}, {102, 1}}, 3);
    EXPECT_EQ(b.ranks(Side::bid).size(), 3u);
    EXPECT_EQ(b.ladder(Side::bid).size(), 4u);
    EXPECT_EQ(b.ranks(Side::ask).size(), 2u);
}

TEST(Book, PrevMidTracksLastChange) {
    auto b = make_book({{100, 1}}, {{102, 1}});
    EXPECT_FALSE(b.prev_mid());
    b.apply(ev(Action::add, Side::ask, 101, 1));
    ASSERT_TRUE(b.prev_mid());
    EXPECT_EQ(b.prev_mid()->twice, 202);
    b.apply(ev(Action::add, Side::bid, 99, 4));  // mid unchanged
    EXPECT_EQ(b.prev_mid()->twice, 202);
    b.apply(ev(Action::clear, Side::bid, 0, 0));
    EXPECT_TRUE(b.empty());
    EXPECT_FALSE(b.prev_mid());
}
