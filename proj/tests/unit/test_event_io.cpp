#include <gtest/gtest.h>

#include <sstream>

#include "microhd/event_io.hpp"
#include "microhd/synth.hpp"

using namespace microhd;

TEST(EventIo, ActionAndSideCodes) {
    EXPECT_EQ(parse_action("A"), Action::add);
    EXPECT_EQ(parse_action("C"), Action::cancel);
    EXPECT_EQ(parse_action("M"), Action::modify);
    EXPECT_EQ(parse_action("T"), Action::trade);
    EXPECT_EQ(parse_action("F"), Action::trade);
    EXPECT_EQ(parse_action("R"), Action::clear);
    EXPECT_EQ(parse_action("cancel"), Action::cancel);
    EXPECT_FALSE(parse_action("X"));
    EXPECT_EQ(parse_side("B"), Side::bid);
    EXPECT_EQ(parse_side("S"), Side::ask);
    EXPECT_EQ(parse_side("ask"), Side::ask);
    EXPECT_FALSE(parse_side("Q"));
    for (auto a : {Action::add, Action::cancel, Action::modify, Action::trade, Action::clear})
        EXPECT_EQ(parse_action(std::string(1, action_code(a))), a);
}

TEST(EventIo, PriceUnitsConvertToTicks) {
    EXPECT_EQ(price_to_ticks(101.25, 0.01), 10125);
    EXPECT_EQ(price_to_ticks(0.3, 0.1), 3);
    EXPECT_THROW((void)price_to_ticks(101.255, 0.01), Error);
}

TEST(EventIo, ReadsPriceUnitCsv) {
    std::istringstream in("ts_ns,action,side,price,size,order_id\n"
                          "1,A,B,100.00,20,7\n"
                          "2,A,S,100.02,5,\n"
                          "3,T,A,100.02,1,\n");
    const auto events = read_events(in, EventFormat::csv, 0.01);
    ASSERT_EQ(events.size(), 3u);
    EXPECT_EQ(events[0], (OrderEvent{1, Action::add, Side::bid, 10000, 20, 7}));
    EXPECT_EQ(events[1], (OrderEvent{2, Action::add, Side::ask, 10002, 5, std::nullopt}));
    EXPECT_EQ(events[2].action, Action::trade);
}

TEST(EventIo, ReadsJsonLines) {
    std::istringstream in(R"({"ts_ns":5,"action":"A","side":"B","price":1.5,"size":3,"order_id":9}
{"ts_ns":6,"action":"C","side":"B","price":1.5,"size":3}
)");
    const auto events = read_events(in, EventFormat::jsonl, 0.5);
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0], (OrderEvent{5, Action::add, Side::bid, 3, 3, 9}));
    EXPECT_FALSE(events[1].order_id);
}

TEST(EventIo, MalformedRowNamesLine) {
    std::istringstream in("ts_ns,action,side,price_ticks,size,order_id\n"
                          "1,A,B,100,20,\n"
                          "2,A,B,abc,20,\n");
    try {
        (void)read_events(in, EventFormat::csv, 0.01);
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse_error);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(EventIo, CanonicalRoundTrip) {
    SynthParams sp;
    sp.n_events = 2000;
    const auto events = synth_generate(sp, 21);
    std::stringstream buf;
    write_events(buf, events);
    EXPECT_EQ(read_events(buf, EventFormat::csv, 0.01), events);
}

TEST(EventIo, DetectsTimeRegression) {
    std::vector<OrderEvent> events(3);
    events[0].ts_ns = 1;
    events[1].ts_ns = 3;
    events[2].ts_ns = 2;
    EXPECT_EQ(first_time_regression(events), 2u);
    events[2].ts_ns = 3;
    EXPECT_FALSE(first_time_regression(events));
}

TEST(EventIo, FormatFromExtension) {
    EXPECT_EQ(format_for("a.jsonl"), EventFormat::jsonl);
    EXPECT_EQ(format_for("a.json"), EventFormat::jsonl);
    EXPECT_EQ(format_for("a.csv"), EventFormat::csv);
}
