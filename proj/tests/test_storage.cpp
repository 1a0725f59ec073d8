#include <gtest/gtest.h>

#include <fstream>

#include "frisson/simulator.hpp"
#include "frisson/storage.hpp"
#include "test_util.hpp"

using namespace frisson;
using namespace frisson::storage;
using testutil::code_of;
using testutil::TempDir;

namespace {

SessionRecord small_record() {
    SessionRecord rec;
    rec.participant_id = "p1";
    rec.video_id = "v1";
    rec.sample_rate_hz = 5.0;
    rec.eda = {{1000, 0.5}, {1200, 0.75}, {1400, 1e-7}};
    rec.events = {{1000, PlaybackKind::play}, {1500, PlaybackKind::stop}};
    return rec;
}

int error_line(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return static_cast<int>(e.line());
    }
    return -2;
}

}  // namespace

TEST(Session, FileContents) {
    const auto rec = small_record();
    EXPECT_EQ(format_meta(rec), "{\"participant_id\":\"p1\",\"video_id\":\"v1\",\"sample_rate_hz\":5}\n");
    EXPECT_EQ(format_eda_csv(rec.eda), "t_ms,v\n1000,0.5\n1200,0.75\n1400,1e-07\n");
    EXPECT_EQ(format_events(rec.events), "{\"t_ms\":1000,\"e\":\"play\"}\n{\"t_ms\":1500,\"e\":\"stop\"}\n");
}

TEST(Session, RoundTrip) {
    TempDir dir;
    const auto rec = small_record();
    write_session(dir / "s", rec);
    EXPECT_EQ(read_session(dir / "s"), rec);
}

TEST(Session, SimulatedRecordsAreByteStable) {
    sim::CohortSpec spec;
    spec.seed = 42;
    const auto cohort = sim::simulate_cohort(spec);
    TempDir dir;
    for (const auto& v : cohort.viewers) {
        const auto p = dir / v.record.participant_id;
        write_session(p, v.record);
        const auto back = read_session(p);
        ASSERT_EQ(back, v.record);
        EXPECT_EQ(format_eda_csv(back.eda), read_text(p / "eda.csv"));
        EXPECT_EQ(format_events(back.events), read_text(p / "events.jsonl"));
        EXPECT_EQ(format_meta(back), read_text(p / "meta.json"));
    }
}

TEST(Session, MalformedRowReportsLine) {
    EXPECT_EQ(code_of([] { parse_eda_csv("t_ms,v\n1000,0.5\nabc,1.0\n"); }), ErrorCode::parse_error);
    EXPECT_EQ(error_line([] { parse_eda_csv("t_ms,v\n1000,0.5\nabc,1.0\n"); }), 3);
    EXPECT_EQ(error_line([] { parse_eda_csv("t_ms,v\n1000\n"); }), 2);
    EXPECT_EQ(error_line([] { parse_eda_csv("t_ms,v\n1000,0.5,1\n"); }), 2);
    EXPECT_EQ(error_line([] { parse_eda_csv("time,value\n"); }), 1);
    EXPECT_EQ(error_line([] { parse_events("{\"t_ms\":1,\"e\":\"play\"}\n{\"t_ms\":2,\"e\":\"pause\"}\n"); }), 2);
    EXPECT_EQ(code_of([] { parse_events("{\"t_ms\":1}\n"); }), ErrorCode::parse_error);
}

TEST(Session, MissingMetadataIsFormatError) {
    TempDir dir;
    write_session(dir / "s", small_record());
    std::filesystem::remove(dir / "s" / "meta.json");
    EXPECT_EQ(code_of([&] { read_session(dir / "s"); }), ErrorCode::format_error);
    SessionRecord rec;
    EXPECT_EQ(code_of([&] { parse_meta("{\"participant_id\":\"p1\",\"video_id\":\"v\"}", rec); }),
              ErrorCode::format_error);
}

TEST(Aggregate, RoundTrip) {
    TempDir dir;
    AggregateSeries agg{"v1", 5.0, 20, {0, 0.25, 1}};
    write_aggregate(dir / "a.json", agg);
    EXPECT_EQ(read_text(dir / "a.json"), "{\"video_id\":\"v1\",\"grid_hz\":5,\"n_viewers\":20,\"values\":[0.0,0.25,1.0]}\n");
    EXPECT_EQ(read_aggregate(dir / "a.json"), agg);
}

TEST(Aggregate, OutOfRangeIsFormatError) {
    EXPECT_EQ(code_of([] { parse_aggregate(R"({"video_id":"v","grid_hz":5,"n_viewers":2,"values":[0.5,1.2]})"); }),
              ErrorCode::format_error);
    EXPECT_EQ(code_of([] { parse_aggregate(R"({"video_id":"v","grid_hz":5,"n_viewers":2,"values":[]," x":1})"); }),
              ErrorCode::format_error);
    EXPECT_EQ(code_of([] { parse_aggregate("{"); }), ErrorCode::parse_error);
}

TEST(Aggregate, LongSeriesWithinTolerance) {
    sim::Rng rng(10);
    AggregateSeries agg{"v", 5.0, 20, std::vector<double>(1500)};
    for (auto& v : agg.values) v = rng.uniform();
    const auto back = parse_aggregate(format_aggregate(agg));
    ASSERT_EQ(back.values.size(), agg.values.size());
    for (std::size_t i = 0; i < agg.values.size(); ++i) EXPECT_NEAR(back.values[i], agg.values[i], 1e-9);
}

TEST(Frisson, RoundTripAndValidation) {
    FrissonRecord rec{"p1", "v1", {5.0, {0, 1, 1, 0}}};
    EXPECT_EQ(format_frisson(rec), "{\"participant_id\":\"p1\",\"video_id\":\"v1\",\"grid_hz\":5,\"values\":[0,1,1,0]}\n");
    EXPECT_EQ(parse_frisson(format_frisson(rec)), rec);
    EXPECT_EQ(code_of([] { parse_frisson(R"({"participant_id":"p","video_id":"v","grid_hz":5,"values":[0,2]})"); }),
              ErrorCode::format_error);
}

TEST(Keyframes, Format) {
    std::vector<FeedbackKeyframe> kf{{0.0, 0.0}, {0.2, 1.0}, {0.4, 0.0}};
    EXPECT_EQ(format_keyframes(FeedbackDesign::icon, kf),
              "{\"design\":\"icon\",\"keyframes\":[[0.0,0.0],[0.2,1.0],[0.4,0.0]]}\n");
}

TEST(Times, ParseSkipsCommentsAndBlanks) {
    EXPECT_EQ(parse_times("# truth\n1.5\n\n2.25\n"), (std::vector<double>{1.5, 2.25}));
    EXPECT_EQ(error_line([] { parse_times("1\nx\n"); }), 2);
    const std::vector<double> t{0.1, 20, 1e-3};
    EXPECT_EQ(parse_times(format_times(t)), t);
}

TEST(Csv, AggregateDump) {
    AggregateSeries agg{"v", 5.0, 4, {0, 0.25, 0.5}};
    EXPECT_EQ(format_aggregate_csv(agg), "index,video_t_s,value\n0,0,0\n1,0.2,0.25\n2,0.4,0.5\n");
}

TEST(Io, MissingFileIsIoError) {
    TempDir dir;
    EXPECT_EQ(code_of([&] { read_text(dir / "nope.txt"); }), ErrorCode::io_error);
}
