#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <thread>

#include "frisson/simulator.hpp"
#include "frisson/storage.hpp"
#include "frisson/stream_server.hpp"
#include "test_util.hpp"

using namespace frisson;
using namespace frisson::server;
using namespace std::chrono_literals;
using testutil::code_of;
using testutil::TempDir;

namespace {

class Inbox : public FrameSink {
public:
    void deliver(const std::string& line) override {
        std::lock_guard lk(mutex_);
        frames_.push_back(wire::decode(line));
        cv_.notify_all();
    }
    std::vector<wire::Frame> frames() const {
        std::lock_guard lk(mutex_);
        return frames_;
    }
    // Waits until at least n frames have arrived.
    bool wait_for(std::size_t n, std::chrono::milliseconds timeout = 3s) {
        std::unique_lock lk(mutex_);
        return cv_.wait_for(lk, timeout, [&] { return frames_.size() >= n; });
    }
    void clear() {
        std::lock_guard lk(mutex_);
        frames_.clear();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<wire::Frame> frames_;
};

std::string err_code(const wire::Frame& f) {
    if (f.op != wire::Op::err) return "<" + std::string(wire::to_string(f.op)) + ">";
    return std::get<wire::ErrorPayload>(f.data).code;
}

void send(StreamServer& srv, ConnectionId id, const wire::Frame& f) { srv.handle_line(id, wire::encode(f)); }

struct FakeClock {
    std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(1'000'000);
    Clock clock() const {
        return [n = now] { return n->load(); };
    }
};

void publish_record(StreamServer& srv, ConnectionId id, const std::string& session, const storage::SessionRecord& rec) {
    std::size_t e = 0;
    for (const auto& s : rec.eda) {
        for (; e < rec.events.size() && rec.events[e].t_wall_ms <= s.t_wall_ms; ++e)
            send(srv, id, wire::make_playback(session, rec.participant_id, rec.events[e].t_wall_ms, rec.events[e].kind));
        send(srv, id, wire::make_eda(session, rec.participant_id, s.t_wall_ms, s.value));
    }
    for (; e < rec.events.size(); ++e)
        send(srv, id, wire::make_playback(session, rec.participant_id, rec.events[e].t_wall_ms, rec.events[e].kind));
}

}  // namespace

TEST(Routing, WildcardSubscribersBothReceive) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto a = std::make_shared<Inbox>(), b = std::make_shared<Inbox>(), pub = std::make_shared<Inbox>();
    const auto ia = srv.connect(a), ib = srv.connect(b), ip = srv.connect(pub);
    send(srv, ia, wire::make_subscribe("eda/s1/+"));
    send(srv, ib, wire::make_subscribe("eda/s1/+"));
    send(srv, ib, wire::make_subscribe("eda/s1/+"));
    send(srv, ip, wire::make_eda("s1", "p1", 100, 0.5));
    send(srv, ip, wire::make_eda("s2", "p1", 100, 0.5));
    const wire::Frame want{wire::Op::msg, "eda/s1/p1", wire::EdaPayload{100, 0.5}};
    ASSERT_EQ(a->frames().size(), 1u);
    ASSERT_EQ(b->frames().size(), 1u);
    EXPECT_EQ(a->frames()[0], want);
    EXPECT_EQ(b->frames()[0], want);
    EXPECT_TRUE(pub->frames().empty());
}

TEST(Routing, ArrivalOrderPreserved) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto sub = std::make_shared<Inbox>();
    const auto is = srv.connect(sub);
    const auto ip = srv.connect(std::make_shared<Inbox>());
    send(srv, is, wire::make_subscribe("eda/s1/p1"));
    for (int i = 0; i < 200; ++i) send(srv, ip, wire::make_eda("s1", "p1", i, i * 0.5));
    const auto got = sub->frames();
    ASSERT_EQ(got.size(), 200u);
    for (int i = 0; i < 200; ++i) EXPECT_EQ(std::get<wire::EdaPayload>(got[i].data).t, i);
}

TEST(Ingest, TimestampRegressionDropsSample) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto in = std::make_shared<Inbox>();
    const auto id = srv.connect(in);
    send(srv, id, wire::make_eda("s1", "p1", 2000, 1.0));
    send(srv, id, wire::make_eda("s1", "p1", 1000, 2.0));
    ASSERT_EQ(in->frames().size(), 1u);
    EXPECT_EQ(err_code(in->frames()[0]), "ts_regression");
    EXPECT_EQ(srv.eda_snapshot("s1", "p1"), (std::vector<EdaSample>{{2000, 1.0}}));
}

TEST(Ingest, BadPlaybackOrderRejected) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto in = std::make_shared<Inbox>();
    const auto id = srv.connect(in);
    send(srv, id, wire::make_playback("s1", "p1", 1000, PlaybackKind::stop));
    send(srv, id, wire::make_playback("s1", "p1", 1000, PlaybackKind::play));
    send(srv, id, wire::make_playback("s1", "p1", 2000, PlaybackKind::play));
    ASSERT_EQ(in->frames().size(), 2u);
    EXPECT_EQ(err_code(in->frames()[0]), "protocol_violation");
    EXPECT_EQ(err_code(in->frames()[1]), "protocol_violation");
    EXPECT_EQ(srv.playback_snapshot("s1", "p1").size(), 1u);
}

TEST(Ingest, RapidToggleAccepted) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto in = std::make_shared<Inbox>();
    const auto id = srv.connect(in);
    for (int i = 0; i < 200; ++i)
        send(srv, id, wire::make_playback("s1", "p1", 1000 + i, i % 2 ? PlaybackKind::stop : PlaybackKind::play));
    EXPECT_TRUE(in->frames().empty());
    EXPECT_EQ(srv.playback_snapshot("s1", "p1").size(), 200u);
}

TEST(Ingest, MalformedAndServerOnlyFrames) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto in = std::make_shared<Inbox>();
    const auto id = srv.connect(in);
    srv.handle_line(id, "{\"op\":\"pub\",");
    srv.handle_line(id, "{\"op\":\"fly\"}");
    send(srv, id, wire::make_error("x", "y"));
    send(srv, id, wire::Frame{wire::Op::msg, "eda/s1/p1", wire::EdaPayload{1, 2}});
    srv.handle_line(id, wire::encode(wire::make_eda("s1", "p1", 5, 1.0)));
    const auto f = in->frames();
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(err_code(f[0]), "parse_error");
    EXPECT_EQ(err_code(f[1]), "protocol_violation");
    EXPECT_EQ(err_code(f[2]), "protocol_violation");
    EXPECT_EQ(err_code(f[3]), "protocol_violation");
    EXPECT_EQ(srv.eda_snapshot("s1", "p1").size(), 1u);
}

TEST(GetAggregate, FromStoredSeries) {
    TempDir dir;
    sim::Rng rng(12);
    std::vector<FrissonSeries> series;
    for (int p = 0; p < 20; ++p) {
        FrissonSeries s{5.0, std::vector<std::uint8_t>(300)};
        for (auto& v : s.values) v = static_cast<std::uint8_t>(rng.below(2));
        const std::string name = "p" + std::to_string(p);
        storage::write_frisson(dir / ("frisson/vid/s1/" + name + ".json"), {name, "vid", s});
        series.push_back(s);
    }
    StreamServer srv({.data_dir = dir.path()});
    auto in = std::make_shared<Inbox>();
    const auto id = srv.connect(in);
    send(srv, id, wire::Frame{wire::Op::get_aggregate, {}, wire::GetAggregatePayload{"vid"}});
    const auto frames = in->frames();
    ASSERT_EQ(frames.size(), 1u);
    const auto& agg = std::get<AggregateSeries>(frames[0].data);
    const auto want = aggregate("vid", series);
    EXPECT_EQ(agg.n_viewers, 20u);
    ASSERT_EQ(agg.values.size(), want.values.size());
    for (std::size_t i = 0; i < want.values.size(); ++i) EXPECT_NEAR(agg.values[i], want.values[i], 1e-9);
}

TEST(GetAggregate, UnknownVideoIsNotFound) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto in = std::make_shared<Inbox>();
    const auto id = srv.connect(in);
    send(srv, id, wire::Frame{wire::Op::get_aggregate, {}, wire::GetAggregatePayload{"nothing"}});
    ASSERT_EQ(in->frames().size(), 1u);
    EXPECT_EQ(err_code(in->frames()[0]), "not_found");
}

TEST(Finalize, SkipsParticipantWithoutEda) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    const auto id = srv.connect(std::make_shared<Inbox>());
    sim::CohortSpec spec;
    spec.participants = 2;
    spec.duration_s = 120;
    spec.events_per_viewer = 3;
    spec.seed = 9;
    const auto cohort = sim::simulate_cohort(spec);
    for (const auto& v : cohort.viewers) publish_record(srv, id, "s1", v.record);
    send(srv, id, wire::make_playback("s1", "p3", 1'700'000'000'000, PlaybackKind::play));
    const auto r = srv.finalize_session("s1", "vid");
    EXPECT_EQ(r.aggregate.n_viewers, 2u);
    ASSERT_EQ(r.skipped.size(), 1u);
    EXPECT_EQ(r.skipped[0].participant, "p3");
    EXPECT_TRUE(std::filesystem::exists(dir / "aggregates/vid.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "frisson/vid/s1/p01.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "sessions/s1/p02/eda.csv"));
    EXPECT_EQ(storage::read_aggregate(dir / "aggregates/vid.json"), r.aggregate);
}

TEST(Finalize, QuietViewerGivesZeroAggregate) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    const auto id = srv.connect(std::make_shared<Inbox>());
    send(srv, id, wire::make_playback("s1", "p1", 0, PlaybackKind::play));
    for (int i = 0; i < 300; ++i) send(srv, id, wire::make_eda("s1", "p1", i * 200, 3.0));
    const auto r = srv.finalize_session("s1", "v");
    EXPECT_EQ(r.aggregate.n_viewers, 1u);
    EXPECT_EQ(r.aggregate.values, std::vector<double>(300, 0.0));
}

TEST(Finalize, NobodyUsableIsInsufficientData) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    const auto id = srv.connect(std::make_shared<Inbox>());
    send(srv, id, wire::make_playback("s1", "p1", 0, PlaybackKind::play));
    EXPECT_EQ(code_of([&] { srv.finalize_session("s1", "v"); }), ErrorCode::insufficient_data);
    EXPECT_EQ(code_of([&] { srv.finalize_session("nope", "v"); }), ErrorCode::insufficient_data);
}

TEST(Finalize, ConcurrentIngestMatchesSerial) {
    sim::CohortSpec spec;
    spec.participants = 6;
    spec.duration_s = 120;
    spec.events_per_viewer = 3;
    spec.seed = 5;
    const auto cohort = sim::simulate_cohort(spec);

    TempDir d1, d2;
    StreamServer serial({.data_dir = d1.path()});
    const auto sid = serial.connect(std::make_shared<Inbox>());
    for (const auto& v : cohort.viewers) publish_record(serial, sid, "s1", v.record);

    StreamServer parallel({.data_dir = d2.path()});
    std::vector<std::thread> threads;
    for (const auto& v : cohort.viewers) {
        threads.emplace_back([&parallel, &v] {
            const auto id = parallel.connect(std::make_shared<Inbox>());
            publish_record(parallel, id, "s1", v.record);
        });
    }
    for (auto& t : threads) t.join();

    for (const auto& v : cohort.viewers) {
        EXPECT_EQ(serial.eda_snapshot("s1", v.record.participant_id), parallel.eda_snapshot("s1", v.record.participant_id));
        EXPECT_EQ(serial.playback_snapshot("s1", v.record.participant_id),
                  parallel.playback_snapshot("s1", v.record.participant_id));
    }
    const auto a = serial.finalize_session("s1", "v");
    const auto b = parallel.finalize_session("s1", "v");
    EXPECT_EQ(a.aggregate, b.aggregate);
    EXPECT_EQ(serial.finalize_session("s1", "v").aggregate, a.aggregate);
}

TEST(Ticker, ZeroAggregateGivesZeroDuty) {
    FeedbackTicker t(AggregateSeries{"v", 5.0, 1, std::vector<double>(50, 0.0)}, 5.0);
    ASSERT_TRUE(t.on_playback({0, PlaybackKind::play}));
    for (std::int64_t now = 0; now < 10'000; now += 50)
        if (auto p = t.poll(now)) EXPECT_EQ(p->duty, 0.0);
}

TEST(Ticker, FullAggregateGivesMaxDuty) {
    FeedbackTicker t(AggregateSeries{"v", 5.0, 1, std::vector<double>(50, 1.0)}, 5.0);
    ASSERT_TRUE(t.on_playback({0, PlaybackKind::play}));
    int n = 0;
    for (std::int64_t now = 0; now < 10'000; now += 50) {
        if (auto p = t.poll(now)) {
            EXPECT_NEAR(p->duty, 0.7, 1e-12);
            EXPECT_EQ(p->a, 1.0);
            ++n;
        }
    }
    EXPECT_EQ(n, 50);
}

TEST(Ticker, PauseResumesAtNextTick) {
    std::vector<double> ramp(100);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 100.0;
    FeedbackTicker t(AggregateSeries{"v", 5.0, 1, ramp}, 5.0);
    ASSERT_TRUE(t.on_playback({1000, PlaybackKind::play}));
    double last = -1;
    for (std::int64_t now = 1000; now <= 3100; now += 10)
        if (auto p = t.poll(now)) last = p->a;
    EXPECT_EQ(last, 0.10);  // tick 10 at video 2.0 s
    ASSERT_TRUE(t.on_playback({3100, PlaybackKind::stop}));
    for (std::int64_t now = 3100; now < 9000; now += 10) EXPECT_FALSE(t.poll(now));
    EXPECT_FALSE(t.next_due_ms(5000));
    ASSERT_TRUE(t.on_playback({9000, PlaybackKind::play}));
    std::optional<wire::FeedbackPayload> first;
    for (std::int64_t now = 9000; !first && now < 12'000; now += 10) first = t.poll(now);
    ASSERT_TRUE(first);
    EXPECT_EQ(first->a, 0.11);
    EXPECT_EQ(first->t, 9100);  // video 2.1 s -> 2.2 s
}

TEST(Ticker, DutyAlwaysWithinBounds) {
    sim::Rng rng(6);
    std::vector<double> values(200);
    for (auto& v : values) v = rng.uniform();
    FeedbackTicker t(AggregateSeries{"v", 5.0, 1, values}, 10.0);
    t.on_playback({0, PlaybackKind::play});
    for (std::int64_t now = 0; now < 60'000; now += 7) {
        if (auto p = t.poll(now)) {
            EXPECT_GE(p->duty, 0.0);
            EXPECT_LE(p->duty, 0.7);
        }
    }
}

TEST(ServerTicker, StreamsWhilePlayingOnly) {
    TempDir dir;
    storage::write_aggregate(dir / "aggregates/s1.json", AggregateSeries{"s1", 5.0, 1, std::vector<double>(100, 1.0)});
    FakeClock clk;
    StreamServer srv({.data_dir = dir.path(), .clock = clk.clock()});
    auto viewer = std::make_shared<Inbox>();
    const auto vid = srv.connect(viewer);
    auto device = std::make_shared<Inbox>();
    const auto did = srv.connect(device);
    send(srv, did, wire::make_subscribe("feedback/s1"));
    send(srv, vid, wire::make_playback("s1", "p1", 1'000'000, PlaybackKind::play));
    ASSERT_TRUE(srv.ticker_running("s1"));
    ASSERT_TRUE(device->wait_for(1));
    clk.now->store(1'000'450);
    ASSERT_TRUE(device->wait_for(2));  // polled late: tick 2 follows tick 0
    for (const auto& f : device->frames()) {
        ASSERT_EQ(f.topic, "feedback/s1");
        EXPECT_NEAR(std::get<wire::FeedbackPayload>(f.data).duty, 0.7, 1e-12);
    }
    send(srv, vid, wire::make_playback("s1", "p1", 1'000'450, PlaybackKind::stop));
    std::this_thread::sleep_for(150ms);
    const auto before = device->frames().size();
    clk.now->store(1'005'000);
    std::this_thread::sleep_for(250ms);
    EXPECT_EQ(device->frames().size(), before);
    srv.stop_tickers();
    EXPECT_FALSE(srv.ticker_running("s1"));
}

TEST(ServerTicker, MissingAggregateNotStarted) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    auto viewer = std::make_shared<Inbox>();
    const auto vid = srv.connect(viewer);
    send(srv, vid, wire::make_subscribe("feedback/s1"));
    send(srv, vid, wire::make_playback("s1", "p1", 1000, PlaybackKind::play));
    ASSERT_EQ(viewer->frames().size(), 1u);
    EXPECT_EQ(err_code(viewer->frames()[0]), "not_found");
    EXPECT_FALSE(srv.ticker_running("s1"));
}

TEST(ServerTicker, NoSubscriberNoTicker) {
    TempDir dir;
    storage::write_aggregate(dir / "aggregates/s1.json", AggregateSeries{"s1", 5.0, 1, {0.5}});
    StreamServer srv({.data_dir = dir.path()});
    const auto id = srv.connect(std::make_shared<Inbox>());
    send(srv, id, wire::make_playback("s1", "p1", 1000, PlaybackKind::play));
    EXPECT_FALSE(srv.ticker_running("s1"));
}

TEST(Binding, DefaultsToSessionId) {
    TempDir dir;
    StreamServer srv({.data_dir = dir.path()});
    EXPECT_EQ(srv.video_of("s1"), "s1");
    srv.bind_session("s1", "clip");
    EXPECT_EQ(srv.video_of("s1"), "clip");
}
