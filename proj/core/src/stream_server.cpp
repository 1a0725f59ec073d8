#include "frisson/stream_server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <stop_token>
#include <thread>

#include "frisson/error.hpp"
#include "frisson/storage.hpp"

namespace frisson::server {

namespace {

bool safe_segment(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

bool follows(const std::vector<PlaybackEvent>& history, const PlaybackEvent& ev) {
    if (history.empty()) return ev.kind == PlaybackKind::play;
    return ev.kind != history.back().kind && ev.t_wall_ms > history.back().t_wall_ms;
}

}  // namespace

std::int64_t system_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// ---- FeedbackTicker -------------------------------------------------------

FeedbackTicker::FeedbackTicker(AggregateSeries aggregate, double tick_hz, DesignParams params)
    : aggregate_(std::move(aggregate)), tick_hz_(tick_hz), params_(params) {
    if (!(tick_hz_ > 0.0)) throw Error(ErrorCode::invalid_parameter, "tick rate must be > 0");
    if (aggregate_.values.empty()) throw Error(ErrorCode::invalid_input, "empty aggregate");
    params_.validate();
}

bool FeedbackTicker::on_playback(const PlaybackEvent& event) {
    if (!follows(events_, event)) return false;
    events_.push_back(event);
    return true;
}

bool FeedbackTicker::playing(std::int64_t now_ms) const {
    // Last event at or before now decides.
    for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
        if (it->t_wall_ms <= now_ms) return it->kind == PlaybackKind::play;
    }
    return false;
}

std::optional<wire::FeedbackPayload> FeedbackTicker::poll(std::int64_t now_ms) {
    if (!playing(now_ms)) return std::nullopt;
    const auto tl = build_timeline(events_);
    const std::size_t k = grid_index(video_time(tl, now_ms), tick_hz_);
    if (k < next_tick_) return std::nullopt;
    next_tick_ = k + 1;
    const double a = magnitude_at(aggregate_, static_cast<double>(k) / tick_hz_);
    return wire::FeedbackPayload{now_ms, a, map_vibration(a, params_)};
}

std::optional<std::int64_t> FeedbackTicker::next_due_ms(std::int64_t now_ms) const {
    if (!playing(now_ms)) return std::nullopt;
    const auto tl = build_timeline(events_);
    const auto target_ms =
        static_cast<std::int64_t>(std::ceil(static_cast<double>(next_tick_) * 1000.0 / tick_hz_ - 1e-6));
    return now_ms + std::max<std::int64_t>(0, target_ms - video_time_ms(tl, now_ms));
}

// ---- StreamServer ---------------------------------------------------------

struct StreamServer::TickerSlot {
    TickerSlot(std::string s, std::string d, FeedbackTicker t)
        : session(std::move(s)), driver(std::move(d)), ticker(std::move(t)) {}

    std::string session;
    std::string driver;
    std::mutex mutex;
    std::condition_variable_any cv;
    bool dirty = false;
    FeedbackTicker ticker;
    std::jthread thread;  // keep last
};

StreamServer::StreamServer(ServerOptions options) : options_(std::move(options)) {
    options_.pipeline.validate();
    options_.design.validate();
    if (!options_.clock) options_.clock = system_clock_ms;
}

StreamServer::~StreamServer() { stop_tickers(); }

void StreamServer::stop_tickers() {
    std::unordered_map<std::string, std::unique_ptr<TickerSlot>> tickers;
    {
        std::lock_guard lk(tickers_mutex_);
        tickers_enabled_ = false;
        tickers.swap(tickers_);
    }
    tickers.clear();  // joins the threads
}

ConnectionId StreamServer::connect(std::shared_ptr<FrameSink> sink) {
    const ConnectionId id = next_id_++;
    std::unique_lock lk(connections_mutex_);
    connections_.emplace(id, Connection{std::move(sink), {}});
    return id;
}

void StreamServer::disconnect(ConnectionId id) {
    std::unique_lock lk(connections_mutex_);
    connections_.erase(id);
}

void StreamServer::send(ConnectionId id, const wire::Frame& frame) {
    std::shared_ptr<FrameSink> sink;
    {
        std::shared_lock lk(connections_mutex_);
        auto it = connections_.find(id);
        if (it == connections_.end()) return;
        sink = it->second.sink;
    }
    sink->deliver(wire::encode(frame));
}

void StreamServer::send_error(ConnectionId id, std::string_view code, std::string msg) {
    send(id, wire::make_error(code, std::move(msg)));
}

void StreamServer::fan_out(const wire::Frame& msg) {
    const std::string line = wire::encode(msg);
    std::vector<std::shared_ptr<FrameSink>> targets;
    {
        std::shared_lock lk(connections_mutex_);
        for (const auto& [id, conn] : connections_) {
            for (const auto& pattern : conn.patterns) {
                if (wire::topic_match(pattern, msg.topic)) {
                    targets.push_back(conn.sink);
                    break;
                }
            }
        }
    }
    for (const auto& sink : targets) sink->deliver(line);
}

bool StreamServer::has_subscriber(std::string_view topic) const {
    std::shared_lock lk(connections_mutex_);
    for (const auto& [id, conn] : connections_) {
        for (const auto& pattern : conn.patterns) {
            if (wire::topic_match(pattern, topic)) return true;
        }
    }
    return false;
}

std::shared_ptr<StreamServer::Session> StreamServer::session(const std::string& id, bool create) {
    {
        std::shared_lock lk(sessions_mutex_);
        auto it = sessions_.find(id);
        if (it != sessions_.end()) return it->second;
    }
    if (!create) return nullptr;
    std::unique_lock lk(sessions_mutex_);
    auto& slot = sessions_[id];
    if (!slot) slot = std::make_shared<Session>();
    return slot;
}

void StreamServer::handle_line(ConnectionId id, std::string_view line) {
    if (line.empty() || line == "\r") return;
    wire::Frame frame;
    try {
        frame = wire::decode(line);
    } catch (const Error& e) {
        send_error(id, to_string(e.code()), e.what());
        return;
    }
    handle_frame(id, frame);
}

void StreamServer::handle_frame(ConnectionId id, const wire::Frame& frame) {
    switch (frame.op) {
        case wire::Op::pub: {
            const auto info = wire::classify_topic(frame.topic);
            if (!info) {
                send_error(id, "protocol_violation", "not a publishable topic: " + frame.topic);
                return;
            }
            switch (info->kind) {
                case wire::TopicKind::eda: on_eda(id, frame, *info); break;
                case wire::TopicKind::playback: on_playback(id, frame, *info); break;
                case wire::TopicKind::feedback: fan_out(wire::Frame{wire::Op::msg, frame.topic, frame.data}); break;
            }
            return;
        }
        case wire::Op::sub: {
            std::unique_lock lk(connections_mutex_);
            auto it = connections_.find(id);
            if (it != connections_.end()) it->second.patterns.insert(frame.topic);
            return;
        }
        case wire::Op::get_aggregate: {
            const auto& video = std::get<wire::GetAggregatePayload>(frame.data).video;
            try {
                send(id, wire::Frame{wire::Op::aggregate, {}, get_aggregate(video)});
            } catch (const Error& e) {
                send_error(id, to_string(e.code()), e.what());
            }
            return;
        }
        case wire::Op::msg:
        case wire::Op::aggregate:
        case wire::Op::err:
            send_error(id, "protocol_violation",
                       "op '" + std::string(wire::to_string(frame.op)) + "' is only sent by the server");
            return;
    }
}

void StreamServer::on_eda(ConnectionId id, const wire::Frame& frame, const wire::TopicInfo& info) {
    const auto& payload = std::get<wire::EdaPayload>(frame.data);
    auto s = session(info.session, true);
    std::int64_t previous = 0;
    bool regression = false;
    {
        std::lock_guard lk(s->mutex);
        auto& buffer = s->participants[info.participant].eda;
        if (!buffer.empty() && payload.t < buffer.back().t_wall_ms) {
            regression = true;
            previous = buffer.back().t_wall_ms;
        } else {
            buffer.push_back({payload.t, payload.v});
        }
    }
    if (regression) {
        send_error(id, "ts_regression",
                   frame.topic + ": t=" + std::to_string(payload.t) + " precedes " + std::to_string(previous));
        return;
    }
    fan_out(wire::Frame{wire::Op::msg, frame.topic, frame.data});
}

void StreamServer::on_playback(ConnectionId id, const wire::Frame& frame, const wire::TopicInfo& info) {
    const auto& payload = std::get<wire::PlaybackPayload>(frame.data);
    const PlaybackEvent event{payload.t, payload.e};
    auto s = session(info.session, true);
    std::vector<PlaybackEvent> history;
    bool accepted = false;
    {
        std::lock_guard lk(s->mutex);
        auto& events = s->participants[info.participant].events;
        if (follows(events, event)) {
            events.push_back(event);
            accepted = true;
            history = events;
        }
    }
    if (!accepted) {
        send_error(id, "protocol_violation",
                   frame.topic + ": '" + std::string(to_string(event.kind)) + "' at t=" +
                       std::to_string(event.t_wall_ms) + " breaks play/stop alternation or ordering");
        return;
    }
    fan_out(wire::Frame{wire::Op::msg, frame.topic, frame.data});
    maybe_tick(id, info, event, history);
}

void StreamServer::maybe_tick(ConnectionId id, const wire::TopicInfo& info, const PlaybackEvent& event,
                              const std::vector<PlaybackEvent>& history) {
    std::lock_guard lk(tickers_mutex_);
    if (auto it = tickers_.find(info.session); it != tickers_.end()) {
        TickerSlot& slot = *it->second;
        if (slot.driver != info.participant) return;
        {
            std::lock_guard slot_lk(slot.mutex);
            slot.ticker.on_playback(event);
            slot.dirty = true;
        }
        slot.cv.notify_all();
        return;
    }
    // A ticker starts on a play event once somebody listens for feedback.
    if (!tickers_enabled_) return;
    if (event.kind != PlaybackKind::play || !has_subscriber(wire::feedback_topic(info.session))) return;

    auto agg = stored_aggregate(video_of(info.session));
    if (!agg) {
        send_error(id, "not_found", "no aggregate for video '" + video_of(info.session) + "'; feedback not started");
        return;
    }
    const double hz = options_.tick_hz > 0.0 ? options_.tick_hz : agg->grid_hz;
    FeedbackTicker ticker(std::move(*agg), hz, options_.design);
    for (const auto& ev : history) ticker.on_playback(ev);

    auto slot = std::make_unique<TickerSlot>(info.session, info.participant, std::move(ticker));
    TickerSlot* raw = slot.get();
    raw->thread = std::jthread([this, raw](std::stop_token stop) {
        std::unique_lock slot_lk(raw->mutex);
        while (!stop.stop_requested()) {
            const std::int64_t now = options_.clock();
            if (auto payload = raw->ticker.poll(now)) {
                const wire::Frame msg{wire::Op::msg, wire::feedback_topic(raw->session), *payload};
                slot_lk.unlock();
                fan_out(msg);
                slot_lk.lock();
                continue;
            }
            std::int64_t wait_ms = 100;
            if (auto due = raw->ticker.next_due_ms(now)) wait_ms = std::clamp<std::int64_t>(*due - now, 1, 100);
            raw->dirty = false;
            raw->cv.wait_for(slot_lk, stop, std::chrono::milliseconds(wait_ms), [raw] { return raw->dirty; });
        }
    });
    tickers_.emplace(info.session, std::move(slot));
}

bool StreamServer::ticker_running(const std::string& session_id) const {
    std::lock_guard lk(tickers_mutex_);
    return tickers_.count(session_id) > 0;
}

void StreamServer::bind_session(const std::string& session_id, const std::string& video_id) {
    std::lock_guard lk(bindings_mutex_);
    bindings_[session_id] = video_id;
}

std::string StreamServer::video_of(const std::string& session_id) const {
    std::lock_guard lk(bindings_mutex_);
    auto it = bindings_.find(session_id);
    return it == bindings_.end() ? session_id : it->second;
}

std::vector<std::string> StreamServer::participants(const std::string& session_id) const {
    std::shared_ptr<Session> s;
    {
        std::shared_lock lk(sessions_mutex_);
        auto it = sessions_.find(session_id);
        if (it == sessions_.end()) return {};
        s = it->second;
    }
    std::lock_guard lk(s->mutex);
    std::vector<std::string> out;
    for (const auto& [name, p] : s->participants) out.push_back(name);
    return out;
}

std::vector<EdaSample> StreamServer::eda_snapshot(const std::string& session_id,
                                                  const std::string& participant) const {
    std::shared_lock lk(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return {};
    std::lock_guard slk(it->second->mutex);
    auto p = it->second->participants.find(participant);
    return p == it->second->participants.end() ? std::vector<EdaSample>{} : p->second.eda;
}

std::vector<PlaybackEvent> StreamServer::playback_snapshot(const std::string& session_id,
                                                           const std::string& participant) const {
    std::shared_lock lk(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return {};
    std::lock_guard slk(it->second->mutex);
    auto p = it->second->participants.find(participant);
    return p == it->second->participants.end() ? std::vector<PlaybackEvent>{} : p->second.events;
}

FinalizeResult StreamServer::finalize_session(const std::string& session_id, const std::string& video_id,
                                              const PipelineConfig& cfg) {
    cfg.validate();
    if (!safe_segment(session_id) || !safe_segment(video_id))
        throw Error(ErrorCode::invalid_parameter, "session and video ids must be [A-Za-z0-9_-]+");
    auto s = session(session_id, false);
    if (!s) throw Error(ErrorCode::insufficient_data, "unknown session '" + session_id + "'");

    std::map<std::string, Participant> snapshot;
    {
        std::lock_guard lk(s->mutex);
        snapshot = s->participants;
    }

    FinalizeResult result;
    std::vector<std::pair<std::string, FrissonSeries>> processed;
    for (const auto& [name, p] : snapshot) {
        if (p.eda.empty()) {
            result.skipped.push_back({name, "no EDA samples"});
            continue;
        }
        if (p.events.empty()) {
            result.skipped.push_back({name, "no playback events"});
            continue;
        }
        try {
            const auto tl = build_timeline(p.events);
            const auto grid = to_grid(p.eda, cfg.sample_rate_hz, tl, cfg.sample_rate_hz);
            processed.emplace_back(name, process_session(grid.as_eda(), cfg));
        } catch (const Error& e) {
            result.skipped.push_back({name, e.what()});
        }
    }

    // Keep viewers whose grid length is the most common one (ties: longest).
    std::map<std::size_t, std::size_t> length_votes;
    for (const auto& [name, series] : processed) ++length_votes[series.size()];
    std::size_t mode = 0;
    std::size_t votes = 0;
    for (const auto& [len, count] : length_votes) {
        if (count >= votes) {
            mode = len;
            votes = count;
        }
    }
    std::vector<FrissonSeries> kept;
    std::vector<std::string> kept_names;
    for (auto& [name, series] : processed) {
        if (series.size() != mode) {
            result.skipped.push_back({name, "partial viewing: " + std::to_string(series.size()) + " of " +
                                                std::to_string(mode) + " grid points"});
            continue;
        }
        kept.push_back(std::move(series));
        kept_names.push_back(name);
    }
    if (kept.empty()) {
        std::string why = "no participant of session '" + session_id + "' has usable data";
        for (const auto& skip : result.skipped) why += "; " + skip.participant + ": " + skip.reason;
        throw Error(ErrorCode::insufficient_data, why);
    }

    result.aggregate = aggregate(video_id, kept);
    result.included = kept_names;

    std::lock_guard io(storage_mutex_);
    const fs::path root = options_.data_dir;
    for (const auto& [name, p] : snapshot) {
        if (!safe_segment(name)) continue;
        storage::SessionRecord rec{name, video_id, cfg.sample_rate_hz, p.eda, p.events};
        storage::write_session(root / "sessions" / session_id / name, rec);
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        storage::write_frisson(root / "frisson" / video_id / session_id / (kept_names[i] + ".json"),
                               storage::FrissonRecord{kept_names[i], video_id, kept[i]});
    }
    storage::write_aggregate(root / "aggregates" / (video_id + ".json"), result.aggregate);
    bind_session(session_id, video_id);
    return result;
}

std::optional<AggregateSeries> StreamServer::stored_aggregate(const std::string& video_id) const {
    if (!safe_segment(video_id)) return std::nullopt;
    const fs::path root = options_.data_dir;
    const fs::path agg_file = root / "aggregates" / (video_id + ".json");
    if (fs::is_regular_file(agg_file)) return storage::read_aggregate(agg_file);

    const fs::path series_dir = root / "frisson" / video_id;
    if (!fs::is_directory(series_dir)) return std::nullopt;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(series_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (files.empty()) return std::nullopt;
    std::sort(files.begin(), files.end());
    std::vector<FrissonSeries> series;
    for (const auto& f : files) series.push_back(storage::read_frisson(f).series);
    return aggregate(video_id, series);
}

AggregateSeries StreamServer::get_aggregate(const std::string& video_id) {
    if (auto stored = stored_aggregate(video_id)) return *stored;

    std::vector<std::string> candidates;
    {
        std::shared_lock lk(sessions_mutex_);
        for (const auto& [id, s] : sessions_) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end());
    for (const auto& id : candidates) {
        if (video_of(id) != video_id) continue;
        try {
            return finalize_session(id, video_id).aggregate;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::insufficient_data) throw;
        }
    }
    throw Error(ErrorCode::not_found, "no aggregate or session data for video '" + video_id + "'");
}

}  // namespace frisson::server
