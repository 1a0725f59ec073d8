#pragma once

// Transport-agnostic core of the stream server: session buffers, topic
// routing, on-demand aggregation and playback-synchronized feedback ticking.
// Network front ends (see net.hpp) feed it decoded lines and receive encoded
// frames through FrameSink.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "frisson/feedback_map.hpp"
#include "frisson/session_align.hpp"
#include "frisson/signal_core.hpp"
#include "frisson/wire_protocol.hpp"

namespace frisson::server {

namespace fs = std::filesystem;

using ConnectionId = std::uint64_t;

/// Outbound side of a connection. deliver() must not block on the network;
/// it is called from whichever thread produced the frame.
class FrameSink {
public:
    virtual ~FrameSink() = default;
    virtual void deliver(const std::string& encoded_line) = 0;
};

/// Wall clock in milliseconds since the epoch.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

/// Emits vibration magnitudes in step with one viewer's playback. Pure state
/// machine: the server drives it from a thread, tests drive it directly.
///
/// Ticks are scheduled in video time: tick k fires once the viewer's video
/// position reaches k / tick_hz. Nothing fires while the viewer is stopped,
/// and a resumed viewer continues with the tick after the last one emitted.
class FeedbackTicker {
public:
    FeedbackTicker(AggregateSeries aggregate, double tick_hz, DesignParams params = {});

    /// Appends a play/stop event. Returns false (and ignores the event) when
    /// it breaks alternation or timestamp order.
    bool on_playback(const PlaybackEvent& event);

    std::optional<wire::FeedbackPayload> poll(std::int64_t now_ms);

    /// Wall time at which the next tick becomes due, or nullopt while stopped.
    std::optional<std::int64_t> next_due_ms(std::int64_t now_ms) const;

    std::size_t next_tick() const noexcept { return next_tick_; }
    const AggregateSeries& aggregate() const noexcept { return aggregate_; }

private:
    bool playing(std::int64_t now_ms) const;

    AggregateSeries aggregate_;
    double tick_hz_;
    DesignParams params_;
    std::vector<PlaybackEvent> events_;
    std::size_t next_tick_ = 0;
};

struct ServerOptions {
    fs::path data_dir = "data";
    PipelineConfig pipeline;
    DesignParams design;
    /// Feedback tick rate; 0 means the aggregate's grid rate.
    double tick_hz = 0.0;
    Clock clock = system_clock_ms;
};

struct SkipReport {
    std::string participant;
    std::string reason;
};

struct FinalizeResult {
    AggregateSeries aggregate;
    std::vector<std::string> included;
    std::vector<SkipReport> skipped;
};

class StreamServer {
public:
    explicit StreamServer(ServerOptions options);
    ~StreamServer();

    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    ConnectionId connect(std::shared_ptr<FrameSink> sink);
    void disconnect(ConnectionId id);

    /// Decodes one line and dispatches it. Undecodable lines are answered
    /// with an err frame carrying parse_error or protocol_violation.
    void handle_line(ConnectionId id, std::string_view line);
    void handle_frame(ConnectionId id, const wire::Frame& frame);

    /// Grids, processes and aggregates every participant of a session, then
    /// persists sessions, per-viewer series and the aggregate. Participants
    /// without usable data, or whose grid length differs from the most
    /// common one, are skipped and reported. Throws Error(insufficient_data)
    /// when nobody is left.
    FinalizeResult finalize_session(const std::string& session_id, const std::string& video_id,
                                    const PipelineConfig& cfg);
    FinalizeResult finalize_session(const std::string& session_id, const std::string& video_id) {
        return finalize_session(session_id, video_id, options_.pipeline);
    }

    /// Associates a session with a video for get_aggregate and feedback.
    /// Unbound sessions use their own id as the video id.
    void bind_session(const std::string& session_id, const std::string& video_id);
    std::string video_of(const std::string& session_id) const;

    /// Stored aggregate, else the aggregate of stored per-viewer series.
    std::optional<AggregateSeries> stored_aggregate(const std::string& video_id) const;
    /// stored_aggregate(), else finalizes a live session bound to the video.
    /// Throws Error(not_found).
    AggregateSeries get_aggregate(const std::string& video_id);

    std::vector<std::string> participants(const std::string& session_id) const;
    std::vector<EdaSample> eda_snapshot(const std::string& session_id, const std::string& participant) const;
    std::vector<PlaybackEvent> playback_snapshot(const std::string& session_id,
                                                 const std::string& participant) const;
    bool ticker_running(const std::string& session_id) const;

    /// Sends an err frame to one connection.
    void send_error(ConnectionId id, std::string_view code, std::string msg);

    /// Joins all feedback tickers and prevents new ones from starting. Front
    /// ends call this before tearing down their connections.
    void stop_tickers();

    const ServerOptions& options() const noexcept { return options_; }

private:
    struct Participant {
        std::vector<EdaSample> eda;
        std::vector<PlaybackEvent> events;
    };
    struct Session {
        mutable std::mutex mutex;
        std::map<std::string, Participant> participants;
    };
    struct Connection {
        std::shared_ptr<FrameSink> sink;
        std::set<std::string> patterns;
    };
    struct TickerSlot;

    std::shared_ptr<Session> session(const std::string& id, bool create);
    void send(ConnectionId id, const wire::Frame& frame);
    void fan_out(const wire::Frame& msg);
    bool has_subscriber(std::string_view topic) const;
    void on_eda(ConnectionId id, const wire::Frame& frame, const wire::TopicInfo& info);
    void on_playback(ConnectionId id, const wire::Frame& frame, const wire::TopicInfo& info);
    void maybe_tick(ConnectionId id, const wire::TopicInfo& info, const PlaybackEvent& event,
                    const std::vector<PlaybackEvent>& history);

    ServerOptions options_;

    std::atomic<ConnectionId> next_id_{1};
    mutable std::shared_mutex connections_mutex_;
    std::unordered_map<ConnectionId, Connection> connections_;

    mutable std::shared_mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;

    mutable std::mutex bindings_mutex_;
    std::unordered_map<std::string, std::string> bindings_;

    std::mutex storage_mutex_;

    mutable std::mutex tickers_mutex_;
    std::unordered_map<std::string, std::unique_ptr<TickerSlot>> tickers_;
    bool tickers_enabled_ = true;
};

}  // namespace frisson::server
