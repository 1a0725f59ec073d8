#pragma once

// Network front ends for StreamServer: newline-delimited frames over TCP and
// one-frame-per-message over WebSocket (for browsers). Plus a small blocking
// TCP client used by tools and tests.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "frisson/stream_server.hpp"
#include "frisson/wire_protocol.hpp"

namespace frisson::net {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// "host:port"; throws Error(invalid_parameter).
Endpoint parse_endpoint(std::string_view text);

class Listener {
public:
    /// Port 0 binds an ephemeral port; query it with tcp_port()/ws_port().
    Listener(server::StreamServer& server, Endpoint tcp, std::optional<Endpoint> websocket = std::nullopt,
             std::size_t threads = 2);
    ~Listener();

    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    std::uint16_t tcp_port() const;
    std::optional<std::uint16_t> ws_port() const;

    /// Closes listeners and connections and joins the I/O threads.
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Blocking line-protocol client.
class LineClient {
public:
    LineClient(const std::string& host, std::uint16_t port);
    ~LineClient();

    LineClient(const LineClient&) = delete;
    LineClient& operator=(const LineClient&) = delete;

    void send(const wire::Frame& frame);
    void send_raw(std::string_view bytes);

    /// Next complete line (without '\n'), or nullopt on timeout or EOF.
    std::optional<std::string> receive_line(std::chrono::milliseconds timeout);
    std::optional<wire::Frame> receive(std::chrono::milliseconds timeout);

    void close();

private:
    int fd_ = -1;
    wire::LineBuffer buffer_;
    std::vector<std::string> ready_;
    std::size_t next_ = 0;
};

}  // namespace frisson::net
