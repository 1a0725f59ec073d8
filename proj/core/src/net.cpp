#include "frisson/net.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "frisson/error.hpp"

namespace frisson::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class SessionBase : public server::FrameSink {
public:
    virtual void close_async() = 0;
};

void dispatch_lines(server::StreamServer& srv, server::ConnectionId id, wire::LineBuffer& lines,
                    std::string_view bytes) {
    for (auto& line : lines.feed(bytes)) {
        if (line.overflowed) {
            srv.send_error(id, "parse_error", "line exceeds maximum frame size");
        } else {
            srv.handle_line(id, line.text);
        }
    }
}

class TcpSession final : public SessionBase, public std::enable_shared_from_this<TcpSession> {
public:
    TcpSession(tcp::socket socket, server::StreamServer& srv) : socket_(std::move(socket)), server_(srv) {}

    void start() {
        id_ = server_.connect(shared_from_this());
        read();
    }

    void deliver(const std::string& line) override {
        asio::post(socket_.get_executor(), [self = shared_from_this(), line] {
            if (self->closed_) return;
            self->outbox_.push_back(line);
            if (self->outbox_.size() == 1) self->write();
        });
    }

    void close_async() override {
        asio::post(socket_.get_executor(), [self = shared_from_this()] { self->close(); });
    }

private:
    void read() {
        socket_.async_read_some(asio::buffer(buf_), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
            if (ec) return self->close();
            dispatch_lines(self->server_, self->id_, self->lines_, std::string_view(self->buf_.data(), n));
            self->read();
        });
    }

    void write() {
        asio::async_write(socket_, asio::buffer(outbox_.front()),
                          [self = shared_from_this()](beast::error_code ec, std::size_t) {
                              if (ec || self->closed_) return self->close();
                              self->outbox_.pop_front();
                              if (!self->outbox_.empty()) self->write();
                          });
    }

    void close() {
        if (closed_) return;
        closed_ = true;
        server_.disconnect(id_);
        beast::error_code ec;
        socket_.shutdown(tcp::socket::shutdown_both, ec);
        socket_.close(ec);
    }

    tcp::socket socket_;
    server::StreamServer& server_;
    server::ConnectionId id_ = 0;
    std::array<char, 8192> buf_{};
    wire::LineBuffer lines_;
    std::deque<std::string> outbox_;
    bool closed_ = false;
};

class WsSession final : public SessionBase, public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, server::StreamServer& srv) : ws_(std::move(socket)), server_(srv) {}

    void start() {
        ws_.text(true);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->id_ = self->server_.connect(self);
            self->connected_ = true;
            self->read();
        });
    }

    void deliver(const std::string& line) override {
        asio::post(ws_.get_executor(), [self = shared_from_this(), line] {
            if (self->closed_) return;
            self->outbox_.push_back(line);
            if (self->outbox_.size() == 1) self->write();
        });
    }

    void close_async() override {
        asio::post(ws_.get_executor(), [self = shared_from_this()] { self->close(); });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->close();
            std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            // A message carries one frame; the trailing newline is optional.
            if (text.empty() || text.back() != '\n') text.push_back('\n');
            dispatch_lines(self->server_, self->id_, self->lines_, text);
            self->read();
        });
    }

    void write() {
        ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec || self->closed_) return self->close();
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) self->write();
        });
    }

    void close() {
        if (closed_) return;
        closed_ = true;
        if (connected_) server_.disconnect(id_);
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

    websocket::stream<beast::tcp_stream> ws_;
    server::StreamServer& server_;
    server::ConnectionId id_ = 0;
    beast::flat_buffer buffer_;
    wire::LineBuffer lines_;
    std::deque<std::string> outbox_;
    bool connected_ = false;
    bool closed_ = false;
};

tcp::endpoint resolve(asio::io_context& ioc, const Endpoint& ep) {
    tcp::resolver resolver(ioc);
    beast::error_code ec;
    auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
    if (ec || results.empty()) throw Error(ErrorCode::io_error, "cannot resolve " + ep.host + ": " + ec.message());
    return results.begin()->endpoint();
}

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0)
        throw Error(ErrorCode::invalid_parameter, "expected host:port, got '" + std::string(text) + "'");
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    if (ep.host.size() > 2 && ep.host.front() == '[' && ep.host.back() == ']') ep.host = ep.host.substr(1, ep.host.size() - 2);
    const auto port = text.substr(colon + 1);
    unsigned value = 0;
    const auto res = std::from_chars(port.data(), port.data() + port.size(), value);
    if (res.ec != std::errc{} || res.ptr != port.data() + port.size() || value > 65535)
        throw Error(ErrorCode::invalid_parameter, "bad port in '" + std::string(text) + "'");
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

struct Listener::Impl {
    Impl(server::StreamServer& srv, std::size_t n_threads)
        : server(srv), tcp_acceptor(asio::make_strand(ioc)), threads_wanted(std::max<std::size_t>(1, n_threads)) {}

    template <class Session>
    void accept(tcp::acceptor& acceptor) {
        acceptor.async_accept(asio::make_strand(ioc), [this, &acceptor](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // acceptor closed
            auto session = std::make_shared<Session>(std::move(socket), server);
            {
                std::lock_guard lk(sessions_mutex);
                std::erase_if(sessions, [](const auto& w) { return w.expired(); });
                sessions.push_back(session);
            }
            session->start();
            accept<Session>(acceptor);
        });
    }

    server::StreamServer& server;
    asio::io_context ioc;
    tcp::acceptor tcp_acceptor;
    std::optional<tcp::acceptor> ws_acceptor;
    std::size_t threads_wanted;
    std::vector<std::thread> threads;
    std::mutex sessions_mutex;
    std::vector<std::weak_ptr<SessionBase>> sessions;
    std::mutex stop_mutex;
    std::condition_variable stop_cv;
    bool stopped = false;
};

namespace {

void open_acceptor(tcp::acceptor& acceptor, const tcp::endpoint& ep) {
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen(asio::socket_base::max_listen_connections);
}

}  // namespace

Listener::Listener(server::StreamServer& srv, Endpoint tcp_ep, std::optional<Endpoint> ws_ep, std::size_t threads)
    : impl_(std::make_unique<Impl>(srv, threads)) {
    try {
        open_acceptor(impl_->tcp_acceptor, resolve(impl_->ioc, tcp_ep));
        if (ws_ep) {
            impl_->ws_acceptor.emplace(asio::make_strand(impl_->ioc));
            open_acceptor(*impl_->ws_acceptor, resolve(impl_->ioc, *ws_ep));
        }
    } catch (const boost::system::system_error& e) {
        throw Error(ErrorCode::io_error, std::string("cannot listen: ") + e.what());
    }
    impl_->accept<TcpSession>(impl_->tcp_acceptor);
    if (impl_->ws_acceptor) impl_->accept<WsSession>(*impl_->ws_acceptor);
    for (std::size_t i = 0; i < impl_->threads_wanted; ++i) {
        impl_->threads.emplace_back([this] { impl_->ioc.run(); });
    }
}

Listener::~Listener() { stop(); }

std::uint16_t Listener::tcp_port() const { return impl_->tcp_acceptor.local_endpoint().port(); }

std::optional<std::uint16_t> Listener::ws_port() const {
    if (!impl_->ws_acceptor) return std::nullopt;
    return impl_->ws_acceptor->local_endpoint().port();
}

void Listener::stop() {
    {
        std::lock_guard lk(impl_->stop_mutex);
        if (impl_->stopped) return;
        impl_->stopped = true;
    }
    impl_->server.stop_tickers();
    asio::post(impl_->ioc, [this] {
        beast::error_code ec;
        impl_->tcp_acceptor.close(ec);
        if (impl_->ws_acceptor) impl_->ws_acceptor->close(ec);
    });
    {
        std::lock_guard lk(impl_->sessions_mutex);
        for (auto& w : impl_->sessions) {
            if (auto s = w.lock()) s->close_async();
        }
    }
    // Let the close handlers run before tearing the loop down.
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    impl_->ioc.stop();
    for (auto& t : impl_->threads) {
        if (t.joinable()) t.join();
    }
    impl_->stop_cv.notify_all();
}

void Listener::wait() {
    std::unique_lock lk(impl_->stop_mutex);
    impl_->stop_cv.wait(lk, [this] { return impl_->stopped; });
}

// ---- LineClient -------------------------------------------------------------

LineClient::LineClient(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0)
        throw Error(ErrorCode::io_error, "cannot resolve " + host + ": " + gai_strerror(rc));
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd_ < 0) continue;
        if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd_);
        fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw Error(ErrorCode::io_error, "cannot connect to " + host + ":" + port_str);
}

LineClient::~LineClient() { close(); }

void LineClient::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

void LineClient::send(const wire::Frame& frame) { send_raw(wire::encode(frame)); }

void LineClient::send_raw(std::string_view bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::io_error, std::string("send failed: ") + std::strerror(errno));
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::optional<std::string> LineClient::receive_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (next_ >= ready_.size()) {
        ready_.clear();
        next_ = 0;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() < 0 || fd_ < 0) return std::nullopt;
        pollfd pfd{fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) return std::nullopt;
        char buf[8192];
        const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
        if (n <= 0) return std::nullopt;
        for (auto& line : buffer_.feed(std::string_view(buf, static_cast<std::size_t>(n)))) {
            if (!line.overflowed) ready_.push_back(std::move(line.text));
        }
    }
    return std::move(ready_[next_++]);
}

std::optional<wire::Frame> LineClient::receive(std::chrono::milliseconds timeout) {
    auto line = receive_line(timeout);
    if (!line) return std::nullopt;
    return wire::decode(*line);
}

}  // namespace frisson::net
