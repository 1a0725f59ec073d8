#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "frisson/error.hpp"
#include "frisson/net.hpp"
#include "frisson/storage.hpp"
#include "test_util.hpp"

using namespace frisson;
using namespace std::chrono_literals;
using testutil::TempDir;

namespace {

std::string err_code(const wire::Frame& f) {
    return f.op == wire::Op::err ? std::get<wire::ErrorPayload>(f.data).code : "";
}

}  // namespace

TEST(Endpoint, Parse) {
    const auto e = net::parse_endpoint("127.0.0.1:7878");
    EXPECT_EQ(e.host, "127.0.0.1");
    EXPECT_EQ(e.port, 7878);
    EXPECT_EQ(net::parse_endpoint("[::1]:80").host, "::1");
    EXPECT_THROW(net::parse_endpoint("nohost"), Error);
    EXPECT_THROW(net::parse_endpoint("h:99999"), Error);
    EXPECT_THROW(net::parse_endpoint("h:x"), Error);
}

TEST(Tcp, PublishSubscribeAndErrors) {
    TempDir dir;
    server::StreamServer srv({.data_dir = dir.path()});
    net::Listener listener(srv, {"127.0.0.1", 0});
    net::LineClient sub("127.0.0.1", listener.tcp_port());
    net::LineClient pub("127.0.0.1", listener.tcp_port());

    sub.send(wire::make_subscribe("eda/s1/+"));
    // Round trip on the subscriber connection guarantees the sub is registered.
    sub.send(wire::Frame{wire::Op::get_aggregate, {}, wire::GetAggregatePayload{"none"}});
    auto reply = sub.receive(2s);
    ASSERT_TRUE(reply);
    EXPECT_EQ(err_code(*reply), "not_found");

    // Two frames in one write, split mid-line across a second write.
    const std::string a = wire::encode(wire::make_eda("s1", "p1", 1, 0.25));
    const std::string b = wire::encode(wire::make_eda("s1", "p1", 2, 0.5));
    pub.send_raw(a + b.substr(0, 10));
    pub.send_raw(b.substr(10));
    auto m1 = sub.receive(2s);
    auto m2 = sub.receive(2s);
    ASSERT_TRUE(m1 && m2);
    EXPECT_EQ(std::get<wire::EdaPayload>(m1->data).t, 1);
    EXPECT_EQ(std::get<wire::EdaPayload>(m2->data).v, 0.5);

    pub.send_raw("{\"op\":\"pub\",\n");
    auto e = pub.receive(2s);
    ASSERT_TRUE(e);
    EXPECT_EQ(err_code(*e), "parse_error");
    pub.send(wire::make_eda("s1", "p1", 3, 1.0));
    auto m3 = sub.receive(2s);
    ASSERT_TRUE(m3);
    EXPECT_EQ(std::get<wire::EdaPayload>(m3->data).t, 3);
    listener.stop();
}

TEST(WebSocket, OneFramePerMessage) {
    TempDir dir;
    storage::write_aggregate(dir / "aggregates/vid.json", AggregateSeries{"vid", 5.0, 4, {0, 0.25, 0.5}});
    server::StreamServer srv({.data_dir = dir.path()});
    net::Listener listener(srv, {"127.0.0.1", 0}, net::Endpoint{"127.0.0.1", 0});
    ASSERT_TRUE(listener.ws_port());

    namespace beast = boost::beast;
    boost::asio::io_context ioc;
    boost::asio::ip::tcp::resolver resolver(ioc);
    beast::websocket::stream<boost::asio::ip::tcp::socket> ws(ioc);
    boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(*listener.ws_port())));
    ws.handshake("127.0.0.1", "/");
    ws.text(true);

    const std::string req = wire::encode(wire::Frame{wire::Op::get_aggregate, {}, wire::GetAggregatePayload{"vid"}});
    ws.write(boost::asio::buffer(req.substr(0, req.size() - 1)));  // newline optional
    beast::flat_buffer buf;
    ws.read(buf);
    const auto reply = wire::decode(beast::buffers_to_string(buf.data()));
    ASSERT_EQ(reply.op, wire::Op::aggregate);
    EXPECT_EQ(std::get<AggregateSeries>(reply.data).values, (std::vector<double>{0, 0.25, 0.5}));

    // A browser subscriber sees frames published over plain TCP.
    ws.write(boost::asio::buffer(wire::encode(wire::make_subscribe("playback/s1/+"))));
    ws.write(boost::asio::buffer(wire::encode(wire::Frame{wire::Op::get_aggregate, {}, wire::GetAggregatePayload{"x"}})));
    buf.clear();
    ws.read(buf);
    EXPECT_EQ(err_code(wire::decode(beast::buffers_to_string(buf.data()))), "not_found");

    net::LineClient tcp("127.0.0.1", listener.tcp_port());
    tcp.send(wire::make_playback("s1", "p1", 100, PlaybackKind::play));
    buf.clear();
    ws.read(buf);
    const auto msg = wire::decode(beast::buffers_to_string(buf.data()));
    EXPECT_EQ(msg.op, wire::Op::msg);
    EXPECT_EQ(msg.topic, "playback/s1/p1");

    ws.close(beast::websocket::close_code::normal);
    listener.stop();
}
