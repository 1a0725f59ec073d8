#include <benchmark/benchmark.h>

#include "frisson/wire_protocol.hpp"

using namespace frisson;

static void BM_EncodeEda(benchmark::State& state) {
    const auto frame = wire::make_eda("s1", "p07", 1'700'000'123'456, 3.14159);
    for (auto _ : state) benchmark::DoNotOptimize(wire::encode(frame));
}
BENCHMARK(BM_EncodeEda);

static void BM_DecodeEda(benchmark::State& state) {
    const auto line = wire::encode(wire::make_eda("s1", "p07", 1'700'000'123'456, 3.14159));
    for (auto _ : state) benchmark::DoNotOptimize(wire::decode(line));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(line.size()));
}
BENCHMARK(BM_DecodeEda);

static void BM_EncodeAggregate(benchmark::State& state) {
    AggregateSeries agg{"clip", 5.0, 20, std::vector<double>(static_cast<std::size_t>(state.range(0)), 0.35)};
    const wire::Frame frame{wire::Op::aggregate, {}, agg};
    for (auto _ : state) benchmark::DoNotOptimize(wire::encode(frame));
}
BENCHMARK(BM_EncodeAggregate)->Arg(1500)->Arg(18000);

// Frames split at arbitrary boundaries, as a socket read would deliver them.
static void BM_LineBufferFeed(benchmark::State& state) {
    std::string stream;
    for (int i = 0; i < 1000; ++i) stream += wire::encode(wire::make_eda("s1", "p01", i * 200, 0.5));
    const auto chunk = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        wire::LineBuffer buf;
        std::size_t lines = 0;
        for (std::size_t off = 0; off < stream.size(); off += chunk)
            lines += buf.feed(std::string_view(stream).substr(off, chunk)).size();
        benchmark::DoNotOptimize(lines);
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_LineBufferFeed)->Arg(64)->Arg(1500)->Arg(8192);

static void BM_TopicMatch(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(wire::topic_match("eda/+/p12", "eda/session-42/p12"));
}
BENCHMARK(BM_TopicMatch);
