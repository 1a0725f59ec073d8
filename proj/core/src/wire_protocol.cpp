#include "frisson/wire_protocol.hpp"

#include <cmath>

#include "frisson/error.hpp"
#include "json_detail.hpp"

namespace frisson::wire {

namespace {

using detail::ojson;

bool is_lower_ident(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!((c >= 'a' && c <= 'z') || c == '_')) return false;
    }
    return true;
}

bool is_segment(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

std::vector<std::string_view> split(std::string_view topic) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto slash = topic.find('/', start);
        if (slash == std::string_view::npos) {
            parts.push_back(topic.substr(start));
            return parts;
        }
        parts.push_back(topic.substr(start, slash - start));
        start = slash + 1;
    }
}

[[noreturn]] void bad_frame(const std::string& msg) { throw Error(ErrorCode::encode_error, msg); }
[[noreturn]] void violation(const std::string& msg) { throw Error(ErrorCode::protocol_violation, msg); }

// Which payload alternative a (op, topic) pair requires.
std::size_t expected_payload(Op op, std::string_view topic) {
    switch (op) {
        case Op::sub: return 0;
        case Op::get_aggregate: return 4;
        case Op::aggregate: return 5;
        case Op::err: return 6;
        case Op::pub:
        case Op::msg: {
            const auto info = classify_topic(topic);
            if (!info) return std::variant_npos;
            switch (info->kind) {
                case TopicKind::eda: return 1;
                case TopicKind::playback: return 2;
                case TopicKind::feedback: return 3;
            }
        }
    }
    return std::variant_npos;
}

bool has_topic(Op op) { return op == Op::pub || op == Op::sub || op == Op::msg; }

std::optional<Op> parse_op(std::string_view s) {
    if (s == "pub") return Op::pub;
    if (s == "sub") return Op::sub;
    if (s == "msg") return Op::msg;
    if (s == "get_aggregate") return Op::get_aggregate;
    if (s == "aggregate") return Op::aggregate;
    if (s == "err") return Op::err;
    return std::nullopt;
}

void expect_keys(const nlohmann::json& obj, std::initializer_list<const char*> keys, std::string_view what) {
    if (!obj.is_object()) violation(std::string(what) + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) violation("unknown field '" + it.key() + "' in " + std::string(what));
    }
    for (const char* k : keys) {
        if (!obj.contains(k)) violation(std::string("missing field '") + k + "' in " + std::string(what));
    }
}

std::int64_t get_time(const nlohmann::json& v) {
    if (v.is_number_unsigned()) {
        const auto u = v.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX)) violation("timestamp out of range");
        return static_cast<std::int64_t>(u);
    }
    if (v.is_number_integer()) {
        const auto t = v.get<std::int64_t>();
        if (t < 0) violation("timestamp must be >= 0");
        return t;
    }
    violation("timestamp must be an integer number of milliseconds");
}

double get_finite(const nlohmann::json& v, std::string_view name) {
    if (!v.is_number()) violation(std::string(name) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) violation(std::string(name) + " must be finite");
    return x;
}

double get_unit(const nlohmann::json& v, std::string_view name) {
    const double x = get_finite(v, name);
    if (x < 0.0 || x > 1.0) violation(std::string(name) + " must be in [0, 1]");
    return x;
}

std::string get_string(const nlohmann::json& v, std::string_view name) {
    if (!v.is_string()) violation(std::string(name) + " must be a string");
    return v.get<std::string>();
}

}  // namespace

std::string_view to_string(Op op) noexcept {
    switch (op) {
        case Op::pub: return "pub";
        case Op::sub: return "sub";
        case Op::msg: return "msg";
        case Op::get_aggregate: return "get_aggregate";
        case Op::aggregate: return "aggregate";
        case Op::err: return "err";
    }
    return "";
}

bool valid_topic(std::string_view topic, bool allow_wildcards) {
    const auto parts = split(topic);
    if (!is_lower_ident(parts[0])) return false;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        if (allow_wildcards && parts[i] == "+") continue;
        if (!is_segment(parts[i])) return false;
    }
    return true;
}

std::optional<TopicInfo> classify_topic(std::string_view topic) {
    if (!valid_topic(topic)) return std::nullopt;
    const auto parts = split(topic);
    if ((parts[0] == "eda" || parts[0] == "playback") && parts.size() == 3) {
        return TopicInfo{parts[0] == "eda" ? TopicKind::eda : TopicKind::playback, std::string(parts[1]),
                         std::string(parts[2])};
    }
    if (parts[0] == "feedback" && parts.size() == 2) {
        return TopicInfo{TopicKind::feedback, std::string(parts[1]), {}};
    }
    return std::nullopt;
}

std::string eda_topic(std::string_view session, std::string_view participant) {
    return "eda/" + std::string(session) + "/" + std::string(participant);
}

std::string playback_topic(std::string_view session, std::string_view participant) {
    return "playback/" + std::string(session) + "/" + std::string(participant);
}

std::string feedback_topic(std::string_view session) { return "feedback/" + std::string(session); }

bool topic_match(std::string_view pattern, std::string_view topic) {
    const auto p = split(pattern);
    const auto t = split(topic);
    if (p.size() != t.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == "+") {
            if (t[i].empty()) return false;
            continue;
        }
        if (p[i] != t[i]) return false;
    }
    return true;
}

void validate(const Frame& f) {
    if (has_topic(f.op)) {
        if (!valid_topic(f.topic, f.op == Op::sub)) bad_frame("invalid topic '" + f.topic + "'");
    } else if (!f.topic.empty()) {
        bad_frame(std::string(to_string(f.op)) + " frames carry no topic");
    }
    const std::size_t want = expected_payload(f.op, f.topic);
    if (want == std::variant_npos) bad_frame("topic '" + f.topic + "' is not a publishable topic");
    if (f.data.index() != want) bad_frame("payload does not match op/topic");

    if (const auto* e = std::get_if<EdaPayload>(&f.data)) {
        if (e->t < 0 || !std::isfinite(e->v)) bad_frame("invalid EDA payload");
    } else if (const auto* p = std::get_if<PlaybackPayload>(&f.data)) {
        if (p->t < 0) bad_frame("invalid playback payload");
    } else if (const auto* fb = std::get_if<FeedbackPayload>(&f.data)) {
        if (fb->t < 0 || !(fb->a >= 0.0 && fb->a <= 1.0) || !(fb->duty >= 0.0 && fb->duty <= 1.0))
            bad_frame("invalid feedback payload");
    } else if (const auto* g = std::get_if<GetAggregatePayload>(&f.data)) {
        if (g->video.empty()) bad_frame("get_aggregate needs a video id");
    } else if (const auto* a = std::get_if<AggregateSeries>(&f.data)) {
        if (a->video_id.empty() || !(a->grid_hz > 0.0) || a->n_viewers == 0) bad_frame("invalid aggregate");
        for (double v : a->values) {
            if (!(v >= 0.0 && v <= 1.0)) bad_frame("aggregate value outside [0, 1]");
        }
    } else if (const auto* er = std::get_if<ErrorPayload>(&f.data)) {
        if (er->code.empty()) bad_frame("err frame needs a code");
    }
}

std::string encode(const Frame& f) {
    validate(f);
    ojson j;
    j["op"] = to_string(f.op);
    if (has_topic(f.op)) j["topic"] = f.topic;
    std::visit(
        [&j](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            ojson data = ojson::object();
            if constexpr (std::is_same_v<T, EdaPayload>) {
                data["t"] = d.t;
                data["v"] = d.v;
            } else if constexpr (std::is_same_v<T, PlaybackPayload>) {
                data["t"] = d.t;
                data["e"] = to_string(d.e);
            } else if constexpr (std::is_same_v<T, FeedbackPayload>) {
                data["t"] = d.t;
                data["a"] = d.a;
                data["duty"] = d.duty;
            } else if constexpr (std::is_same_v<T, GetAggregatePayload>) {
                data["video"] = d.video;
            } else if constexpr (std::is_same_v<T, AggregateSeries>) {
                data = detail::aggregate_to_json(d);
            } else if constexpr (std::is_same_v<T, ErrorPayload>) {
                data["code"] = d.code;
                data["msg"] = d.msg;
            }
            j["data"] = std::move(data);
        },
        f.data);
    std::string line = j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    line.push_back('\n');
    return line;
}

Frame decode(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse_error, std::string("malformed frame: ") + e.what());
    }
    if (!j.is_object()) violation("frame must be a JSON object");
    if (!j.contains("op") || !j["op"].is_string()) violation("missing field 'op'");
    const auto op = parse_op(j["op"].get<std::string>());
    if (!op) violation("unknown op '" + j["op"].get<std::string>() + "'");

    Frame f;
    f.op = *op;
    if (has_topic(*op)) {
        expect_keys(j, {"op", "topic", "data"}, "frame");
        f.topic = get_string(j["topic"], "topic");
        if (!valid_topic(f.topic, *op == Op::sub)) violation("invalid topic '" + f.topic + "'");
    } else {
        expect_keys(j, {"op", "data"}, "frame");
    }

    const auto& d = j["data"];
    switch (expected_payload(*op, f.topic)) {
        case 0:
            expect_keys(d, {}, "sub data");
            f.data = SubscribePayload{};
            break;
        case 1:
            expect_keys(d, {"t", "v"}, "eda data");
            f.data = EdaPayload{get_time(d["t"]), get_finite(d["v"], "v")};
            break;
        case 2: {
            expect_keys(d, {"t", "e"}, "playback data");
            const auto e = get_string(d["e"], "e");
            if (e == "seek") violation("seek events are reserved and not accepted");
            f.data = PlaybackPayload{get_time(d["t"]), parse_playback_kind(e)};
            break;
        }
        case 3:
            expect_keys(d, {"t", "a", "duty"}, "feedback data");
            f.data = FeedbackPayload{get_time(d["t"]), get_unit(d["a"], "a"), get_unit(d["duty"], "duty")};
            break;
        case 4: {
            expect_keys(d, {"video"}, "get_aggregate data");
            auto video = get_string(d["video"], "video");
            if (video.empty()) violation("video id must be non-empty");
            f.data = GetAggregatePayload{std::move(video)};
            break;
        }
        case 5:
            f.data = detail::aggregate_from_json(d, ErrorCode::protocol_violation);
            break;
        case 6: {
            expect_keys(d, {"code", "msg"}, "err data");
            auto code = get_string(d["code"], "code");
            if (code.empty()) violation("err code must be non-empty");
            f.data = ErrorPayload{std::move(code), get_string(d["msg"], "msg")};
            break;
        }
        default:
            violation("topic '" + f.topic + "' is not a publishable topic");
    }
    return f;
}

Frame make_eda(std::string_view session, std::string_view participant, std::int64_t t, double v) {
    return Frame{Op::pub, eda_topic(session, participant), EdaPayload{t, v}};
}

Frame make_playback(std::string_view session, std::string_view participant, std::int64_t t, PlaybackKind e) {
    return Frame{Op::pub, playback_topic(session, participant), PlaybackPayload{t, e}};
}

Frame make_subscribe(std::string pattern) { return Frame{Op::sub, std::move(pattern), SubscribePayload{}}; }

Frame make_error(std::string_view code, std::string msg) {
    return Frame{Op::err, {}, ErrorPayload{std::string(code), std::move(msg)}};
}

std::vector<LineBuffer::Line> LineBuffer::feed(std::string_view bytes) {
    std::vector<Line> out;
    while (!bytes.empty()) {
        const auto nl = bytes.find('\n');
        const auto chunk = bytes.substr(0, nl);
        if (!discarding_) {
            partial_.append(chunk);
            if (partial_.size() > max_line_) {
                partial_.clear();
                discarding_ = true;
            }
        }
        if (nl == std::string_view::npos) break;
        if (discarding_) {
            out.push_back({{}, true});
            discarding_ = false;
        } else {
            out.push_back({std::move(partial_), false});
            partial_.clear();
        }
        bytes.remove_prefix(nl + 1);
    }
    return out;
}

}  // namespace frisson::wire
