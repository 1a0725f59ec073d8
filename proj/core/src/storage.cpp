#include "frisson/storage.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "frisson/error.hpp"
#include "json_detail.hpp"

namespace frisson::storage {

namespace {

using detail::ojson;

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
    throw Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + msg, line);
}

[[noreturn]] void format_fail(const std::string& msg, std::size_t line = 0) {
    throw Error(ErrorCode::format_error, line ? "line " + std::to_string(line) + ": " + msg : msg, line);
}

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

// Splits on '\n'; a single trailing newline does not produce an empty line.
std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        if (nl == std::string_view::npos) {
            out.push_back(text);
            break;
        }
        out.push_back(text.substr(0, nl));
        text.remove_prefix(nl + 1);
    }
    return out;
}

nlohmann::json parse_json_document(std::string_view text, std::string_view what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse_error, std::string(what) + ": " + e.what());
    }
}

void expect_exact_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, std::string_view what,
                       std::size_t line = 0) {
    if (!j.is_object()) format_fail(std::string(what) + " must be a JSON object", line);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) format_fail(std::string(what) + ": unknown field '" + it.key() + "'", line);
    }
    for (const char* k : keys) {
        if (!j.contains(k)) format_fail(std::string(what) + ": missing field '" + k + "'", line);
    }
}

std::string non_empty_string(const nlohmann::json& v, std::string_view name) {
    if (!v.is_string() || v.get<std::string>().empty())
        format_fail(std::string(name) + " must be a non-empty string");
    return v.get<std::string>();
}

double positive_rate(const nlohmann::json& v, std::string_view name) {
    if (!v.is_number() || !(v.get<double>() > 0.0)) format_fail(std::string(name) + " must be a positive number");
    return v.get<double>();
}

std::string dump_line(const ojson& j) { return j.dump() + "\n"; }

}  // namespace

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& file, std::string_view content) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    fs::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::io_error, "write failed for " + tmp.string());
    }
    fs::rename(tmp, file);
}

// ---- sessions -------------------------------------------------------------

std::string format_meta(const SessionRecord& rec) {
    ojson j;
    j["participant_id"] = rec.participant_id;
    j["video_id"] = rec.video_id;
    j["sample_rate_hz"] = detail::rate_to_json(rec.sample_rate_hz);
    return dump_line(j);
}

std::string format_eda_csv(std::span<const EdaSample> eda) {
    std::string out = "t_ms,v\n";
    for (const auto& s : eda) {
        out += std::to_string(s.t_wall_ms);
        out += ',';
        out += shortest(s.value);
        out += '\n';
    }
    return out;
}

std::string format_events(std::span<const PlaybackEvent> events) {
    std::string out;
    for (const auto& e : events) {
        ojson j;
        j["t_ms"] = e.t_wall_ms;
        j["e"] = to_string(e.kind);
        out += dump_line(j);
    }
    return out;
}

void parse_meta(std::string_view text, SessionRecord& rec) {
    const auto j = parse_json_document(text, kMetaFile);
    expect_exact_keys(j, {"participant_id", "video_id", "sample_rate_hz"}, kMetaFile);
    rec.participant_id = non_empty_string(j["participant_id"], "participant_id");
    rec.video_id = non_empty_string(j["video_id"], "video_id");
    rec.sample_rate_hz = positive_rate(j["sample_rate_hz"], "sample_rate_hz");
}

std::vector<EdaSample> parse_eda_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != "t_ms,v") parse_fail(1, "expected header 't_ms,v'");
    std::vector<EdaSample> out;
    out.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        const auto row = lines[i];
        const auto comma = row.find(',');
        if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos)
            parse_fail(lineno, "expected two comma-separated fields");
        EdaSample s;
        if (!parse_number(row.substr(0, comma), s.t_wall_ms))
            parse_fail(lineno, "bad timestamp '" + std::string(row.substr(0, comma)) + "'");
        if (!parse_number(row.substr(comma + 1), s.value) || !std::isfinite(s.value))
            parse_fail(lineno, "bad value '" + std::string(row.substr(comma + 1)) + "'");
        if (s.t_wall_ms < 0) format_fail("negative timestamp", lineno);
        if (!out.empty() && s.t_wall_ms < out.back().t_wall_ms) format_fail("timestamp regression", lineno);
        out.push_back(s);
    }
    return out;
}

std::vector<PlaybackEvent> parse_events(std::string_view text) {
    const auto lines = lines_of(text);
    std::vector<PlaybackEvent> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::parse_error&) {
            parse_fail(lineno, "malformed event object");
        }
        // Every defect of an event row is a row-level parse error.
        try {
            expect_exact_keys(j, {"t_ms", "e"}, "event", lineno);
        } catch (const Error& e) {
            throw Error(ErrorCode::parse_error, e.what(), lineno);
        }
        if (!j["t_ms"].is_number_integer()) parse_fail(lineno, "t_ms must be an integer");
        if (!j["e"].is_string()) parse_fail(lineno, "e must be a string");
        PlaybackEvent ev;
        ev.t_wall_ms = j["t_ms"].get<std::int64_t>();
        if (ev.t_wall_ms < 0) format_fail("negative timestamp", lineno);
        const auto kind = j["e"].get<std::string>();
        if (kind == "play") {
            ev.kind = PlaybackKind::play;
        } else if (kind == "stop") {
            ev.kind = PlaybackKind::stop;
        } else {
            parse_fail(lineno, "unknown event '" + kind + "'");
        }
        out.push_back(ev);
    }
    return out;
}

void write_session(const fs::path& dir, const SessionRecord& rec) {
    if (rec.participant_id.empty() || rec.video_id.empty())
        throw Error(ErrorCode::invalid_input, "session record needs participant and video ids");
    fs::create_directories(dir);
    write_text(dir / kEdaFile, format_eda_csv(rec.eda));
    write_text(dir / kEventsFile, format_events(rec.events));
    // Metadata last: its presence marks a complete record.
    write_text(dir / kMetaFile, format_meta(rec));
}

SessionRecord read_session(const fs::path& dir) {
    for (auto name : {kMetaFile, kEdaFile, kEventsFile}) {
        if (!fs::is_regular_file(dir / name))
            format_fail("session " + dir.string() + " is missing " + std::string(name));
    }
    SessionRecord rec;
    auto located = [&dir](std::string_view name, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            throw Error(e.code(), (dir / name).string() + ": " + e.what(), e.line());
        }
    };
    located(kMetaFile, [&] { parse_meta(read_text(dir / kMetaFile), rec); });
    located(kEdaFile, [&] { rec.eda = parse_eda_csv(read_text(dir / kEdaFile)); });
    located(kEventsFile, [&] { rec.events = parse_events(read_text(dir / kEventsFile)); });
    return rec;
}

// ---- frisson series -------------------------------------------------------

std::string format_frisson(const FrissonRecord& rec) {
    ojson j;
    j["participant_id"] = rec.participant_id;
    j["video_id"] = rec.video_id;
    j["grid_hz"] = detail::rate_to_json(rec.series.grid_hz);
    ojson values = ojson::array();
    for (auto v : rec.series.values) values.push_back(static_cast<int>(v));
    j["values"] = std::move(values);
    return dump_line(j);
}

FrissonRecord parse_frisson(std::string_view text) {
    const auto j = parse_json_document(text, "frisson series");
    expect_exact_keys(j, {"participant_id", "video_id", "grid_hz", "values"}, "frisson series");
    FrissonRecord rec;
    rec.participant_id = non_empty_string(j["participant_id"], "participant_id");
    rec.video_id = non_empty_string(j["video_id"], "video_id");
    rec.series.grid_hz = positive_rate(j["grid_hz"], "grid_hz");
    if (!j["values"].is_array()) format_fail("values must be an array");
    for (const auto& v : j["values"]) {
        if (!v.is_number_integer() || (v.get<std::int64_t>() != 0 && v.get<std::int64_t>() != 1))
            format_fail("frisson values must be 0 or 1, got " + v.dump());
        rec.series.values.push_back(static_cast<std::uint8_t>(v.get<int>()));
    }
    return rec;
}

void write_frisson(const fs::path& file, const FrissonRecord& rec) { write_text(file, format_frisson(rec)); }

FrissonRecord read_frisson(const fs::path& file) { return parse_frisson(read_text(file)); }

// ---- aggregates -----------------------------------------------------------

std::string format_aggregate(const AggregateSeries& agg) {
    if (agg.video_id.empty()) throw Error(ErrorCode::invalid_input, "aggregate needs a video id");
    return dump_line(detail::aggregate_to_json(agg));
}

AggregateSeries parse_aggregate(std::string_view text) {
    return detail::aggregate_from_json(parse_json_document(text, "aggregate"), ErrorCode::format_error);
}

void write_aggregate(const fs::path& file, const AggregateSeries& agg) { write_text(file, format_aggregate(agg)); }

AggregateSeries read_aggregate(const fs::path& file) { return parse_aggregate(read_text(file)); }

std::string format_aggregate_csv(const AggregateSeries& agg) {
    std::string out = "index,video_t_s,value\n";
    for (std::size_t k = 0; k < agg.values.size(); ++k) {
        out += std::to_string(k) + "," + shortest(static_cast<double>(k) / agg.grid_hz) + "," +
               shortest(detail::round9(agg.values[k])) + "\n";
    }
    return out;
}

// ---- keyframes and time lists ---------------------------------------------

std::string format_keyframes(FeedbackDesign design, std::span<const FeedbackKeyframe> keyframes) {
    ojson j;
    j["design"] = to_string(design);
    ojson frames = ojson::array();
    for (const auto& k : keyframes) frames.push_back(ojson::array({k.video_t_s, detail::round9(k.magnitude)}));
    j["keyframes"] = std::move(frames);
    return dump_line(j);
}

void write_keyframes(const fs::path& file, FeedbackDesign design, std::span<const FeedbackKeyframe> keyframes) {
    write_text(file, format_keyframes(design, keyframes));
}

std::string format_times(std::span<const double> times) {
    std::string out;
    for (double t : times) out += shortest(t) + "\n";
    return out;
}

std::vector<double> parse_times(std::string_view text) {
    std::vector<double> out;
    const auto lines = lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto row = lines[i];
        while (!row.empty() && (row.back() == ' ' || row.back() == '\r')) row.remove_suffix(1);
        if (row.empty() || row.front() == '#') continue;
        double t = 0.0;
        if (!parse_number(row, t) || !std::isfinite(t)) parse_fail(i + 1, "bad time '" + std::string(row) + "'");
        out.push_back(t);
    }
    return out;
}

void write_times(const fs::path& file, std::span<const double> times) { write_text(file, format_times(times)); }

std::vector<double> read_times(const fs::path& file) { return parse_times(read_text(file)); }

}  // namespace frisson::storage
