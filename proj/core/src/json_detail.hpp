#pragma once

// JSON conversions shared by the wire protocol and the storage formats.

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "frisson/error.hpp"
#include "frisson/signal_core.hpp"

namespace frisson::detail {

using ojson = nlohmann::ordered_json;

/// At most nine fractional digits, as stored in aggregate files.
inline double round9(double v) { return std::round(v * 1e9) / 1e9; }

/// Integral rates serialize as integers ("grid_hz":5).
inline ojson rate_to_json(double hz) {
    if (hz == std::floor(hz) && hz < 1e15) return static_cast<std::int64_t>(hz);
    return hz;
}

inline ojson aggregate_to_json(const AggregateSeries& agg) {
    ojson values = ojson::array();
    for (double v : agg.values) values.push_back(round9(v));
    ojson j;
    j["video_id"] = agg.video_id;
    j["grid_hz"] = rate_to_json(agg.grid_hz);
    j["n_viewers"] = agg.n_viewers;
    j["values"] = std::move(values);
    return j;
}

/// Strict reader: exactly the four keys, values in [0, 1]. Failures are
/// reported with `code`.
template <class Json>
AggregateSeries aggregate_from_json(const Json& j, ErrorCode code) {
    auto fail = [code](const std::string& msg) -> AggregateSeries { throw Error(code, "aggregate: " + msg); };
    if (!j.is_object()) return fail("not an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "video_id" && k != "grid_hz" && k != "n_viewers" && k != "values")
            return fail("unknown field '" + k + "'");
    }
    for (const char* k : {"video_id", "grid_hz", "n_viewers", "values"}) {
        if (!j.contains(k)) return fail(std::string("missing field '") + k + "'");
    }
    AggregateSeries agg;
    if (!j["video_id"].is_string() || j["video_id"].template get<std::string>().empty())
        return fail("video_id must be a non-empty string");
    agg.video_id = j["video_id"].template get<std::string>();
    if (!j["grid_hz"].is_number() || !(j["grid_hz"].template get<double>() > 0.0))
        return fail("grid_hz must be a positive number");
    agg.grid_hz = j["grid_hz"].template get<double>();
    if (!j["n_viewers"].is_number_unsigned() || j["n_viewers"].template get<std::uint64_t>() == 0)
        return fail("n_viewers must be a positive integer");
    agg.n_viewers = j["n_viewers"].template get<std::size_t>();
    if (!j["values"].is_array()) return fail("values must be an array");
    agg.values.reserve(j["values"].size());
    for (const auto& v : j["values"]) {
        if (!v.is_number()) return fail("non-numeric value");
        const double x = v.template get<double>();
        if (!(x >= 0.0 && x <= 1.0)) return fail("value " + v.dump() + " outside [0, 1]");
        agg.values.push_back(x);
    }
    return agg;
}

}  // namespace frisson::detail
