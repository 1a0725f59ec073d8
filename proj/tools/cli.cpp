#include "cli.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "frisson/error.hpp"
#include "frisson/feedback_map.hpp"
#include "frisson/net.hpp"
#include "frisson/simulator.hpp"
#include "frisson/storage.hpp"
#include "frisson/stream_server.hpp"

namespace frisson::cli {

namespace fs = std::filesystem;

PipelineConfig parse_config(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse_error, std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::format_error, "config must be a JSON object");
    PipelineConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        const auto& v = it.value();
        auto number = [&]() {
            if (!v.is_number()) throw Error(ErrorCode::format_error, "config: '" + key + "' must be a number");
            return v.get<double>();
        };
        auto integer = [&]() {
            if (!v.is_number_integer()) throw Error(ErrorCode::format_error, "config: '" + key + "' must be an integer");
            return v.get<int>();
        };
        if (key == "sample_rate_hz") cfg.sample_rate_hz = number();
        else if (key == "smooth_window_samples") cfg.smooth_window_samples = integer();
        else if (key == "baseline_window_samples") cfg.baseline_window_samples = integer();
        else if (key == "peak_min_distance_s") cfg.peak_min_distance_s = number();
        else if (key == "peak_min_prominence") cfg.peak_min_prominence = number();
        else if (key == "quantize_halfwidth_s") cfg.quantize_halfwidth_s = number();
        else throw Error(ErrorCode::format_error, "config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const fs::path& file) { return parse_config(storage::read_text(file)); }

namespace {

struct ProcessArgs {
    std::string session;
    std::string out;
    std::string config;
    std::string peaks;
};

struct AggregateArgs {
    std::string video;
    std::string inputs;
    std::string out;
    std::string dump_csv;
};

struct SimulateArgs {
    double duration = 300.0;
    std::size_t participants = 20;
    std::size_t events = 8;
    std::uint64_t seed = 0;
    std::string out;
    std::string video = "sim";
    double amplitude = 1.0;
    double noise = 0.02;
    double drift = 0.5;
    double pause_probability = 0.5;
};

struct EvalArgs {
    std::string detected;
    std::string truth;
    double tol = 2.5;
};

struct KeyframeArgs {
    std::string aggregate;
    std::string design;
    std::string out;
};

struct ServeArgs {
    std::string listen = "127.0.0.1:7878";
    std::string ws_listen;
    std::string data;
    std::string config;
    std::vector<std::string> bindings;
    std::size_t threads = 2;
};

PipelineConfig config_or_default(const std::string& path) {
    return path.empty() ? PipelineConfig{} : load_config(path);
}

int do_process(const ProcessArgs& a, std::ostream& out) {
    const PipelineConfig cfg = config_or_default(a.config);
    const auto rec = storage::read_session(a.session);
    if (rec.events.empty()) throw Error(ErrorCode::insufficient_data, a.session + ": no playback events");
    if (rec.eda.empty()) throw Error(ErrorCode::insufficient_data, a.session + ": no EDA samples");
    const auto timeline = build_timeline(rec.events);
    const auto grid = to_grid(rec.eda, rec.sample_rate_hz, timeline, cfg.sample_rate_hz);
    const auto result = run_session(grid.as_eda(), cfg);
    storage::write_frisson(a.out, storage::FrissonRecord{rec.participant_id, rec.video_id, result.frisson});
    if (!a.peaks.empty()) {
        std::vector<double> times;
        for (const auto& p : result.peaks) times.push_back(static_cast<double>(p.index) / cfg.sample_rate_hz);
        storage::write_times(a.peaks, times);
    }
    out << rec.participant_id << ": " << result.peaks.size() << " peaks, " << grid.values.size()
        << " grid points\n";
    return kOk;
}

int do_aggregate(const AggregateArgs& a, std::ostream& out) {
    if (!fs::is_directory(a.inputs)) throw Error(ErrorCode::io_error, "not a directory: " + a.inputs);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.inputs)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<FrissonSeries> series;
    for (const auto& f : files) {
        auto rec = storage::read_frisson(f);
        if (rec.video_id == a.video) series.push_back(std::move(rec.series));
    }
    if (series.empty())
        throw Error(ErrorCode::insufficient_data, "no frisson series for video '" + a.video + "' in " + a.inputs);
    const auto agg = aggregate(a.video, series);
    storage::write_aggregate(a.out, agg);
    if (!a.dump_csv.empty()) storage::write_text(a.dump_csv, storage::format_aggregate_csv(agg));
    out << a.video << ": " << agg.n_viewers << " viewers, " << agg.values.size() << " grid points\n";
    return kOk;
}

int do_simulate(const SimulateArgs& a, std::ostream& out) {
    sim::CohortSpec spec;
    spec.video_id = a.video;
    spec.duration_s = a.duration;
    spec.participants = a.participants;
    spec.events_per_viewer = a.events;
    spec.seed = a.seed;
    spec.scr.amplitude = a.amplitude;
    spec.noise_sigma = a.noise * a.amplitude;
    spec.drift_amplitude = a.drift * a.amplitude;
    spec.pause_probability = a.pause_probability;
    const auto cohort = sim::simulate_cohort(spec);
    const fs::path root = a.out;
    for (const auto& viewer : cohort.viewers) {
        const fs::path dir = root / viewer.record.participant_id;
        storage::write_session(dir, viewer.record);
        storage::write_times(dir / "truth.txt", viewer.truth_s);
    }
    storage::write_times(root / "moments.txt", cohort.pool_s);
    out << "wrote " << cohort.viewers.size() << " sessions to " << root.string() << "\n";
    return kOk;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
    auto detected = storage::read_times(a.detected);
    auto truth = storage::read_times(a.truth);
    std::sort(detected.begin(), detected.end());
    std::sort(truth.begin(), truth.end());
    const auto ev = sim::evaluate(detected, truth, a.tol);
    out << std::fixed << std::setprecision(3) << "precision=" << ev.precision << "\nrecall=" << ev.recall << "\n";
    return kOk;
}

int do_keyframes(const KeyframeArgs& a, std::ostream& out) {
    const auto design = parse_design(a.design);
    if (!design) throw Error(ErrorCode::invalid_parameter, "unknown design '" + a.design + "'");
    const auto agg = storage::read_aggregate(a.aggregate);
    const auto keyframes = build_keyframes(agg, *design);
    storage::write_keyframes(a.out, *design, keyframes);
    out << keyframes.size() << " keyframes\n";
    return kOk;
}

int do_serve(const ServeArgs& a, std::ostream& out) {
    server::ServerOptions opts;
    if (!a.data.empty()) {
        opts.data_dir = a.data;
    } else if (const char* env = std::getenv("FRISSON_DATA_DIR"); env && *env) {
        opts.data_dir = env;
    }
    opts.pipeline = config_or_default(a.config);
    server::StreamServer srv(opts);
    for (const auto& b : a.bindings) {
        const auto eq = b.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == b.size())
            throw Error(ErrorCode::invalid_parameter, "--bind expects SESSION=VIDEO, got '" + b + "'");
        srv.bind_session(b.substr(0, eq), b.substr(eq + 1));
    }

    // Block the stop signals before any thread starts; sigwait takes them below.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    std::optional<net::Endpoint> ws;
    if (!a.ws_listen.empty()) ws = net::parse_endpoint(a.ws_listen);
    net::Listener listener(srv, net::parse_endpoint(a.listen), ws, a.threads);
    out << "listening on tcp port " << listener.tcp_port();
    if (auto p = listener.ws_port()) out << ", websocket port " << *p;
    out << "; data dir " << opts.data_dir.string() << std::endl;

    int sig = 0;
    sigwait(&stop_signals, &sig);
    listener.stop();
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Frisson pipeline, simulator and stream server", "frisson"};
    app.require_subcommand(1);

    ProcessArgs process_args;
    auto* process = app.add_subcommand("process", "Grid one recorded session and derive its binary frisson series");
    process->add_option("--session", process_args.session, "Session directory (meta.json, eda.csv, events.jsonl)")->required();
    process->add_option("--out", process_args.out, "Output frisson series file")->required();
    process->add_option("--config", process_args.config, "JSON pipeline configuration");
    process->add_option("--peaks", process_args.peaks, "Also write detected peak times (video seconds)");

    AggregateArgs aggregate_args;
    auto* aggregate_cmd = app.add_subcommand("aggregate", "Average the frisson series of one video");
    aggregate_cmd->add_option("--video", aggregate_args.video, "Video id")->required();
    aggregate_cmd->add_option("--inputs", aggregate_args.inputs, "Directory of frisson series files")->required();
    aggregate_cmd->add_option("--out", aggregate_args.out, "Output aggregate file")->required();
    aggregate_cmd->add_option("--dump-csv", aggregate_args.dump_csv, "Also write the aggregate as CSV");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic sessions with ground-truth frisson onsets");
    simulate->add_option("--duration", sim_args.duration, "Video duration in seconds")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--participants", sim_args.participants, "Number of viewers")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--events", sim_args.events, "SCR events per viewer")->required();
    simulate->add_option("--seed", sim_args.seed, "Random seed")->required();
    simulate->add_option("--out", sim_args.out, "Output directory")->required();
    simulate->add_option("--video", sim_args.video, "Video id")->capture_default_str();
    simulate->add_option("--amplitude", sim_args.amplitude, "SCR amplitude")->capture_default_str()->check(CLI::PositiveNumber);
    simulate->add_option("--noise", sim_args.noise, "Noise sigma as a fraction of the amplitude")->capture_default_str()->check(CLI::NonNegativeNumber);
    simulate->add_option("--drift", sim_args.drift, "Tonic drift amplitude as a fraction of the amplitude")->capture_default_str()->check(CLI::NonNegativeNumber);
    simulate->add_option("--pause-prob", sim_args.pause_probability, "Probability that a viewer pauses once")->capture_default_str()->check(CLI::Range(0.0, 1.0));

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Score detected event times against ground truth");
    eval->add_option("--detected", eval_args.detected, "Detected times, one per line (seconds)")->required();
    eval->add_option("--truth", eval_args.truth, "Ground-truth times, one per line (seconds)")->required();
    eval->add_option("--tol", eval_args.tol, "Matching tolerance in seconds")->capture_default_str()->check(CLI::NonNegativeNumber);

    KeyframeArgs kf_args;
    auto* keyframes = app.add_subcommand("keyframes", "Export a feedback keyframe timeline from an aggregate");
    keyframes->add_option("--aggregate", kf_args.aggregate, "Aggregate file")->required();
    keyframes->add_option("--design", kf_args.design, "ambient_light, icon or vibration")
        ->required()
        ->check(CLI::IsMember({"ambient_light", "icon", "vibration"}));
    keyframes->add_option("--out", kf_args.out, "Output keyframe file")->required();

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the stream server");
    serve->add_option("--listen", serve_args.listen, "TCP host:port for the line protocol")->capture_default_str();
    serve->add_option("--ws-listen", serve_args.ws_listen, "Optional host:port for WebSocket clients");
    serve->add_option("--data", serve_args.data, "Data directory (default: $FRISSON_DATA_DIR, else ./data)");
    serve->add_option("--config", serve_args.config, "JSON pipeline configuration");
    serve->add_option("--bind", serve_args.bindings, "SESSION=VIDEO association (repeatable)");
    serve->add_option("--threads", serve_args.threads, "I/O threads")->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*process) return do_process(process_args, out);
        if (*aggregate_cmd) return do_aggregate(aggregate_args, out);
        if (*simulate) return do_simulate(sim_args, out);
        if (*eval) return do_eval(eval_args, out);
        if (*keyframes) return do_keyframes(kf_args, out);
        if (*serve) return do_serve(serve_args, out);
    } catch (const Error& e) {
        err << "frisson: " << e.what() << "\n";
        return e.code() == ErrorCode::invalid_parameter ? kUsage : kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "frisson: " << e.what() << "\n";
        return kDataError;
    }
    return kUsage;
}

}  // namespace frisson::cli
