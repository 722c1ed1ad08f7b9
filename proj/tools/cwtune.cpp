// cwtune: contention-window experiments and replay controller.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "cwtune/controller.hpp"
#include "cwtune/experiments.hpp"
#include "cwtune/status_service.hpp"

namespace fs = std::filesystem;
using namespace cwtune;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int)
{
    g_stop = true;
}

struct Common {
    std::string config_path;
    std::string out = ".";
    std::optional<std::uint64_t> seed;

    // Overrides of config-file fields.
    std::optional<std::string> policy;
    std::optional<int> period_s;
    std::optional<std::string> trace;
    std::optional<std::string> bind;
    std::optional<int> controlled;
    std::optional<int> history_s;
    std::optional<double> explore_prob;
    std::optional<int> calibration_s;
    std::optional<int> frame_slots;
    std::optional<bool> rtscts;
    std::optional<std::size_t> duration_s;
    std::optional<std::size_t> stations;
    std::optional<bool> volumes;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config_path, "JSON config file (controller fields)");
    app->add_option("--out", c.out, "Output directory")->capture_default_str();
    app->add_option("--seed", c.seed, "Master seed");
    app->add_option("--policy", c.policy, "BEB | ABA | FixedCW(w) | MLBA-LR | MLBA-NB | MLBA-DNN");
    app->add_option("--period", c.period_s, "Control period in seconds (1-10)");
    app->add_option("--trace", c.trace, "Trace CSV; synthetic when omitted");
    app->add_option("--bind", c.bind, "host:port of the status surface");
    app->add_option("--controlled", c.controlled, "Number of controlled APs");
    app->add_option("--history", c.history_s, "Learner history in seconds");
    app->add_option("--explore", c.explore_prob, "Exploration probability");
    app->add_option("--calibration", c.calibration_s, "Initial calibration period in seconds");
    app->add_option("--frame-slots", c.frame_slots, "Successful frame airtime in slots");
    app->add_option("--rtscts", c.rtscts, "Use the RTS/CTS collision cost");
    app->add_option("--duration", c.duration_s, "Synthetic trace length in seconds");
    app->add_option("--stations", c.stations, "Synthetic station count");
    app->add_option("--volumes", c.volumes, "Cap stations at their trace volume");
}

control::ControllerConfig resolve(const Common& c, control::ControllerConfig cfg = {})
{
    if (!c.config_path.empty()) {
        cfg = control::load_controller_config(c.config_path);
    }
    if (c.seed) {
        cfg.seed = *c.seed;
        cfg.synthetic.seed = derive_seed(*c.seed, 99);
    }
    if (c.policy) {
        cfg.policy = control::PolicySpec::parse(*c.policy);
    }
    if (c.period_s) {
        cfg.period_s = *c.period_s;
        cfg.learner.period_s = *c.period_s;
    }
    if (c.trace) {
        cfg.trace_path = *c.trace;
    }
    if (c.bind) {
        cfg.bind = *c.bind;
    }
    if (c.controlled) {
        cfg.controlled_aps = *c.controlled;
    }
    if (c.history_s) {
        cfg.learner.history_s = *c.history_s;
    }
    if (c.explore_prob) {
        cfg.learner.explore_prob = *c.explore_prob;
    }
    if (c.calibration_s) {
        cfg.learner.calibration_period_s = *c.calibration_s;
    }
    if (c.frame_slots) {
        cfg.sim.frame_slots = *c.frame_slots;
    }
    if (c.rtscts) {
        cfg.sim.rtscts_enabled = *c.rtscts;
    }
    if (c.duration_s) {
        cfg.synthetic.duration_s = *c.duration_s;
    }
    if (c.volumes) {
        cfg.replay_volumes = *c.volumes;
    }
    if (c.stations) {
        cfg.synthetic.n_stations = *c.stations;
    }
    cfg.validate();
    return cfg;
}

void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

std::vector<int> default_train_times()
{
    return {5, 10, 15, 20, 25, 35, 45, 60, 90, 120};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Contention-window tuning experiments and replay controller"};
    app.require_subcommand(1);

    // sweep
    Common sweep_c;
    bench::SweepSpec spec;
    auto* sweep = app.add_subcommand("sweep", "Saturated window sweep with BEB baselines");
    add_common(sweep, sweep_c);
    sweep->add_option("--n", spec.n_aps, "AP counts")->capture_default_str();
    sweep->add_option("--grid", spec.cw_grid, "Windows to sweep")->capture_default_str();
    sweep->add_option("--reps", spec.repetitions, "Repetitions per cell")->capture_default_str();
    sweep->add_option("--burst", spec.burst_s, "Burst length in seconds")->capture_default_str();
    sweep->add_option("--fraction", spec.controlled_fraction, "Controlled share of APs")
        ->capture_default_str();

    // calibrate
    Common cal_c;
    auto* calibrate = app.add_subcommand("calibrate", "Exhaustive per-period window calibration");
    add_common(calibrate, cal_c);
    std::size_t cal_seconds = 3600;
    calibrate->add_option("--seconds", cal_seconds, "Trace seconds to calibrate")->capture_default_str();

    // trainspeed
    Common ts_c;
    auto* trainspeed = app.add_subcommand("trainspeed", "Fraction of optimal versus training time");
    add_common(trainspeed, ts_c);
    std::size_t ts_seconds = 3600;
    std::vector<int> train_times = default_train_times();
    trainspeed->add_option("--seconds", ts_seconds, "Trace seconds to use")->capture_default_str();
    trainspeed->add_option("--train-times", train_times, "Warmup lengths in seconds")
        ->capture_default_str();

    // bench
    Common bench_c;
    auto* benchmark = app.add_subcommand(
        "bench", "Calibration hour, training speed and longitudinal comparison");
    add_common(benchmark, bench_c);
    std::size_t windows = 5;
    std::size_t window_s = 900;
    bool skip_trainspeed = false;
    benchmark->add_option("--windows", windows, "Test windows (one per hour)")->capture_default_str();
    benchmark->add_option("--window-length", window_s, "Seconds per test window")->capture_default_str();
    benchmark->add_flag("--skip-trainspeed", skip_trainspeed, "Skip the training-speed stage");

    // replay
    Common replay_c;
    auto* replay = app.add_subcommand("replay", "Replay a trace under one policy");
    add_common(replay, replay_c);

    // serve
    Common serve_c;
    auto* serve = app.add_subcommand("serve", "Replay with the HTTP status surface");
    add_common(serve, serve_c);
    double pace = 1.0;
    bool linger = false;
    serve->add_option("--pace", pace, "Wall-clock seconds per period (0 = unpaced)")
        ->capture_default_str();
    serve->add_flag("--linger", linger, "Keep serving after the replay finishes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) {
            const auto cfg = resolve(sweep_c);
            spec.sim = cfg.sim;
            spec.rtscts = cfg.sim.rtscts_enabled;
            spec.seed = cfg.seed;
            write_file(fs::path(sweep_c.out) / "sweep.csv", bench::sweep_csv(bench::opportunity_sweep(spec)));
        } else if (*calibrate) {
            auto cfg = resolve(cal_c, bench::bench_scenario());
            cfg.synthetic.duration_s = std::max(cfg.synthetic.duration_s, cal_seconds);
            const auto trace = control::resolve_trace(cfg).slice(0, cal_seconds);
            const auto data = bench::exhaustive_calibration(trace, cfg.learner.cw_grid, cfg.sim, cfg.seed,
                                                            cfg.replay_volumes);
            const auto fit = bench::compare_log_fit(data);
            write_file(fs::path(cal_c.out) / "calibration.csv", data.csv());
            const nlohmann::json summary = {{"rows", fit.rows},
                                            {"r2_log", fit.r2_log},
                                            {"r2_linear", fit.r2_linear},
                                            {"log_fit", fit.log_fit}};
            write_file(fs::path(cal_c.out) / "fit.json", summary.dump(2) + '\n');
            std::cout << summary.dump() << '\n';
        } else if (*trainspeed) {
            auto cfg = resolve(ts_c, bench::bench_scenario());
            cfg.synthetic.duration_s = std::max(cfg.synthetic.duration_s, ts_seconds);
            const auto trace = control::resolve_trace(cfg).slice(0, ts_seconds);
            const auto data = bench::exhaustive_calibration(trace, cfg.learner.cw_grid, cfg.sim, cfg.seed,
                                                            cfg.replay_volumes);
            const auto points = bench::training_speed_sim(
                data, {"OPT", "BEB", "ABA", "MLBA-LR", "MLBA-NB", "MLBA-DNN"}, train_times,
                cfg.learner, cfg.seed);
            write_file(fs::path(ts_c.out) / "trainspeed.csv", bench::trainspeed_csv(points));
        } else if (*benchmark) {
            auto cfg = resolve(bench_c, bench::bench_scenario());
            const std::size_t hour = 3600;
            cfg.synthetic.duration_s = std::max(cfg.synthetic.duration_s, hour * (windows + 1));
            const auto trace = control::resolve_trace(cfg);
            const fs::path out(bench_c.out);

            const auto data = bench::exhaustive_calibration(trace.slice(0, hour), cfg.learner.cw_grid,
                                                            cfg.sim, cfg.seed, cfg.replay_volumes);
            const auto fit = bench::compare_log_fit(data);
            write_file(out / "calibration.csv", data.csv());
            if (!skip_trainspeed) {
                const auto points = bench::training_speed_sim(
                    data, {"OPT", "BEB", "ABA", "MLBA-LR", "MLBA-NB", "MLBA-DNN"},
                    default_train_times(), cfg.learner, cfg.seed);
                write_file(out / "trainspeed.csv", bench::trainspeed_csv(points));
            }
            const auto wins = bench::strided_windows(trace.seconds(), hour, hour, window_s, windows);
            const auto cmp = bench::longitudinal_benchmark(
                trace, wins, {"BEB", "ABA", "MLBA-LR", "MLBA-NB", "MLBA-DNN"}, cfg);
            write_file(out / "comparison.csv", cmp.csv());
            write_file(out / "series.ndjson", cmp.series_ndjson());
            nlohmann::json summary = {{"config", cfg},
                                      {"r2_log", fit.r2_log},
                                      {"r2_linear", fit.r2_linear},
                                      {"window_actives", cmp.window_actives}};
            for (const auto& a : cmp.algorithms) {
                for (const auto& b : cmp.algorithms) {
                    if (a != b) {
                        const auto ia = cmp.index_of(a);
                        const auto ib = cmp.index_of(b);
                        summary["avg"][a + ">" + b] = cmp.avg[ia][ib];
                        summary["sigl"][a + ">" + b] = cmp.sigl[ia][ib];
                    }
                }
            }
            write_file(out / "summary.json", summary.dump(2) + '\n');
        } else if (*replay) {
            const auto cfg = resolve(replay_c);
            const auto log = control::run_replay(cfg, control::resolve_trace(cfg));
            const auto path = cfg.output_path.empty() ? fs::path(replay_c.out) / "runlog.ndjson"
                                                      : fs::path(cfg.output_path);
            write_file(path, log.to_ndjson());
        } else if (*serve) {
            const auto cfg = resolve(serve_c);
            control::Controller ctl(cfg, control::resolve_trace(cfg));
            control::StatusService service(ctl);
            const auto [host, port] = control::parse_bind(cfg.bind);
            const int bound = service.start(host, port);
            std::cerr << "serving on " << host << ':' << bound << '\n';
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const auto period = std::chrono::duration<double>(pace * cfg.period_s);
            while (!ctl.done() && !g_stop) {
                const auto start = std::chrono::steady_clock::now();
                ctl.step();
                std::this_thread::sleep_until(
                    start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period));
            }
            const auto path = cfg.output_path.empty() ? fs::path(serve_c.out) / "runlog.ndjson"
                                                      : fs::path(cfg.output_path);
            write_file(path, ctl.log().to_ndjson());
            while (linger && !g_stop) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
            service.stop();
        }
    } catch (const std::exception& e) {
        std::cerr << "cwtune: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
