#include "e2e/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "e2e/io.hpp"
#include "e2e/parallel.hpp"

namespace e2e {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kExperiments = {"train-alt", "train-aware", "train-spsa", "sweep",
                                            "variance",  "theorem1",    "feedback",   "dump"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            fail_config("unknown key \"" + (where.empty() ? it.key() : where + "." + it.key()) +
                        "\"");
    }
}

double number_or_inf(const json& v, const std::string& key) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        fail_config("key \"" + key + "\": expected a number or \"inf\"");
    }
    if (!v.is_number()) fail_config("key \"" + key + "\": expected a number");
    return v.get<double>();
}

std::vector<double> number_list(const json& v, const std::string& key) {
    if (!v.is_array()) fail_config("key \"" + key + "\": expected an array");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(number_or_inf(x, key));
    return out;
}

void parse_channel(const json& j, RunConfig& cfg) {
    reject_unknown(j, {"kind", "snr_db", "length_km", "gamma", "steps", "input_power_w"},
                   "channel");
    std::string kind = j.value("kind", "awgn");
    if (kind == "awgn") {
        cfg.channel = AwgnSpec{};
    } else if (kind == "rbf") {
        cfg.channel = RbfSpec{};
    } else if (kind == "fiber") {
        FiberSpec f;
        f.length_km = j.value("length_km", f.length_km);
        f.gamma_per_w_km = j.value("gamma", f.gamma_per_w_km);
        f.steps = j.value("steps", f.steps);
        f.input_power_w = j.value("input_power_w", f.input_power_w);
        if (f.steps < 1) fail_config("channel.steps must be >= 1");
        if (f.input_power_w <= 0.0) fail_config("channel.input_power_w must be positive");
        cfg.channel = f;
    } else {
        fail_config("channel.kind must be awgn, rbf or fiber");
    }
    if (j.contains("snr_db")) cfg.snr_db = j.at("snr_db").get<double>();
}

void parse_arch(const json& j, RunConfig& cfg) {
    reject_unknown(j, {"M", "N", "rx_style", "pilot"}, "arch");
    cfg.arch.M = j.value("M", cfg.arch.M);
    cfg.arch.N = j.value("N", cfg.arch.N);
    std::string style = j.value("rx_style", "discriminative");
    if (style == "discriminative")
        cfg.arch.rx_style = RxStyle::discriminative;
    else if (style == "transformer")
        cfg.arch.rx_style = RxStyle::transformer;
    else
        fail_config("arch.rx_style must be discriminative or transformer");
    cfg.arch.pilot = j.value("pilot", false);
    if (cfg.arch.M < 2) fail_config("arch.M must be >= 2");
    if (cfg.arch.N < 1) fail_config("arch.N must be >= 1");
}

void parse_train(const json& j, RunConfig& cfg) {
    reject_unknown(j,
                   {"batch_rx", "batch_tx", "outer_iters", "rx_steps", "tx_steps", "sigma", "lr",
                    "snr_fb_db", "baseline_subtract", "conserve_energy", "spsa_a", "spsa_c",
                    "spsa_alpha", "spsa_gamma"},
                   "train");
    TrainConfig& t = cfg.train;
    t.batch_rx = j.value("batch_rx", t.batch_rx);
    t.batch_tx = j.value("batch_tx", t.batch_tx);
    t.outer_iters = j.value("outer_iters", t.outer_iters);
    t.rx_steps = j.value("rx_steps", t.rx_steps);
    t.tx_steps = j.value("tx_steps", t.tx_steps);
    t.sigma = j.value("sigma", t.sigma);
    t.lr = j.value("lr", t.lr);
    if (j.contains("snr_fb_db")) {
        double v = number_or_inf(j.at("snr_fb_db"), "train.snr_fb_db");
        if (!std::isinf(v)) t.feedback_snr_db = v;
    }
    t.baseline_subtract = j.value("baseline_subtract", t.baseline_subtract);
    t.conserve_energy = j.value("conserve_energy", t.conserve_energy);
    t.spsa_a = j.value("spsa_a", t.spsa_a);
    t.spsa_c = j.value("spsa_c", t.spsa_c);
    t.spsa_alpha = j.value("spsa_alpha", t.spsa_alpha);
    t.spsa_gamma = j.value("spsa_gamma", t.spsa_gamma);
    if (t.batch_rx < 1 || t.batch_tx < 1) fail_config("train batch sizes must be >= 1");
    if (!(t.sigma > 0.0 && t.sigma < 1.0)) fail_config("train.sigma must be in (0,1)");
    if (t.outer_iters < 0) fail_config("train.outer_iters must be >= 0");
}

void parse_eval(const json& j, RunConfig& cfg) {
    reject_unknown(j, {"min_blocks", "min_errors", "max_blocks", "chunk_blocks"}, "eval");
    EvalConfig& e = cfg.eval;
    e.min_blocks = j.value("min_blocks", e.min_blocks);
    e.min_errors = j.value("min_errors", e.min_errors);
    e.max_blocks = j.value("max_blocks", e.max_blocks);
    e.chunk_blocks = j.value("chunk_blocks", e.chunk_blocks);
    if (e.min_blocks < 1) fail_config("eval.min_blocks must be >= 1");
}

std::vector<double> default_snr_list(const ChannelSpec& chan) {
    if (std::holds_alternative<AwgnSpec>(chan))
        return {-4, -2, 0, 2, 4, 6, 8, 10, 12, 14, 16};
    if (std::holds_alternative<RbfSpec>(chan)) return {0, 5, 10, 15, 20, 25, 30};
    return {12, 14, 16, 18, 20, 22, 24};
}

} // namespace

RunConfig parse_config(const std::string& json_text, const std::string& experiment,
                       const CliOverrides& overrides) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail_config(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) fail_config("config must be a JSON object");

    reject_unknown(j,
                   {"experiment", "seed", "out_dir", "workers", "channel", "arch", "train", "eval",
                    "snr_list", "scheme", "model", "constellation", "sigma_list", "t1_batch",
                    "m_list", "var_batch", "var_inits", "var_sigma", "snr_fb_list"},
                   "");

    RunConfig cfg;
    cfg.experiment = j.value("experiment", experiment);
    if (!experiment.empty() && cfg.experiment != experiment)
        fail_config("config is for experiment \"" + cfg.experiment + "\", invoked as \"" +
                    experiment + "\"");
    if (!kExperiments.count(cfg.experiment))
        fail_config("unknown experiment \"" + cfg.experiment + "\"");

    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("channel")) parse_channel(j.at("channel"), cfg);
    if (j.contains("arch")) parse_arch(j.at("arch"), cfg);
    if (j.contains("train")) parse_train(j.at("train"), cfg);
    if (j.contains("eval")) parse_eval(j.at("eval"), cfg);
    if (j.contains("snr_list")) cfg.snr_list = number_list(j.at("snr_list"), "snr_list");
    cfg.scheme = j.value("scheme", cfg.scheme);
    cfg.model_path = j.value("model", cfg.model_path);
    cfg.constellation_path = j.value("constellation", cfg.constellation_path);
    if (j.contains("sigma_list")) cfg.sigma_list = number_list(j.at("sigma_list"), "sigma_list");
    cfg.t1_batch = j.value("t1_batch", cfg.t1_batch);
    if (j.contains("m_list")) {
        cfg.m_list.clear();
        for (const auto& x : j.at("m_list")) cfg.m_list.push_back(x.get<int>());
    }
    cfg.var_batch = j.value("var_batch", cfg.var_batch);
    cfg.var_inits = j.value("var_inits", cfg.var_inits);
    cfg.var_sigma = j.value("var_sigma", cfg.var_sigma);
    if (j.contains("snr_fb_list")) cfg.snr_fb_list = number_list(j.at("snr_fb_list"), "snr_fb_list");

    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.workers) cfg.workers = *overrides.workers;
    if (overrides.snr_list) cfg.snr_list = *overrides.snr_list;

    cfg.train.seed = cfg.seed;
    cfg.train.train_snr_db = cfg.snr_db;
    if (cfg.snr_list.empty()) cfg.snr_list = default_snr_list(cfg.channel);

    // cross-field validation
    if (cfg.scheme == "qpsk") {
        long want = 1L << (2 * cfg.arch.N);
        if (cfg.arch.M != want)
            fail_config("qpsk needs M = 4^N (got M=" + std::to_string(cfg.arch.M) +
                        ", N=" + std::to_string(cfg.arch.N) + ")");
    }
    if (cfg.arch.pilot && !std::holds_alternative<RbfSpec>(cfg.channel))
        fail_config("arch.pilot requires channel.kind = rbf");
    if (cfg.experiment == "dump" && cfg.model_path.empty())
        fail_config("dump requires a \"model\" path");
    if (cfg.experiment == "sweep" && cfg.scheme == "autoencoder" && cfg.model_path.empty())
        fail_config("sweep with scheme=autoencoder requires a \"model\" path");
    if (cfg.experiment == "sweep" && cfg.scheme == "constellation" && cfg.constellation_path.empty())
        fail_config("sweep with scheme=constellation requires a \"constellation\" path");
    if (cfg.experiment == "feedback" && cfg.snr_fb_list.empty())
        fail_config("feedback requires a non-empty \"snr_fb_list\"");
    return cfg;
}

RunConfig parse_config_file(const std::string& path, const std::string& experiment,
                            const CliOverrides& overrides) {
    std::ifstream in(path);
    if (!in) fail_io("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text, experiment, overrides);
}

std::string resolved_config_json(const RunConfig& cfg) {
    json j;
    j["experiment"] = cfg.experiment;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["workers"] = cfg.workers;

    json chan;
    if (std::holds_alternative<AwgnSpec>(cfg.channel)) {
        chan["kind"] = "awgn";
    } else if (std::holds_alternative<RbfSpec>(cfg.channel)) {
        chan["kind"] = "rbf";
    } else {
        const auto& f = std::get<FiberSpec>(cfg.channel);
        chan["kind"] = "fiber";
        chan["length_km"] = f.length_km;
        chan["gamma"] = f.gamma_per_w_km;
        chan["steps"] = f.steps;
        chan["input_power_w"] = f.input_power_w;
    }
    chan["snr_db"] = cfg.snr_db;
    j["channel"] = chan;

    j["arch"] = {{"M", cfg.arch.M},
                 {"N", cfg.arch.N},
                 {"rx_style",
                  cfg.arch.rx_style == RxStyle::transformer ? "transformer" : "discriminative"},
                 {"pilot", cfg.arch.pilot}};

    json train = {{"batch_rx", cfg.train.batch_rx},
                  {"batch_tx", cfg.train.batch_tx},
                  {"outer_iters", cfg.train.outer_iters},
                  {"rx_steps", cfg.train.rx_steps},
                  {"tx_steps", cfg.train.tx_steps},
                  {"sigma", cfg.train.sigma},
                  {"lr", cfg.train.lr},
                  {"baseline_subtract", cfg.train.baseline_subtract},
                  {"conserve_energy", cfg.train.conserve_energy},
                  {"spsa_a", cfg.train.spsa_a},
                  {"spsa_c", cfg.train.spsa_c},
                  {"spsa_alpha", cfg.train.spsa_alpha},
                  {"spsa_gamma", cfg.train.spsa_gamma}};
    if (cfg.train.feedback_snr_db) train["snr_fb_db"] = *cfg.train.feedback_snr_db;
    j["train"] = train;

    j["eval"] = {{"min_blocks", cfg.eval.min_blocks},
                 {"min_errors", cfg.eval.min_errors},
                 {"max_blocks", cfg.eval.max_blocks},
                 {"chunk_blocks", cfg.eval.chunk_blocks}};

    j["snr_list"] = cfg.snr_list;
    j["scheme"] = cfg.scheme;
    if (!cfg.model_path.empty()) j["model"] = cfg.model_path;
    if (!cfg.constellation_path.empty()) j["constellation"] = cfg.constellation_path;
    j["sigma_list"] = cfg.sigma_list;
    j["t1_batch"] = cfg.t1_batch;
    j["m_list"] = cfg.m_list;
    j["var_batch"] = cfg.var_batch;
    j["var_inits"] = cfg.var_inits;
    j["var_sigma"] = cfg.var_sigma;
    json fb = json::array();
    for (double v : cfg.snr_fb_list) {
        if (std::isinf(v))
            fb.push_back("inf");
        else
            fb.push_back(v);
    }
    j["snr_fb_list"] = fb;
    return j.dump(1) + "\n";
}

namespace {

void write_manifest(const RunConfig& cfg) {
    std::ofstream out(fs::path(cfg.out_dir) / "manifest.json");
    if (!out) fail_io("cannot write manifest in " + cfg.out_dir);
    out << resolved_config_json(cfg);
}

std::unique_ptr<Scheme> scheme_from_config(const RunConfig& cfg) {
    if (cfg.scheme == "qpsk") return make_qpsk_scheme(cfg.arch.N, cfg.arch.pilot);
    if (cfg.scheme == "constellation")
        return make_constellation_scheme(load_constellation(cfg.constellation_path),
                                         cfg.arch.pilot);
    if (cfg.scheme == "autoencoder") {
        CommSystem sys = load_system(cfg.model_path);
        return make_learned_scheme(sys);
    }
    fail_config("unknown scheme \"" + cfg.scheme + "\"");
}

void run_training(const RunConfig& cfg) {
    Rng root(cfg.seed);
    Rng init_rng = root.derive(0);
    TrainState state = make_train_state(cfg.arch, cfg.channel, cfg.train, init_rng);
    TrainLog log;
    if (cfg.experiment == "train-alt")
        log = alternating_train(state, cfg.channel, cfg.train);
    else if (cfg.experiment == "train-aware")
        log = model_aware_train(state, cfg.channel, cfg.train);
    else
        log = spsa_train(state, cfg.channel, cfg.train);

    fs::path dir(cfg.out_dir);
    write_train_log_csv((dir / "train_log.csv").string(), log);
    save_system((dir / "model.json").string(), state.sys);
    dump_constellation(state.sys.tx, (dir / "constellation.csv").string());

    auto scheme = make_learned_scheme(state.sys);
    BlerPoint final_point =
        estimate_bler(*scheme, cfg.channel, cfg.snr_db, cfg.eval, root.derive(9000));
    write_bler_csv((dir / "final_bler.csv").string(), {final_point});
}

} // namespace

void run_experiment(const RunConfig& cfg) {
    set_worker_count(cfg.workers);
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) fail_io("cannot create output directory " + cfg.out_dir);
    write_manifest(cfg);
    fs::path dir(cfg.out_dir);

    if (cfg.experiment == "train-alt" || cfg.experiment == "train-aware" ||
        cfg.experiment == "train-spsa") {
        run_training(cfg);
        return;
    }
    if (cfg.experiment == "sweep") {
        auto scheme = scheme_from_config(cfg);
        auto points = snr_sweep(*scheme, cfg.channel, cfg.snr_list, cfg.eval, Rng(cfg.seed));
        write_bler_csv((dir / "sweep.csv").string(), points);
        return;
    }
    if (cfg.experiment == "theorem1") {
        Theorem1Config t1;
        t1.M = cfg.arch.M;
        t1.N = cfg.arch.N;
        t1.sigmas = cfg.sigma_list;
        t1.batch = cfg.t1_batch;
        t1.snr_db = cfg.snr_db;
        auto rows = theorem1_check(t1, Rng(cfg.seed));
        write_theorem1_csv((dir / "theorem1.csv").string(), rows);
        return;
    }
    if (cfg.experiment == "variance") {
        VarianceConfig vc;
        vc.m_list = cfg.m_list;
        vc.batch = cfg.var_batch;
        vc.inits = cfg.var_inits;
        vc.sigma = cfg.var_sigma;
        auto recs = variance_experiment(vc, Rng(cfg.seed));
        write_variance_csv((dir / "variance.csv").string(), recs);
        return;
    }
    if (cfg.experiment == "feedback") {
        auto rows = feedback_sweep(cfg.arch, cfg.channel, cfg.train, cfg.snr_fb_list, cfg.eval);
        write_feedback_csv((dir / "feedback.csv").string(), rows);
        return;
    }
    if (cfg.experiment == "dump") {
        CommSystem sys = load_system(cfg.model_path);
        dump_constellation(sys.tx, (dir / "constellation.csv").string());
        return;
    }
    fail_config("unknown experiment \"" + cfg.experiment + "\"");
}

} // namespace e2e
