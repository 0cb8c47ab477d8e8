#ifndef E2E_CONFIG_HPP
#define E2E_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "e2e/eval.hpp"
#include "e2e/train.hpp"

namespace e2e {

// One experiment invocation, fully resolved. The manifest echo of this
// structure is itself a valid --config input.
struct RunConfig {
    std::string experiment;  // train-alt | train-aware | train-spsa | sweep |
                             // variance | theorem1 | feedback | dump
    uint64_t seed = 1;
    std::string out_dir = "out";
    int workers = 0;  // 0 = hardware concurrency

    ChannelSpec channel = AwgnSpec{};
    double snr_db = 10.0;            // train / single-point eval SNR
    std::vector<double> snr_list;    // sweep points (defaults per channel kind)

    ArchConfig arch;
    TrainConfig train;
    EvalConfig eval;

    std::string scheme = "autoencoder";  // sweep: autoencoder | qpsk | constellation
    std::string model_path;              // trained model input (sweep/dump)
    std::string constellation_path;      // constellation file input

    // theorem1
    std::vector<double> sigma_list{0.3, 0.15, 0.05};
    long t1_batch = 100000;
    // variance
    std::vector<int> m_list{5, 25, 50, 100};
    long var_batch = 1000;
    long var_inits = 1000;
    double var_sigma = 0.1;
    // feedback
    std::vector<double> snr_fb_list;
};

struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    std::optional<std::vector<double>> snr_list;
};

// Parses and validates a config document; unknown keys are rejected with
// the offending key named. Defaults are applied so the result is fully
// resolved.
RunConfig parse_config(const std::string& json_text, const std::string& experiment,
                       const CliOverrides& overrides);
RunConfig parse_config_file(const std::string& path, const std::string& experiment,
                            const CliOverrides& overrides);

std::string resolved_config_json(const RunConfig& cfg);

// Runs the named experiment and writes its artifacts (CSV outputs,
// manifest.json, model.json where applicable) under cfg.out_dir.
void run_experiment(const RunConfig& cfg);

} // namespace e2e

#endif
