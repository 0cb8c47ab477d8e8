// Command-line front end: binds config files to training and evaluation
// runs and emits CSV artifacts plus a manifest for reproduction.

#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "e2e/config.hpp"

namespace {

std::vector<double> parse_snr_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            e2e::fail_config("--snr-list: bad value \"" + cell + "\"");
        }
    }
    if (out.empty()) e2e::fail_config("--snr-list: empty list");
    return out;
}

struct CommonFlags {
    std::string config_path;
    std::string seed;
    std::string out_dir;
    int workers = -1;
    std::string snr_list;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--seed", flags.seed, "RNG seed (overrides config)");
    cmd->add_option("--out-dir", flags.out_dir, "output directory (overrides config)");
    cmd->add_option("--workers", flags.workers, "parallel worker cap (overrides config)");
    cmd->add_option("--snr-list", flags.snr_list, "comma-separated SNR points (overrides config)");
}

int run(const std::string& experiment, const CommonFlags& flags) {
    e2e::CliOverrides overrides;
    if (!flags.seed.empty()) overrides.seed = std::stoull(flags.seed);
    if (!flags.out_dir.empty()) overrides.out_dir = flags.out_dir;
    if (flags.workers >= 0) overrides.workers = flags.workers;
    if (!flags.snr_list.empty()) overrides.snr_list = parse_snr_list(flags.snr_list);

    e2e::RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = e2e::parse_config_file(flags.config_path, experiment, overrides);
    } else {
        cfg = e2e::parse_config("{}", experiment, overrides);
    }
    e2e::run_experiment(cfg);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"End-to-end autoencoder communication trainer"};
    app.require_subcommand(1);

    const char* names[] = {"train-alt", "train-aware", "train-spsa", "sweep",
                           "variance",  "theorem1",    "feedback",   "dump"};
    const char* descs[] = {
        "alternating (model-free) training",
        "model-aware end-to-end training",
        "SPSA baseline training",
        "Monte-Carlo BLER/SER vs SNR sweep",
        "SPSA vs score-function gradient variance benchmark",
        "score-function estimator vs model-aware gradient alignment",
        "noisy feedback link training sweep",
        "dump the transmitter constellation of a trained model",
    };

    CommonFlags flags[8];
    for (int i = 0; i < 8; ++i) add_common(app.add_subcommand(names[i], descs[i]), flags[i]);

    CLI11_PARSE(app, argc, argv);

    try {
        for (int i = 0; i < 8; ++i) {
            if (app.got_subcommand(names[i])) return run(names[i], flags[i]);
        }
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const e2e::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case e2e::ErrorKind::config: return 2;
            case e2e::ErrorKind::numeric: return 3;
            case e2e::ErrorKind::io: return 4;
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
