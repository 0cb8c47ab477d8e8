#ifndef E2E_EVAL_HPP
#define E2E_EVAL_HPP

#include <memory>
#include <string>
#include <vector>

#include "e2e/baseline.hpp"
#include "e2e/train.hpp"

namespace e2e {

struct BlerPoint {
    double snr_db = 0.0;
    long blocks = 0;
    long errors = 0;
    double rate = 0.0;
    double ci95 = 0.0;  // Wilson interval half-width
};

double wilson_halfwidth(long errors, long blocks);

// A fixed encode/decode pair evaluated by Monte Carlo. Blocks may carry a
// leading pilot use; the decoder owns any equalization.
class Scheme {
public:
    virtual ~Scheme() = default;
    virtual int message_count() const = 0;
    virtual std::size_t block_uses() const = 0;
    virtual SymbolBatch encode(const std::vector<int>& msgs) const = 0;
    virtual std::vector<int> decode(const SymbolBatch& y) const = 0;
};

// Learned autoencoder, frozen: codebook-normalized transmitter table plus
// receiver forward. pilot adds the explicit pilot use and equalization.
std::unique_ptr<Scheme> make_learned_scheme(const CommSystem& sys);
std::unique_ptr<Scheme> make_qpsk_scheme(int N, bool pilot);
std::unique_ptr<Scheme> make_constellation_scheme(Constellation c, bool pilot);

struct EvalConfig {
    long min_blocks = 100000;
    long min_errors = 100;
    long max_blocks = 10000000;
    long chunk_blocks = 4096;
};

// Counts block errors in fixed-size chunks until both minima are reached
// (or the cap). Chunk seeds derive from (rng seed, chunk index), so the
// result is independent of worker count.
BlerPoint estimate_bler(const Scheme& scheme, const ChannelSpec& chan, double snr_db,
                        const EvalConfig& cfg, const Rng& rng);

std::vector<BlerPoint> snr_sweep(const Scheme& scheme, const ChannelSpec& chan,
                                 const std::vector<double>& snr_list, const EvalConfig& cfg,
                                 const Rng& rng);

struct Theorem1Row {
    double sigma = 0.0;
    double cosine = 0.0;
    double norm_ratio = 0.0;   // |mean estimator| / |model-aware gradient|
    double cosine_se = 0.0;    // spread of per-sub-batch cosines / sqrt(k)
};

struct Theorem1Config {
    int M = 16;
    int N = 2;
    std::vector<double> sigmas{0.3, 0.15, 0.05};
    long batch = 100000;  // total estimator samples per sigma
    double snr_db = 10.0;
    long reference_batch = 1000000;
    int sub_batches = 10;
};

// Model-aware gradient vs the mean of the score-function estimator on the
// AWGN channel, for one random initialization. The estimator mean is
// measured with antithetic perturbation pairs (same expectation, far less
// Monte-Carlo noise), so the residual gap is the sigma-dependent bias.
std::vector<Theorem1Row> theorem1_check(const Theorem1Config& cfg, const Rng& rng);

struct VarianceRecord {
    int m = 0;
    int params = 0;
    double var_spsa = 0.0;
    double var_score = 0.0;
};

struct VarianceConfig {
    std::vector<int> m_list{5, 25, 50, 100};
    long batch = 1000;
    long inits = 1000;
    double sigma = 0.1;
    double spsa_c = 0.1;
};

// The a -> a^2 regression benchmark: per initialization, one SPSA
// substitute and one score-function estimate of grad J; reports the total
// variance of each estimate vector (per-coordinate variance across
// initializations, summed over the 3m+1 coordinates). No training steps
// are taken.
std::vector<VarianceRecord> variance_experiment(const VarianceConfig& cfg, const Rng& rng);

struct FeedbackRow {
    double snr_fb_db = 0.0;  // +inf encodes the noiseless link
    BlerPoint point;
};

// Trains one system per feedback SNR (same seed) and evaluates at the
// training SNR.
std::vector<FeedbackRow> feedback_sweep(const ArchConfig& arch, const ChannelSpec& chan,
                                        const TrainConfig& cfg,
                                        const std::vector<double>& snr_fb_list,
                                        const EvalConfig& eval_cfg);

// M rows x 2N columns of f(m) for all messages, post-normalization;
// loadable by load_constellation.
void dump_constellation(const Transmitter& tx, const std::string& path);

} // namespace e2e

#endif
