#ifndef E2E_TRAIN_HPP
#define E2E_TRAIN_HPP

#include <functional>
#include <optional>
#include <vector>

#include "e2e/channel.hpp"
#include "e2e/transceiver.hpp"

namespace e2e {

struct ArchConfig {
    int M = 16;
    int N = 1;
    RxStyle rx_style = RxStyle::discriminative;
    bool pilot = false;       // explicit pilot equalization (RBF)
    bool fiber_arch = false;  // 64-unit ReLU architectures
};

struct CommSystem {
    ArchConfig arch;
    Transmitter tx;
    Receiver rx;
};

// norm target and fiber architecture follow the channel kind
CommSystem make_system(const ArchConfig& arch, const ChannelSpec& chan, Rng& rng);

struct TrainConfig {
    int batch_rx = 256;
    int batch_tx = 256;
    int outer_iters = 100;
    int rx_steps = 10;
    int tx_steps = 10;
    double sigma = 0.15;
    double train_snr_db = 10.0;
    std::optional<double> feedback_snr_db;  // nullopt = noiseless feedback
    double lr = 1e-3;
    uint64_t seed = 1;
    bool baseline_subtract = false;
    bool conserve_energy = true;
    // SPSA schedule: a_k = a/(k+1)^alpha, c_k = c/(k+1)^gamma
    double spsa_a = 0.01;
    double spsa_c = 0.1;
    double spsa_alpha = 0.602;
    double spsa_gamma = 0.101;
};

struct StepRecord {
    long step = 0;
    char phase = '?';  // 'r' receiver, 't' transmitter, 'j' joint, 's' spsa
    double loss = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    double t0_ms = 0.0;  // baseline for the informational wall_ms column
    std::vector<StepRecord> steps;
};

// One stochastic pass of transmit symbols through the channel, including
// the explicit pilot path. Keeps what the reverse pass needs when asked.
struct ChannelPass {
    SymbolBatch rx_in;  // what the receiver consumes
    Mat fading;         // RBF h per block
    Mat hhat;           // pilot estimate per block (pilot mode)
    FiberTape fiber_tape;
    bool has_tape = false;
};

ChannelPass channel_forward(const SymbolBatch& x, const ChannelSpec& chan, bool pilot, Rng& rng,
                            bool want_vjp);
// dL/d(transmitted data symbols) from dL/d(receiver input)
SymbolBatch channel_vjp_apply(const ChannelPass& pass, const ChannelSpec& chan, bool pilot,
                              const SymbolBatch& dL_drx_in);

std::vector<int> draw_messages(int count, int M, Rng& rng);

std::vector<double> per_example_ce(const Mat& p, const std::vector<int>& msgs);

// Eq.-style receiver gradient: (1/S) sum grad_thetaR l(f_R(y_i), m_i),
// exact backprop through the receiver only.
RxGradients rx_grad_estimate(const CommSystem& sys, const ChannelSpec& chan,
                             const std::vector<int>& msgs, Rng& noise_rng,
                             double* mean_loss = nullptr);

// Score-function transmitter gradient: (1/S) sum l_i * J_f(m_i)^T score_i,
// computed as one backward pass over the transmitter tape. Losses can be
// routed through the noisy feedback model; baseline_subtract removes the
// batch-mean loss (control variate, unchanged expectation).
Gradients tx_grad_estimate(const CommSystem& sys, const ChannelSpec& chan, const Policy& policy,
                           const std::vector<int>& msgs, Rng& noise_rng,
                           std::optional<double> snr_fb_db = std::nullopt,
                           Rng* feedback_rng = nullptr, bool baseline_subtract = false,
                           double* mean_loss = nullptr, NormMode norm_mode = NormMode::batch);

// Gradient core shared with tests: weights per-example rows of the score
// by the given losses.
Gradients tx_grad_from_losses(const Transmitter& tx, const TxTape& tape, const Mat& score,
                              const std::vector<double>& losses);

// Low-variance measurement of the same expectation as tx_grad_estimate on
// the AWGN channel: each message contributes an antithetic perturbation
// pair (+w, -w) sharing one channel noise draw. Every sample keeps the
// policy's marginal law, so the mean is unchanged while the loss level
// cancels inside each pair. msgs.size() pairs = 2*msgs.size() samples.
Gradients tx_grad_mean_awgn_paired(const CommSystem& sys, double noise_std, const Policy& policy,
                                   const std::vector<int>& msgs, Rng& rng,
                                   NormMode norm_mode = NormMode::codebook);

struct AwareGrads {
    Gradients tx;
    RxGradients rx;
    double mean_loss = 0.0;
};

// Joint gradient through receiver, channel reverse pass, and transmitter.
AwareGrads model_aware_grads(const CommSystem& sys, const ChannelSpec& chan,
                             const std::vector<int>& msgs, Rng& noise_rng,
                             NormMode norm_mode = NormMode::batch);

struct TrainState {
    CommSystem sys;
    AdamState adam_tx;
    AdamState adam_rx;
    AdamState adam_rx_transformer;
    long global_step = 0;
    long spsa_step = 0;
};

TrainState make_train_state(const ArchConfig& arch, const ChannelSpec& chan,
                            const TrainConfig& cfg, Rng& init_rng);

// Algorithm "training of the receiver": cfg.rx_steps Adam steps with the
// transmitter frozen; no relaxation of the transmitter output.
void train_receiver_phase(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg,
                          Rng& msg_rng, Rng& noise_rng, TrainLog* log);

// Algorithm "training of the transmitter": cfg.tx_steps Adam steps with the
// receiver frozen; losses pass through the feedback link model when set.
void train_transmitter_phase(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg,
                             Rng& msg_rng, Rng& noise_rng, Rng& feedback_rng, TrainLog* log);

// Alternating algorithm: fixed number of {receiver phase; transmitter
// phase} iterations.
TrainLog alternating_train(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg);

// Joint backprop through a differentiable channel; ten end-to-end steps
// are counted per outer iteration for fairness with the alternating runs.
TrainLog model_aware_train(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg);

// g = [L(theta + c_k D) - L(theta - c_k D)] / (2 c_k) * D, D Rademacher
std::vector<double> spsa_grad(const std::function<double(const std::vector<double>&)>& objective,
                              const std::vector<double>& theta, double c_k, Rng& rng);

// Receiver trained as usual; transmitter by SPSA steps on the sampled loss.
TrainLog spsa_train(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg);

} // namespace e2e

#endif
