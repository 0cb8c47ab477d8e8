#ifndef E2E_TRANSCEIVER_HPP
#define E2E_TRANSCEIVER_HPP

#include <optional>
#include <vector>

#include "e2e/channel.hpp"
#include "e2e/mlp.hpp"

namespace e2e {

// Gaussian relaxation of the transmitter output. With energy conservation
// x = sqrt(1-sigma^2) * xbar + w, w ~ N(0, sigma^2/2 * target) per real
// component, so E[per-symbol energy] stays at the normalization target.
// The literal reading of w ~ N(0, sigma^2 I) per real component is kept
// behind conserve_energy = false.
struct Policy {
    double sigma = 0.15;
    bool conserve_energy = true;

    double mean_scale() const { return std::sqrt(1.0 - sigma * sigma); }
    double var_per_component(double target = 1.0) const {
        return (conserve_energy ? 0.5 * sigma * sigma : sigma * sigma) * target;
    }
};

struct Transmitter {
    int M = 0;
    int N = 0;
    Mlp net;                    // one-hot M -> ... -> 2N linear
    double norm_target = 1.0;   // 1 for wireless, P_in for fiber
    bool fiber_arch = false;
};

// Wireless: dense M with ELU, then 2N linear. Fiber: two hidden layers of
// 64 ReLU units, then 2N linear.
Transmitter make_transmitter(int M, int N, Rng& rng, bool fiber_arch = false,
                             double norm_target = 1.0);

enum class RxStyle { discriminative, transformer };

struct Receiver {
    int M = 0;
    int N = 0;
    Mlp discriminative;              // ... -> M softmax
    std::optional<Mlp> transformer;  // 2N -> ... -> 2 linear (h estimate)
    // Fixed input standardization, 1/sqrt(norm target). Keeps the nets
    // conditioned when the symbol power is far from one (fiber P_in).
    double input_scale = 1.0;
};

Receiver make_receiver(int M, int N, RxStyle style, Rng& rng, bool fiber_arch = false,
                       double norm_target = 1.0);

Mat one_hot(int m, int M);
Mat one_hot_batch(const std::vector<int>& msgs, int M);

// Scales all entries by one scalar so that the batch mean energy per
// complex symbol equals target. Returns the scale.
double normalize_batch(SymbolBatch& x, double target);

enum class NormMode {
    batch,     // scale from the minibatch (training; approximate for small B)
    codebook,  // scale from the full message set (evaluation; deterministic)
};

struct TxTape {
    Tape net_tape;          // batch forward, pre-normalization
    Mat prenorm;            // B x 2N network output before scaling
    double scale = 1.0;
    double energy = 0.0;    // sum of squares the scale was derived from
    NormMode mode = NormMode::batch;
    Tape codebook_tape;     // filled in codebook mode
    Mat codebook_prenorm;
};

struct TxForward {
    SymbolBatch x;
    TxTape tape;
};

TxForward tx_forward(const Transmitter& tx, const std::vector<int>& msgs,
                     NormMode mode = NormMode::batch);

// Exact gradients of sum_i <dL_dx[i], x_i> w.r.t. the transmitter
// parameters, including the normalization scale.
Gradients tx_backward(const Transmitter& tx, const TxTape& tape, const Mat& dL_dx);

// The full normalized codebook: row m = f(m). Used for evaluation,
// constellation dumps and ML-style analysis.
Mat tx_codebook(const Transmitter& tx);

struct PolicyDraw {
    SymbolBatch x;
    Mat perturbation;  // w = x - mean_scale * xbar
};

PolicyDraw policy_sample(const SymbolBatch& xbar, const Policy& policy, Rng& rng,
                         double target = 1.0);

// Gradient of the Gaussian log-density w.r.t. xbar, evaluated per example:
// mean_scale * (x - mean_scale*xbar) / var_per_component.
Mat policy_score(const SymbolBatch& xbar, const SymbolBatch& x, const Policy& policy,
                 double target = 1.0);

struct EqTape {
    Tape transformer_tape;
    Mat y;         // receiver input
    Mat hhat;      // B x 2
    std::vector<double> s;  // |hhat|^2 + eps per block
    Mat y_eq;
};

constexpr double kEqualizerEps = 1e-9;

// hhat from the transformer sub-net, then per block
// y_eq = (1/|hhat|^2) [[h1 I, h2 I], [-h2 I, h1 I]] y  (complex division).
void transformer_equalize(const Receiver& rx, const SymbolBatch& y, EqTape& tape);

struct RxTape {
    bool equalized = false;
    EqTape eq;
    Tape disc_tape;
};

struct RxForward {
    Mat p;  // B x M probability rows
    RxTape tape;
};

RxForward rx_forward(const Receiver& rx, const SymbolBatch& y);

struct RxGradients {
    Gradients discriminative;
    Gradients transformer;
};

// Returns dL/dy (for chaining through differentiable channels).
Mat rx_backward(const Receiver& rx, const RxTape& tape, const Mat& dL_dp, RxGradients& grads);

// argmax per probability row; ties go to the lowest index
std::vector<int> decide(const Mat& p);

} // namespace e2e

#endif
