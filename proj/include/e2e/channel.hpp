#ifndef E2E_CHANNEL_HPP
#define E2E_CHANNEL_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "e2e/mat.hpp"
#include "e2e/rng.hpp"

namespace e2e {

// B x 2N real matrix of channel symbols: columns [0, N) carry the real
// parts, [N, 2N) the imaginary parts of the N complex uses.
struct SymbolBatch {
    Mat m;

    SymbolBatch() = default;
    explicit SymbolBatch(Mat mat) : m(std::move(mat)) {}
    SymbolBatch(std::size_t batch, std::size_t uses) : m(batch, 2 * uses) {}

    std::size_t batch() const { return m.rows; }
    std::size_t uses() const { return m.cols / 2; }

    double& re(std::size_t b, std::size_t n) { return m(b, n); }
    double re(std::size_t b, std::size_t n) const { return m(b, n); }
    double& im(std::size_t b, std::size_t n) { return m(b, uses() + n); }
    double im(std::size_t b, std::size_t n) const { return m(b, uses() + n); }
};

// noise_std is per real dimension for the wireless channels; the fiber
// model follows the usual optics convention where noise_power is the
// total variance per complex sample.
struct AwgnSpec {
    double noise_std = 0.0;
};

struct RbfSpec {
    double noise_std = 0.0;
};

struct FiberSpec {
    double length_km = 5000.0;
    double gamma_per_w_km = 1.27;
    int steps = 50;
    double noise_power = 0.0;       // sigma_n^2, total per complex sample
    double input_power_w = 1e-4;    // P_in, normalization target
};

using ChannelSpec = std::variant<AwgnSpec, RbfSpec, FiberSpec>;

const char* channel_kind_name(const ChannelSpec& spec);

// sigma_n = sqrt(1 / (2 * 10^(snr_db/10))), from SNR = 1/(2 sigma_n^2)
// under unit average symbol energy.
double snr_to_noise_std(double snr_db);

// Same spec with the noise level set for the given SNR point. For the
// fiber channel SNR is taken as P_in / sigma_n^2.
ChannelSpec channel_at_snr(const ChannelSpec& spec, double snr_db);

double channel_norm_target(const ChannelSpec& spec);  // 1 for wireless, P_in for fiber

struct ChannelDraw {
    SymbolBatch y;
    Mat fading;                  // B x 2, per-block h (RBF only)
    std::vector<Mat> jacobian;   // per-block 2N x 2N input Jacobian, when requested
};

ChannelDraw awgn(const SymbolBatch& x, double noise_std, Rng& rng, bool want_jacobian = false);
ChannelDraw rbf(const SymbolBatch& x, double noise_std, Rng& rng, bool want_jacobian = false);

// Noiseless complex multiply by per-block h; exposed for tests and for the
// equalization algebra.
SymbolBatch rbf_apply_h(const SymbolBatch& x, const Mat& h);

// Per-step state of the fiber recursion, kept when the caller needs the
// reverse pass (model-aware training).
struct FiberTape {
    int steps = 0;
    double alpha = 0.0;                      // L*gamma/K
    std::vector<double> state;               // per (block,use,step): a, b, out_re, out_im
    std::size_t batch = 0, uses = 0;
};

// K steps of nonlinear phase rotation with per-step complex noise of
// variance noise_power/K. Sample-only; pass a tape to enable fiber_vjp.
ChannelDraw fiber(const SymbolBatch& x, const FiberSpec& spec, Rng& rng, FiberTape* tape = nullptr);

SymbolBatch fiber_vjp(const FiberTape& tape, const SymbolBatch& dL_dy);

// l~ = l + e, e ~ N(0, sigma_e^2) with sigma_e^2 = mean(l^2)/10^(snr_fb/10)
// estimated on the batch. +inf leaves the losses untouched.
std::vector<double> noisy_feedback(const std::vector<double>& losses, double snr_fb_db, Rng& rng);

} // namespace e2e

#endif
