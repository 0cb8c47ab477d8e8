#include "e2e/transceiver.hpp"

#include <cmath>
#include <string>

namespace e2e {

Transmitter make_transmitter(int M, int N, Rng& rng, bool fiber_arch, double norm_target) {
    if (M < 2 || N < 1) fail_numeric("make_transmitter: need M >= 2, N >= 1");
    if (norm_target <= 0.0) fail_numeric("make_transmitter: norm_target must be positive");
    Transmitter tx;
    tx.M = M;
    tx.N = N;
    tx.norm_target = norm_target;
    tx.fiber_arch = fiber_arch;
    std::size_t out = static_cast<std::size_t>(2 * N);
    if (fiber_arch) {
        tx.net = make_mlp(static_cast<std::size_t>(M),
                          {{64, Act::relu}, {64, Act::relu}, {out, Act::linear}}, rng);
    } else {
        tx.net = make_mlp(static_cast<std::size_t>(M),
                          {{static_cast<std::size_t>(M), Act::elu}, {out, Act::linear}}, rng);
    }
    return tx;
}

Receiver make_receiver(int M, int N, RxStyle style, Rng& rng, bool fiber_arch,
                       double norm_target) {
    if (M < 2 || N < 1) fail_numeric("make_receiver: need M >= 2, N >= 1");
    if (norm_target <= 0.0) fail_numeric("make_receiver: norm_target must be positive");
    Receiver rx;
    rx.M = M;
    rx.N = N;
    rx.input_scale = 1.0 / std::sqrt(norm_target);
    std::size_t in = static_cast<std::size_t>(2 * N);
    std::size_t m = static_cast<std::size_t>(M);
    if (fiber_arch) {
        rx.discriminative = make_mlp(in, {{64, Act::relu}, {64, Act::relu}, {m, Act::softmax}}, rng);
    } else {
        rx.discriminative = make_mlp(in, {{m, Act::relu}, {m, Act::softmax}}, rng);
    }
    if (style == RxStyle::transformer) {
        rx.transformer = make_mlp(in, {{2 * m, Act::relu}, {2, Act::linear}}, rng);
    }
    return rx;
}

Mat one_hot(int m, int M) {
    if (m < 0 || m >= M) fail_numeric("one_hot: message " + std::to_string(m) + " out of range");
    Mat v(1, static_cast<std::size_t>(M));
    v(0, static_cast<std::size_t>(m)) = 1.0;
    return v;
}

Mat one_hot_batch(const std::vector<int>& msgs, int M) {
    Mat v(msgs.size(), static_cast<std::size_t>(M));
    for (std::size_t i = 0; i < msgs.size(); ++i) {
        if (msgs[i] < 0 || msgs[i] >= M) fail_numeric("one_hot_batch: message out of range");
        v(i, static_cast<std::size_t>(msgs[i])) = 1.0;
    }
    return v;
}

double normalize_batch(SymbolBatch& x, double target) {
    double energy = sum_squares(x.m);
    if (energy <= 0.0) fail_numeric("normalize_batch: all-zero batch");
    double want = target * static_cast<double>(x.batch()) * static_cast<double>(x.uses());
    double c = std::sqrt(want / energy);
    scale_inplace(x.m, c);
    return c;
}

TxForward tx_forward(const Transmitter& tx, const std::vector<int>& msgs, NormMode mode) {
    if (msgs.empty()) fail_numeric("tx_forward: empty batch");
    TxForward out;
    out.tape.mode = mode;
    Mat onehot = one_hot_batch(msgs, tx.M);
    out.tape.prenorm = forward(tx.net, onehot, &out.tape.net_tape);

    double energy, want;
    if (mode == NormMode::batch) {
        energy = sum_squares(out.tape.prenorm);
        want = tx.norm_target * static_cast<double>(msgs.size()) * static_cast<double>(tx.N);
    } else {
        Mat all = Mat(static_cast<std::size_t>(tx.M), static_cast<std::size_t>(tx.M));
        for (int m = 0; m < tx.M; ++m) all(m, m) = 1.0;
        out.tape.codebook_prenorm = forward(tx.net, all, &out.tape.codebook_tape);
        energy = sum_squares(out.tape.codebook_prenorm);
        want = tx.norm_target * static_cast<double>(tx.M) * static_cast<double>(tx.N);
    }
    if (energy <= 0.0) fail_numeric("tx_forward: all-zero transmitter output");
    out.tape.energy = energy;
    out.tape.scale = std::sqrt(want / energy);

    Mat x = out.tape.prenorm;
    scale_inplace(x, out.tape.scale);
    out.x = SymbolBatch(std::move(x));
    return out;
}

Gradients tx_backward(const Transmitter& tx, const TxTape& tape, const Mat& dL_dx) {
    require_same_shape(dL_dx, tape.prenorm, "tx_backward");
    const double c = tape.scale;
    const double e = tape.energy;
    const double gf = dot_all(dL_dx, tape.prenorm);  // <G, F>

    Gradients grads;
    if (tape.mode == NormMode::batch) {
        // x = c(F) * F with c = sqrt(T/E), E = sum F^2 over the batch:
        // dL/dF = c * (G - (<G,F>/E) F)
        Mat g = dL_dx;
        axpy(-gf / e, tape.prenorm, g);
        scale_inplace(g, c);
        backward(tx.net, tape.net_tape, g, grads);
    } else {
        // Scale comes from the codebook: batch path with constant c plus
        // the chain through E = sum F_cb^2.
        Mat g = dL_dx;
        scale_inplace(g, c);
        backward(tx.net, tape.net_tape, g, grads);
        Mat gcb = tape.codebook_prenorm;
        scale_inplace(gcb, -gf * c / e);
        Gradients cb_grads;
        backward(tx.net, tape.codebook_tape, gcb, cb_grads);
        accumulate(grads, cb_grads);
    }
    return grads;
}

Mat tx_codebook(const Transmitter& tx) {
    std::vector<int> all(static_cast<std::size_t>(tx.M));
    for (int m = 0; m < tx.M; ++m) all[static_cast<std::size_t>(m)] = m;
    return tx_forward(tx, all, NormMode::batch).x.m;
}

PolicyDraw policy_sample(const SymbolBatch& xbar, const Policy& policy, Rng& rng, double target) {
    if (!(policy.sigma > 0.0 && policy.sigma < 1.0))
        fail_numeric("policy_sample: sigma must be in (0,1)");
    const double ms = policy.mean_scale();
    const double std = std::sqrt(policy.var_per_component(target));
    PolicyDraw draw;
    draw.perturbation = Mat(xbar.m.rows, xbar.m.cols);
    for (double& w : draw.perturbation.v) w = std * rng.normal();
    Mat x = xbar.m;
    scale_inplace(x, ms);
    axpy(1.0, draw.perturbation, x);
    draw.x = SymbolBatch(std::move(x));
    return draw;
}

Mat policy_score(const SymbolBatch& xbar, const SymbolBatch& x, const Policy& policy,
                 double target) {
    if (policy.sigma <= 0.0) fail_numeric("policy_score: degenerate policy (sigma = 0)");
    require_same_shape(xbar.m, x.m, "policy_score");
    const double ms = policy.mean_scale();
    const double var = policy.var_per_component(target);
    Mat score(x.m.rows, x.m.cols);
    for (std::size_t i = 0; i < score.size(); ++i)
        score.v[i] = ms * (x.m.v[i] - ms * xbar.m.v[i]) / var;
    return score;
}

void transformer_equalize(const Receiver& rx, const SymbolBatch& y, EqTape& tape) {
    if (!rx.transformer) fail_numeric("transformer_equalize: receiver has no transformer");
    const std::size_t n = y.uses();
    tape.y = y.m;
    scale_inplace(tape.y, rx.input_scale);
    tape.hhat = forward(*rx.transformer, tape.y, &tape.transformer_tape);
    tape.s.resize(y.batch());
    tape.y_eq = Mat(y.m.rows, y.m.cols);
    for (std::size_t b = 0; b < y.batch(); ++b) {
        double h1 = tape.hhat(b, 0), h2 = tape.hhat(b, 1);
        double s = h1 * h1 + h2 * h2 + kEqualizerEps;
        tape.s[b] = s;
        for (std::size_t k = 0; k < n; ++k) {
            double u = tape.y(b, k), v = tape.y(b, n + k);
            tape.y_eq(b, k) = (h1 * u + h2 * v) / s;
            tape.y_eq(b, n + k) = (h1 * v - h2 * u) / s;
        }
    }
}

RxForward rx_forward(const Receiver& rx, const SymbolBatch& y) {
    if (y.m.cols != rx.discriminative.input_width() && !rx.transformer)
        fail_numeric("rx_forward: input width " + std::to_string(y.m.cols) + ", expected " +
                     std::to_string(rx.discriminative.input_width()));
    RxForward out;
    if (rx.transformer) {
        out.tape.equalized = true;
        transformer_equalize(rx, y, out.tape.eq);
        out.p = forward(rx.discriminative, out.tape.eq.y_eq, &out.tape.disc_tape);
    } else {
        Mat scaled = y.m;
        scale_inplace(scaled, rx.input_scale);
        out.p = forward(rx.discriminative, scaled, &out.tape.disc_tape);
    }
    return out;
}

Mat rx_backward(const Receiver& rx, const RxTape& tape, const Mat& dL_dp, RxGradients& grads) {
    Mat g_in = backward(rx.discriminative, tape.disc_tape, dL_dp, grads.discriminative);
    if (!tape.equalized) {
        scale_inplace(g_in, rx.input_scale);
        return g_in;
    }

    // Reverse of the equalization: contributions to y through the linear
    // transform and to hhat through the scale and rotation.
    const EqTape& eq = tape.eq;
    const std::size_t n = eq.y.cols / 2;
    Mat g_h(eq.hhat.rows, 2);
    Mat g_y(eq.y.rows, eq.y.cols);
    for (std::size_t b = 0; b < eq.y.rows; ++b) {
        double h1 = eq.hhat(b, 0), h2 = eq.hhat(b, 1);
        double s = eq.s[b];
        double ga = 0.0, gb = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double u = eq.y(b, k), v = eq.y(b, n + k);
            double outr = eq.y_eq(b, k), outi = eq.y_eq(b, n + k);
            double gr = g_in(b, k), gi = g_in(b, n + k);
            g_y(b, k) = (h1 * gr - h2 * gi) / s;
            g_y(b, n + k) = (h2 * gr + h1 * gi) / s;
            ga += (gr * (u - 2.0 * h1 * outr) + gi * (v - 2.0 * h1 * outi)) / s;
            gb += (gr * (v - 2.0 * h2 * outr) + gi * (-u - 2.0 * h2 * outi)) / s;
        }
        g_h(b, 0) = ga;
        g_h(b, 1) = gb;
    }
    Mat g_y_from_h = backward(*rx.transformer, eq.transformer_tape, g_h, grads.transformer);
    axpy(1.0, g_y_from_h, g_y);
    scale_inplace(g_y, rx.input_scale);
    return g_y;
}

std::vector<int> decide(const Mat& p) {
    std::vector<int> out(p.rows);
    for (std::size_t i = 0; i < p.rows; ++i) {
        const double* row = p.row(i);
        int best = 0;
        for (std::size_t j = 1; j < p.cols; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        out[i] = best;
    }
    return out;
}

} // namespace e2e
