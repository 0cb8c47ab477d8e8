#include "e2e/train.hpp"

#include <chrono>
#include <cmath>

namespace e2e {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void append_step(TrainLog* log, long step, char phase, double loss) {
    if (!log) return;
    log->steps.push_back({step, phase, loss, now_ms() - log->t0_ms});
}

// pilot symbol 1+0j on the first channel use
SymbolBatch assemble_pilot_block(const SymbolBatch& data) {
    const std::size_t n = data.uses();
    SymbolBatch block(data.batch(), n + 1);
    for (std::size_t b = 0; b < data.batch(); ++b) {
        block.re(b, 0) = 1.0;
        block.im(b, 0) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            block.re(b, k + 1) = data.re(b, k);
            block.im(b, k + 1) = data.im(b, k);
        }
    }
    return block;
}

} // namespace

CommSystem make_system(const ArchConfig& arch, const ChannelSpec& chan, Rng& rng) {
    if (arch.pilot && !std::holds_alternative<RbfSpec>(chan))
        fail_config("pilot equalization is defined for the RBF channel only");
    CommSystem sys;
    sys.arch = arch;
    bool fiber = std::holds_alternative<FiberSpec>(chan) || arch.fiber_arch;
    sys.arch.fiber_arch = fiber;
    double target = channel_norm_target(chan);
    sys.tx = make_transmitter(arch.M, arch.N, rng, fiber, target);
    sys.rx = make_receiver(arch.M, arch.N, arch.rx_style, rng, fiber, target);
    return sys;
}

ChannelPass channel_forward(const SymbolBatch& x, const ChannelSpec& chan, bool pilot, Rng& rng,
                            bool want_vjp) {
    ChannelPass pass;
    if (auto* a = std::get_if<AwgnSpec>(&chan)) {
        if (pilot) fail_config("pilot path is defined for the RBF channel only");
        pass.rx_in = awgn(x, a->noise_std, rng).y;
        pass.has_tape = want_vjp;
        return pass;
    }
    if (auto* r = std::get_if<RbfSpec>(&chan)) {
        if (!pilot) {
            ChannelDraw draw = rbf(x, r->noise_std, rng);
            pass.rx_in = std::move(draw.y);
            pass.fading = std::move(draw.fading);
            pass.has_tape = want_vjp;
            return pass;
        }
        SymbolBatch block = assemble_pilot_block(x);
        ChannelDraw draw = rbf(block, r->noise_std, rng);
        const std::size_t n = x.uses();
        pass.fading = std::move(draw.fading);
        pass.hhat = Mat(x.batch(), 2);
        pass.rx_in = SymbolBatch(x.batch(), n);
        for (std::size_t b = 0; b < x.batch(); ++b) {
            double h1 = draw.y.re(b, 0), h2 = draw.y.im(b, 0);
            pass.hhat(b, 0) = h1;
            pass.hhat(b, 1) = h2;
            double s = h1 * h1 + h2 * h2 + kEqualizerEps;
            for (std::size_t k = 0; k < n; ++k) {
                double u = draw.y.re(b, k + 1), v = draw.y.im(b, k + 1);
                pass.rx_in.re(b, k) = (h1 * u + h2 * v) / s;
                pass.rx_in.im(b, k) = (h1 * v - h2 * u) / s;
            }
        }
        pass.has_tape = want_vjp;
        return pass;
    }
    const auto& f = std::get<FiberSpec>(chan);
    if (pilot) fail_config("pilot path is defined for the RBF channel only");
    ChannelDraw draw = fiber(x, f, rng, want_vjp ? &pass.fiber_tape : nullptr);
    pass.rx_in = std::move(draw.y);
    pass.has_tape = want_vjp;
    return pass;
}

SymbolBatch channel_vjp_apply(const ChannelPass& pass, const ChannelSpec& chan, bool pilot,
                              const SymbolBatch& g) {
    if (!pass.has_tape) fail_numeric("channel_vjp_apply: pass was taken sample-only");
    if (std::holds_alternative<AwgnSpec>(chan)) return g;  // y = x + n
    if (std::holds_alternative<RbfSpec>(chan)) {
        const std::size_t n = g.uses();
        SymbolBatch out(g.batch(), n);
        for (std::size_t b = 0; b < g.batch(); ++b) {
            double h1 = pass.fading(b, 0), h2 = pass.fading(b, 1);
            for (std::size_t k = 0; k < n; ++k) {
                double gr = g.re(b, k), gi = g.im(b, k);
                if (pilot) {
                    // through y_eq = conj(hhat) y / s first
                    double e1 = pass.hhat(b, 0), e2 = pass.hhat(b, 1);
                    double s = e1 * e1 + e2 * e2 + kEqualizerEps;
                    double tr = (e1 * gr - e2 * gi) / s;
                    double ti = (e2 * gr + e1 * gi) / s;
                    gr = tr;
                    gi = ti;
                }
                // Jacobian of complex multiply is [[h1,-h2],[h2,h1]]; apply transpose
                out.re(b, k) = h1 * gr + h2 * gi;
                out.im(b, k) = -h2 * gr + h1 * gi;
            }
        }
        return out;
    }
    return fiber_vjp(pass.fiber_tape, g);
}

std::vector<int> draw_messages(int count, int M, Rng& rng) {
    std::vector<int> msgs(static_cast<std::size_t>(count));
    for (auto& m : msgs) m = rng.uniform_int(M);
    return msgs;
}

std::vector<double> per_example_ce(const Mat& p, const std::vector<int>& msgs) {
    if (p.rows != msgs.size()) fail_numeric("per_example_ce: batch size mismatch");
    std::vector<double> l(p.rows);
    for (std::size_t i = 0; i < p.rows; ++i) l[i] = cross_entropy_row(p.row(i), p.cols, msgs[i]);
    return l;
}

namespace {

// dL/dP for the mean cross-entropy over the batch
Mat mean_ce_output_grad(const Mat& p, const std::vector<int>& msgs) {
    Mat g(p.rows, p.cols);
    const double inv_s = 1.0 / static_cast<double>(p.rows);
    for (std::size_t i = 0; i < p.rows; ++i) {
        int m = msgs[i];
        g(i, static_cast<std::size_t>(m)) =
            -inv_s / (p(i, static_cast<std::size_t>(m)) + kCrossEntropyEps);
    }
    return g;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

RxGradients rx_grad_estimate(const CommSystem& sys, const ChannelSpec& chan,
                             const std::vector<int>& msgs, Rng& noise_rng, double* mean_loss) {
    TxForward tf = tx_forward(sys.tx, msgs, NormMode::batch);
    ChannelPass pass = channel_forward(tf.x, chan, sys.arch.pilot, noise_rng, false);
    RxForward rf = rx_forward(sys.rx, pass.rx_in);
    if (mean_loss) *mean_loss = mean_of(per_example_ce(rf.p, msgs));
    Mat dp = mean_ce_output_grad(rf.p, msgs);
    RxGradients grads;
    rx_backward(sys.rx, rf.tape, dp, grads);
    return grads;
}

Gradients tx_grad_from_losses(const Transmitter& tx, const TxTape& tape, const Mat& score,
                              const std::vector<double>& losses) {
    if (score.rows != losses.size()) fail_numeric("tx_grad_from_losses: batch size mismatch");
    Mat g(score.rows, score.cols);
    const double inv_s = 1.0 / static_cast<double>(score.rows);
    for (std::size_t i = 0; i < score.rows; ++i) {
        const double w = losses[i] * inv_s;
        const double* si = score.row(i);
        double* gi = g.row(i);
        for (std::size_t j = 0; j < score.cols; ++j) gi[j] = w * si[j];
    }
    return tx_backward(tx, tape, g);
}

Gradients tx_grad_estimate(const CommSystem& sys, const ChannelSpec& chan, const Policy& policy,
                           const std::vector<int>& msgs, Rng& noise_rng,
                           std::optional<double> snr_fb_db, Rng* feedback_rng,
                           bool baseline_subtract, double* mean_loss, NormMode norm_mode) {
    TxForward tf = tx_forward(sys.tx, msgs, norm_mode);
    PolicyDraw draw = policy_sample(tf.x, policy, noise_rng, sys.tx.norm_target);
    ChannelPass pass = channel_forward(draw.x, chan, sys.arch.pilot, noise_rng, false);
    RxForward rf = rx_forward(sys.rx, pass.rx_in);
    std::vector<double> losses = per_example_ce(rf.p, msgs);
    if (mean_loss) *mean_loss = mean_of(losses);
    if (snr_fb_db) {
        if (!feedback_rng) fail_numeric("tx_grad_estimate: feedback SNR set without an rng");
        losses = noisy_feedback(losses, *snr_fb_db, *feedback_rng);
    }
    if (baseline_subtract) {
        double base = mean_of(losses);
        for (double& l : losses) l -= base;
    }
    Mat score = policy_score(tf.x, draw.x, policy, sys.tx.norm_target);
    return tx_grad_from_losses(sys.tx, tf.tape, score, losses);
}

Gradients tx_grad_mean_awgn_paired(const CommSystem& sys, double noise_std, const Policy& policy,
                                   const std::vector<int>& msgs, Rng& rng, NormMode norm_mode) {
    TxForward tf = tx_forward(sys.tx, msgs, norm_mode);
    const double ms = policy.mean_scale();
    const double target = sys.tx.norm_target;
    const double pstd = std::sqrt(policy.var_per_component(target));
    const std::size_t b = tf.x.m.rows, w = tf.x.m.cols;

    Mat pert(b, w), noise(b, w);
    for (double& v : pert.v) v = pstd * rng.normal();
    for (double& v : noise.v) v = noise_std * rng.normal();

    Mat y_plus(b, w), y_minus(b, w);
    for (std::size_t i = 0; i < y_plus.size(); ++i) {
        double base = ms * tf.x.m.v[i] + noise.v[i];
        y_plus.v[i] = base + pert.v[i];
        y_minus.v[i] = base - pert.v[i];
    }
    std::vector<double> l_plus =
        per_example_ce(rx_forward(sys.rx, SymbolBatch(std::move(y_plus))).p, msgs);
    std::vector<double> l_minus =
        per_example_ce(rx_forward(sys.rx, SymbolBatch(std::move(y_minus))).p, msgs);

    // mean over the 2B samples: (1/B) sum_pairs ((l+ - l-)/2) * score(+w)
    Mat g(b, w);
    const double var = policy.var_per_component(target);
    const double inv_pairs = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        double weight = 0.5 * (l_plus[i] - l_minus[i]) * inv_pairs;
        const double* wi = pert.row(i);
        double* gi = g.row(i);
        for (std::size_t j = 0; j < w; ++j) gi[j] = weight * ms * wi[j] / var;
    }
    return tx_backward(sys.tx, tf.tape, g);
}

AwareGrads model_aware_grads(const CommSystem& sys, const ChannelSpec& chan,
                             const std::vector<int>& msgs, Rng& noise_rng, NormMode norm_mode) {
    if (std::holds_alternative<FiberSpec>(chan) && sys.arch.pilot)
        fail_config("pilot path is defined for the RBF channel only");
    TxForward tf = tx_forward(sys.tx, msgs, norm_mode);
    ChannelPass pass = channel_forward(tf.x, chan, sys.arch.pilot, noise_rng, true);
    RxForward rf = rx_forward(sys.rx, pass.rx_in);
    AwareGrads out;
    out.mean_loss = mean_of(per_example_ce(rf.p, msgs));
    Mat dp = mean_ce_output_grad(rf.p, msgs);
    Mat dy = rx_backward(sys.rx, rf.tape, dp, out.rx);
    SymbolBatch dx = channel_vjp_apply(pass, chan, sys.arch.pilot, SymbolBatch(std::move(dy)));
    out.tx = tx_backward(sys.tx, tf.tape, dx.m);
    return out;
}

TrainState make_train_state(const ArchConfig& arch, const ChannelSpec& chan,
                            const TrainConfig& cfg, Rng& init_rng) {
    TrainState st;
    st.sys = make_system(arch, chan, init_rng);
    st.adam_tx = make_adam(st.sys.tx.net, cfg.lr);
    st.adam_rx = make_adam(st.sys.rx.discriminative, cfg.lr);
    if (st.sys.rx.transformer) st.adam_rx_transformer = make_adam(*st.sys.rx.transformer, cfg.lr);
    return st;
}

void train_receiver_phase(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg,
                          Rng& msg_rng, Rng& noise_rng, TrainLog* log) {
    for (int s = 0; s < cfg.rx_steps; ++s) {
        std::vector<int> msgs = draw_messages(cfg.batch_rx, state.sys.arch.M, msg_rng);
        double loss = 0.0;
        RxGradients grads = rx_grad_estimate(state.sys, chan, msgs, noise_rng, &loss);
        adam_update(state.sys.rx.discriminative, grads.discriminative, state.adam_rx);
        if (state.sys.rx.transformer)
            adam_update(*state.sys.rx.transformer, grads.transformer, state.adam_rx_transformer);
        state.global_step += 1;
        append_step(log, state.global_step, 'r', loss);
    }
}

void train_transmitter_phase(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg,
                             Rng& msg_rng, Rng& noise_rng, Rng& feedback_rng, TrainLog* log) {
    Policy policy{cfg.sigma, cfg.conserve_energy};
    for (int s = 0; s < cfg.tx_steps; ++s) {
        std::vector<int> msgs = draw_messages(cfg.batch_tx, state.sys.arch.M, msg_rng);
        double loss = 0.0;
        Gradients grads =
            tx_grad_estimate(state.sys, chan, policy, msgs, noise_rng, cfg.feedback_snr_db,
                             &feedback_rng, cfg.baseline_subtract, &loss);
        adam_update(state.sys.tx.net, grads, state.adam_tx);
        state.global_step += 1;
        append_step(log, state.global_step, 't', loss);
    }
}

TrainLog alternating_train(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg) {
    ChannelSpec at_snr = channel_at_snr(chan, cfg.train_snr_db);
    Rng root(cfg.seed);
    Rng msg_rng = root.derive(1);
    Rng noise_rng = root.derive(2);
    Rng feedback_rng = root.derive(3);
    TrainLog log;
    log.t0_ms = now_ms();
    for (int it = 0; it < cfg.outer_iters; ++it) {
        train_receiver_phase(state, at_snr, cfg, msg_rng, noise_rng, &log);
        train_transmitter_phase(state, at_snr, cfg, msg_rng, noise_rng, feedback_rng, &log);
    }
    return log;
}

TrainLog model_aware_train(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg) {
    ChannelSpec at_snr = channel_at_snr(chan, cfg.train_snr_db);
    Rng root(cfg.seed);
    Rng msg_rng = root.derive(1);
    Rng noise_rng = root.derive(2);
    TrainLog log;
    log.t0_ms = now_ms();
    const int steps_per_iter = cfg.rx_steps;  // ten joint steps per iteration
    for (int it = 0; it < cfg.outer_iters; ++it) {
        for (int s = 0; s < steps_per_iter; ++s) {
            std::vector<int> msgs = draw_messages(cfg.batch_rx, state.sys.arch.M, msg_rng);
            AwareGrads grads = model_aware_grads(state.sys, at_snr, msgs, noise_rng);
            adam_update(state.sys.tx.net, grads.tx, state.adam_tx);
            adam_update(state.sys.rx.discriminative, grads.rx.discriminative, state.adam_rx);
            if (state.sys.rx.transformer)
                adam_update(*state.sys.rx.transformer, grads.rx.transformer,
                            state.adam_rx_transformer);
            state.global_step += 1;
            append_step(&log, state.global_step, 'j', grads.mean_loss);
        }
    }
    return log;
}

std::vector<double> spsa_grad(const std::function<double(const std::vector<double>&)>& objective,
                              const std::vector<double>& theta, double c_k, Rng& rng) {
    if (c_k <= 0.0) fail_numeric("spsa_grad: c_k must be positive");
    std::vector<double> delta(theta.size());
    for (auto& d : delta) d = rng.rademacher();
    std::vector<double> plus = theta, minus = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        plus[i] += c_k * delta[i];
        minus[i] -= c_k * delta[i];
    }
    double diff = (objective(plus) - objective(minus)) / (2.0 * c_k);
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) g[i] = diff * delta[i];
    return g;
}

TrainLog spsa_train(TrainState& state, const ChannelSpec& chan, const TrainConfig& cfg) {
    ChannelSpec at_snr = channel_at_snr(chan, cfg.train_snr_db);
    Rng root(cfg.seed);
    Rng msg_rng = root.derive(1);
    Rng noise_rng = root.derive(2);
    Rng spsa_rng = root.derive(4);
    TrainLog log;
    log.t0_ms = now_ms();
    for (int it = 0; it < cfg.outer_iters; ++it) {
        train_receiver_phase(state, at_snr, cfg, msg_rng, noise_rng, &log);
        for (int s = 0; s < cfg.tx_steps; ++s) {
            std::vector<int> msgs = draw_messages(cfg.batch_tx, state.sys.arch.M, msg_rng);
            // both SPSA probes see the same channel draws
            const uint64_t probe_seed = noise_rng.next_u64();
            CommSystem probe = state.sys;
            auto objective = [&](const std::vector<double>& theta) {
                unflatten_params(probe.tx.net, theta);
                TxForward tf = tx_forward(probe.tx, msgs, NormMode::batch);
                Rng probe_rng(probe_seed);
                ChannelPass pass =
                    channel_forward(tf.x, at_snr, probe.arch.pilot, probe_rng, false);
                RxForward rf = rx_forward(probe.rx, pass.rx_in);
                return mean_of(per_example_ce(rf.p, msgs));
            };
            std::vector<double> theta = flatten_params(state.sys.tx.net);
            double k = static_cast<double>(state.spsa_step);
            double c_k = cfg.spsa_c / std::pow(k + 1.0, cfg.spsa_gamma);
            double a_k = cfg.spsa_a / std::pow(k + 1.0, cfg.spsa_alpha);
            std::vector<double> g = spsa_grad(objective, theta, c_k, spsa_rng);
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= a_k * g[i];
            unflatten_params(state.sys.tx.net, theta);
            state.spsa_step += 1;
            state.global_step += 1;
            append_step(&log, state.global_step, 's', objective(theta));
        }
    }
    return log;
}

} // namespace e2e
