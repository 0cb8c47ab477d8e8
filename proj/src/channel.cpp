#include "e2e/channel.hpp"

#include <cmath>
#include <limits>

namespace e2e {

const char* channel_kind_name(const ChannelSpec& spec) {
    if (std::holds_alternative<AwgnSpec>(spec)) return "awgn";
    if (std::holds_alternative<RbfSpec>(spec)) return "rbf";
    return "fiber";
}

double snr_to_noise_std(double snr_db) {
    return std::sqrt(0.5 * std::pow(10.0, -snr_db / 10.0));
}

ChannelSpec channel_at_snr(const ChannelSpec& spec, double snr_db) {
    ChannelSpec out = spec;
    if (auto* a = std::get_if<AwgnSpec>(&out)) {
        a->noise_std = snr_to_noise_std(snr_db);
    } else if (auto* r = std::get_if<RbfSpec>(&out)) {
        r->noise_std = snr_to_noise_std(snr_db);
    } else {
        auto& f = std::get<FiberSpec>(out);
        f.noise_power = f.input_power_w / std::pow(10.0, snr_db / 10.0);
    }
    return out;
}

double channel_norm_target(const ChannelSpec& spec) {
    if (auto* f = std::get_if<FiberSpec>(&spec)) return f->input_power_w;
    return 1.0;
}

ChannelDraw awgn(const SymbolBatch& x, double noise_std, Rng& rng, bool want_jacobian) {
    if (noise_std < 0.0) fail_numeric("awgn: negative noise std");
    ChannelDraw draw;
    draw.y = x;
    if (noise_std > 0.0) {
        for (double& v : draw.y.m.v) v += noise_std * rng.normal();
    }
    if (want_jacobian) {
        Mat eye(x.m.cols, x.m.cols);
        for (std::size_t i = 0; i < eye.rows; ++i) eye(i, i) = 1.0;
        draw.jacobian.assign(x.batch(), eye);
    }
    return draw;
}

SymbolBatch rbf_apply_h(const SymbolBatch& x, const Mat& h) {
    if (h.rows != x.batch() || h.cols != 2) fail_numeric("rbf_apply_h: bad fading shape");
    const std::size_t n = x.uses();
    SymbolBatch y(x.batch(), n);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        double h1 = h(b, 0), h2 = h(b, 1);
        for (std::size_t k = 0; k < n; ++k) {
            double u = x.re(b, k), v = x.im(b, k);
            y.re(b, k) = h1 * u - h2 * v;
            y.im(b, k) = h2 * u + h1 * v;
        }
    }
    return y;
}

ChannelDraw rbf(const SymbolBatch& x, double noise_std, Rng& rng, bool want_jacobian) {
    if (noise_std < 0.0) fail_numeric("rbf: negative noise std");
    const std::size_t n = x.uses();
    const double h_std = std::sqrt(0.5);  // h ~ N(0, 1/2 I)
    Mat h(x.batch(), 2);
    for (std::size_t b = 0; b < x.batch(); ++b) {
        h(b, 0) = h_std * rng.normal();
        h(b, 1) = h_std * rng.normal();
    }
    ChannelDraw draw;
    draw.y = rbf_apply_h(x, h);
    if (noise_std > 0.0) {
        for (double& v : draw.y.m.v) v += noise_std * rng.normal();
    }
    draw.fading = h;
    if (want_jacobian) {
        draw.jacobian.reserve(x.batch());
        for (std::size_t b = 0; b < x.batch(); ++b) {
            // [[h1 I, -h2 I], [h2 I, h1 I]]
            Mat j(2 * n, 2 * n);
            for (std::size_t k = 0; k < n; ++k) {
                j(k, k) = h(b, 0);
                j(k, n + k) = -h(b, 1);
                j(n + k, k) = h(b, 1);
                j(n + k, n + k) = h(b, 0);
            }
            draw.jacobian.push_back(std::move(j));
        }
    }
    return draw;
}

ChannelDraw fiber(const SymbolBatch& x, const FiberSpec& spec, Rng& rng, FiberTape* tape) {
    if (spec.steps < 1) fail_numeric("fiber: steps must be >= 1");
    const std::size_t n = x.uses();
    const double alpha = spec.length_km * spec.gamma_per_w_km / static_cast<double>(spec.steps);
    const double step_std = std::sqrt(spec.noise_power / (2.0 * static_cast<double>(spec.steps)));

    if (tape) {
        tape->steps = spec.steps;
        tape->alpha = alpha;
        tape->batch = x.batch();
        tape->uses = n;
        tape->state.assign(static_cast<std::size_t>(x.batch()) * n * spec.steps * 4, 0.0);
    }

    ChannelDraw draw;
    draw.y = x;
    for (std::size_t b = 0; b < x.batch(); ++b) {
        for (std::size_t u = 0; u < n; ++u) {
            double a = draw.y.re(b, u);
            double bb = draw.y.im(b, u);
            for (int k = 0; k < spec.steps; ++k) {
                double phi = alpha * (a * a + bb * bb);
                double c = std::cos(phi), s = std::sin(phi);
                double out_r = a * c - bb * s;
                double out_i = a * s + bb * c;
                if (tape) {
                    double* st = tape->state.data() +
                                 (((b * n) + u) * static_cast<std::size_t>(spec.steps) +
                                  static_cast<std::size_t>(k)) * 4;
                    st[0] = a;
                    st[1] = bb;
                    st[2] = out_r;
                    st[3] = out_i;
                }
                a = out_r + step_std * rng.normal();
                bb = out_i + step_std * rng.normal();
            }
            draw.y.re(b, u) = a;
            draw.y.im(b, u) = bb;
        }
    }
    return draw;
}

SymbolBatch fiber_vjp(const FiberTape& tape, const SymbolBatch& dL_dy) {
    if (dL_dy.batch() != tape.batch || dL_dy.uses() != tape.uses)
        fail_numeric("fiber_vjp: gradient shape does not match tape");
    SymbolBatch g = dL_dy;
    const double alpha = tape.alpha;
    for (std::size_t b = 0; b < tape.batch; ++b) {
        for (std::size_t u = 0; u < tape.uses; ++u) {
            double gr = g.re(b, u), gi = g.im(b, u);
            for (int k = tape.steps; k-- > 0;) {
                const double* st = tape.state.data() +
                                   (((b * tape.uses) + u) * static_cast<std::size_t>(tape.steps) +
                                    static_cast<std::size_t>(k)) * 4;
                double a = st[0], bb = st[1], out_r = st[2], out_i = st[3];
                double phi = alpha * (a * a + bb * bb);
                double c = std::cos(phi), s = std::sin(phi);
                double ga = gr * (c - 2.0 * alpha * a * out_i) + gi * (s + 2.0 * alpha * a * out_r);
                double gb = gr * (-s - 2.0 * alpha * bb * out_i) + gi * (c + 2.0 * alpha * bb * out_r);
                gr = ga;
                gi = gb;
            }
            g.re(b, u) = gr;
            g.im(b, u) = gi;
        }
    }
    return g;
}

std::vector<double> noisy_feedback(const std::vector<double>& losses, double snr_fb_db, Rng& rng) {
    if (losses.empty()) fail_numeric("noisy_feedback: empty batch");
    if (std::isinf(snr_fb_db) && snr_fb_db > 0.0) return losses;
    double mean_sq = 0.0;
    for (double l : losses) mean_sq += l * l;
    mean_sq /= static_cast<double>(losses.size());
    double sigma_e = std::sqrt(mean_sq / std::pow(10.0, snr_fb_db / 10.0));
    std::vector<double> out(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) out[i] = losses[i] + sigma_e * rng.normal();
    return out;
}

} // namespace e2e
