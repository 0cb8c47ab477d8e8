#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "e2e/transceiver.hpp"

using namespace e2e;

TEST_CASE("one_hot basics") {
    Mat a = one_hot(0, 4);
    CHECK(a(0, 0) == 1.0);
    CHECK(a(0, 1) == 0.0);
    Mat b = one_hot(3, 4);
    CHECK(b(0, 3) == 1.0);
    for (int m = 0; m < 4; ++m) {
        Mat v = one_hot(m, 4);
        double s = 0.0;
        for (double x : v.v) s += x;
        CHECK(s == 1.0);
    }
    CHECK_THROWS_AS(one_hot(4, 4), Error);
    CHECK_THROWS_AS(one_hot(-1, 4), Error);
}

TEST_CASE("normalize_batch: scaling and edge cases") {
    // one block of one use with energy 4 -> scaled by 1/2
    SymbolBatch x(1, 1);
    x.re(0, 0) = 2.0;
    double c = normalize_batch(x, 1.0);
    CHECK(c == doctest::Approx(0.5));
    CHECK(x.re(0, 0) == doctest::Approx(1.0));

    // already normalized: scale 1
    SymbolBatch y(2, 1);
    y.re(0, 0) = 1.0;
    y.re(1, 0) = -1.0;
    CHECK(normalize_batch(y, 1.0) == doctest::Approx(1.0));

    SymbolBatch z(2, 3);
    CHECK_THROWS_AS(normalize_batch(z, 1.0), Error);
}

TEST_CASE("tx_forward: energy contract and determinism") {
    Rng rng(21);
    Transmitter tx = make_transmitter(16, 2, rng);
    std::vector<int> msgs{0, 5, 3, 15, 7, 7, 1, 2};
    TxForward a = tx_forward(tx, msgs);
    double energy = sum_squares(a.x.m) /
                    (static_cast<double>(msgs.size()) * static_cast<double>(tx.N));
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-9));
    TxForward b = tx_forward(tx, msgs);
    for (std::size_t i = 0; i < a.x.m.size(); ++i) CHECK(a.x.m.v[i] == b.x.m.v[i]);

    // fiber target: mean symbol energy P_in
    Rng rng2(22);
    Transmitter ftx = make_transmitter(16, 1, rng2, true, 1e-4);
    TxForward f = tx_forward(ftx, msgs);
    double fe = sum_squares(f.x.m) / static_cast<double>(msgs.size());
    CHECK(fe == doctest::Approx(1e-4).epsilon(1e-9));
}

TEST_CASE("tx_forward: codebook mode matches full-set batch mode") {
    Rng rng(23);
    Transmitter tx = make_transmitter(8, 2, rng);
    std::vector<int> all{0, 1, 2, 3, 4, 5, 6, 7};
    TxForward batch = tx_forward(tx, all, NormMode::batch);
    TxForward cb = tx_forward(tx, all, NormMode::codebook);
    for (std::size_t i = 0; i < batch.x.m.size(); ++i)
        CHECK(batch.x.m.v[i] == doctest::Approx(cb.x.m.v[i]).epsilon(1e-12));
}

TEST_CASE("tx_backward matches finite differences through both norm modes") {
    for (NormMode mode : {NormMode::batch, NormMode::codebook}) {
        Rng rng(24);
        Transmitter tx = make_transmitter(6, 2, rng);
        std::vector<int> msgs{1, 4, 4, 0};
        Mat w(msgs.size(), 4);
        Rng wr(25);
        for (double& v : w.v) v = wr.normal();

        TxForward f = tx_forward(tx, msgs, mode);
        Gradients g = tx_backward(tx, f.tape, w);

        auto loss = [&]() { return dot_all(tx_forward(tx, msgs, mode).x.m, w); };
        const double h = 1e-6;
        double worst = 0.0;
        for (std::size_t l = 0; l < tx.net.layers.size(); ++l) {
            for (std::size_t i = 0; i < tx.net.layers[l].W.size(); ++i) {
                double keep = tx.net.layers[l].W.v[i];
                tx.net.layers[l].W.v[i] = keep + h;
                double lp = loss();
                tx.net.layers[l].W.v[i] = keep - h;
                double lm = loss();
                tx.net.layers[l].W.v[i] = keep;
                double fd = (lp - lm) / (2.0 * h);
                worst = std::max(worst, std::fabs(fd - g.dW[l].v[i]) /
                                            std::max(1e-6, std::fabs(fd)));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("policy_sample: variance shrinks with sigma and conserves energy") {
    Rng rng(26);
    // normalized batch: all symbols at unit energy
    SymbolBatch xbar(125000, 2);
    for (std::size_t b = 0; b < xbar.batch(); ++b) {
        xbar.re(b, 0) = 1.0;
        xbar.im(b, 1) = -1.0;
    }
    Policy policy{0.15, true};
    PolicyDraw draw = policy_sample(xbar, policy, rng);
    double energy = sum_squares(draw.x.m) /
                    (static_cast<double>(xbar.batch()) * static_cast<double>(xbar.uses()));
    CHECK(energy == doctest::Approx(1.0).epsilon(0.01));

    // perturbation variance per real component = sigma^2/2
    double var = sum_squares(draw.perturbation) / static_cast<double>(draw.perturbation.size());
    CHECK(var == doctest::Approx(0.5 * 0.15 * 0.15).epsilon(0.01));

    // sigma -> 0: X -> Xbar
    Policy tiny{1e-6, true};
    PolicyDraw d2 = policy_sample(xbar, tiny, rng);
    double max_dev = 0.0;
    for (std::size_t i = 0; i < xbar.m.size(); ++i)
        max_dev = std::max(max_dev, std::fabs(d2.x.m.v[i] - xbar.m.v[i]));
    CHECK(max_dev < 1e-4);
}

TEST_CASE("policy_sample: literal convention uses sigma^2 per component") {
    Rng rng(27);
    SymbolBatch xbar(100000, 1);
    Policy literal{0.2, false};
    PolicyDraw draw = policy_sample(xbar, literal, rng);
    double var = sum_squares(draw.perturbation) / static_cast<double>(draw.perturbation.size());
    CHECK(var == doctest::Approx(0.04).epsilon(0.02));
}

TEST_CASE("policy_score: frozen scalar case and zero at the mean") {
    Policy policy{0.1, true};
    SymbolBatch xbar(1, 1);
    xbar.re(0, 0) = 1.0;
    SymbolBatch x = xbar;
    x.re(0, 0) = policy.mean_scale() * 1.0;
    Mat zero = policy_score(xbar, x, policy);
    CHECK(zero(0, 0) == doctest::Approx(0.0));

    x.re(0, 0) = policy.mean_scale() * 1.0 + 0.01;
    Mat s = policy_score(xbar, x, policy);
    CHECK(s(0, 0) == doctest::Approx(1.98997487421).epsilon(1e-9));
}

TEST_CASE("policy_score: empirical mean is zero under the policy") {
    Rng rng(28);
    SymbolBatch xbar(250000, 2);  // 1e6 components
    Rng fill(29);
    for (double& v : xbar.m.v) v = fill.normal();
    Policy policy{0.15, true};
    PolicyDraw draw = policy_sample(xbar, policy, rng);
    Mat score = policy_score(xbar, draw.x, policy);
    double mean = 0.0;
    for (double v : score.v) mean += v;
    mean /= static_cast<double>(score.size());
    // per-component score std = ms/sqrt(var)
    double se = policy.mean_scale() / std::sqrt(policy.var_per_component()) /
                std::sqrt(static_cast<double>(score.size()));
    CHECK(std::fabs(mean) < 3.0 * se);
}

TEST_CASE("transformer_equalize: identity at h=(1,0), exact inversion, energy scale") {
    Rng rng(30);
    Receiver rx = make_receiver(8, 2, RxStyle::transformer, rng);

    SymbolBatch y(3, 2);
    Rng fill(31);
    for (double& v : y.m.v) v = fill.normal();

    // force hhat = (1, 0): zero transformer weights, bias (1, 0)
    auto& t = *rx.transformer;
    for (auto& l : t.layers)
        for (double& v : l.W.v) v = 0.0;
    t.layers.back().b(0, 0) = 1.0;
    t.layers.back().b(0, 1) = 0.0;

    EqTape tape;
    transformer_equalize(rx, y, tape);
    for (std::size_t i = 0; i < y.m.size(); ++i)
        CHECK(tape.y_eq.v[i] == doctest::Approx(y.m.v[i]).epsilon(1e-8));

    // hhat = true h with no noise: equalization inverts the fading
    Mat h(3, 2);
    Rng hr(32);
    for (double& v : h.v) v = 0.4 + std::fabs(hr.normal());
    SymbolBatch faded = rbf_apply_h(y, h);
    for (std::size_t b = 0; b < 3; ++b) {
        double h1 = h(b, 0), h2 = h(b, 1);
        double s = h1 * h1 + h2 * h2 + kEqualizerEps;
        for (std::size_t k = 0; k < 2; ++k) {
            double u = faded.re(b, k), v = faded.im(b, k);
            double eq_r = (h1 * u + h2 * v) / s;
            double eq_i = (h1 * v - h2 * u) / s;
            CHECK(eq_r == doctest::Approx(y.re(b, k)).epsilon(1e-7));
            CHECK(eq_i == doctest::Approx(y.im(b, k)).epsilon(1e-7));
        }
    }

    // energy scales by 1/|h|^2 (up to the regularizer)
    double e_in = sum_squares(y.m);
    double e_eq = sum_squares(tape.y_eq);
    CHECK(e_eq == doctest::Approx(e_in).epsilon(1e-6));  // hhat = (1,0)
}

TEST_CASE("rx_backward matches finite differences including the transformer path") {
    Rng rng(33);
    Receiver rx = make_receiver(4, 2, RxStyle::transformer, rng);
    SymbolBatch y(3, 2);
    Rng fill(34);
    for (double& v : y.m.v) v = fill.normal();
    std::vector<int> msgs{0, 3, 1};

    auto loss = [&]() {
        Mat p = rx_forward(rx, y).p;
        double s = 0.0;
        for (std::size_t i = 0; i < p.rows; ++i) s += cross_entropy_row(p.row(i), p.cols, msgs[i]);
        return s / 3.0;
    };

    RxForward f = rx_forward(rx, y);
    Mat dp(f.p.rows, f.p.cols);
    for (std::size_t i = 0; i < f.p.rows; ++i)
        dp(i, static_cast<std::size_t>(msgs[i])) =
            -1.0 / (3.0 * (f.p(i, static_cast<std::size_t>(msgs[i])) + kCrossEntropyEps));
    RxGradients g;
    Mat dy = rx_backward(rx, f.tape, dp, g);

    const double h = 1e-6;
    double worst = 0.0;
    auto fd_check = [&](Mlp& net, const Gradients& grads) {
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            for (std::size_t i = 0; i < net.layers[l].W.size(); ++i) {
                double keep = net.layers[l].W.v[i];
                net.layers[l].W.v[i] = keep + h;
                double lp = loss();
                net.layers[l].W.v[i] = keep - h;
                double lm = loss();
                net.layers[l].W.v[i] = keep;
                double fd = (lp - lm) / (2.0 * h);
                worst = std::max(worst,
                                 std::fabs(fd - grads.dW[l].v[i]) / std::max(1e-4, std::fabs(fd)));
            }
        }
    };
    fd_check(rx.discriminative, g.discriminative);
    fd_check(*rx.transformer, g.transformer);

    // input gradient: perturb y
    for (std::size_t i = 0; i < y.m.size(); ++i) {
        double keep = y.m.v[i];
        y.m.v[i] = keep + h;
        double lp = loss();
        y.m.v[i] = keep - h;
        double lm = loss();
        y.m.v[i] = keep;
        double fd = (lp - lm) / (2.0 * h);
        worst = std::max(worst, std::fabs(fd - dy.v[i]) / std::max(1e-4, std::fabs(fd)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("rx_forward: probability rows sum to one") {
    Rng rng(35);
    Receiver rx = make_receiver(16, 2, RxStyle::discriminative, rng);
    SymbolBatch y(32, 2);
    Rng fill(36);
    for (double& v : y.m.v) v = fill.normal();
    Mat p = rx_forward(rx, y).p;
    for (std::size_t i = 0; i < p.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.cols; ++j) s += p(i, j);
        CHECK(std::fabs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("decide: argmax with ties to the lowest index") {
    Mat p(3, 3);
    p(0, 0) = 0.1; p(0, 1) = 0.7; p(0, 2) = 0.2;
    p(1, 0) = 0.5; p(1, 1) = 0.5; p(1, 2) = 0.0;
    p(2, 0) = 0.0; p(2, 1) = 0.0; p(2, 2) = 1.0;
    auto d = decide(p);
    CHECK(d[0] == 1);
    CHECK(d[1] == 0);
    CHECK(d[2] == 2);
}

TEST_CASE("decide is invariant under strictly monotone transforms") {
    Rng rng(37);
    for (int t = 0; t < 20; ++t) {
        Mat p(1, 8);
        for (double& v : p.v) v = rng.uniform() + 1e-3;
        Mat q = p;
        for (double& v : q.v) v = std::log(v) * 2.0 + 5.0;
        CHECK(decide(p)[0] == decide(q)[0]);
    }
}

TEST_CASE("policy validation") {
    SymbolBatch x(1, 1);
    x.re(0, 0) = 1.0;
    Rng rng(38);
    Policy bad{0.0, true};
    CHECK_THROWS_AS(policy_sample(x, bad, rng), Error);
    CHECK_THROWS_AS(policy_score(x, x, bad), Error);
}
