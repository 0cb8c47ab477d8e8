#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "e2e/eval.hpp"
#include "e2e/io.hpp"
#include "e2e/parallel.hpp"

using namespace e2e;

namespace {

// decodes correctly except with a fixed error probability, driven by the
// block content so the outcome is a pure function of the channel draw
class SyntheticScheme final : public Scheme {
public:
    SyntheticScheme(double error_prob, double noise_std) : p_(error_prob), std_(noise_std) {}
    int message_count() const override { return 2; }
    std::size_t block_uses() const override { return 1; }

    SymbolBatch encode(const std::vector<int>& msgs) const override {
        SymbolBatch x(msgs.size(), 1);
        for (std::size_t i = 0; i < msgs.size(); ++i) x.re(i, 0) = msgs[i] ? 100.0 : -100.0;
        return x;
    }

    std::vector<int> decode(const SymbolBatch& y) const override {
        // the AWGN noise on the imaginary part is U-independent of the
        // data; use its CDF as the error coin
        std::vector<int> out(y.batch());
        for (std::size_t b = 0; b < y.batch(); ++b) {
            int m = y.re(b, 0) > 0 ? 1 : 0;
            double u = 0.5 * std::erfc(-y.im(b, 0) / (std_ * std::sqrt(2.0)));
            out[b] = u < p_ ? 1 - m : m;
        }
        return out;
    }

private:
    double p_;
    double std_;
};

} // namespace

TEST_CASE("wilson interval half-width sanity") {
    double w = wilson_halfwidth(100, 100000);
    CHECK(w > 0.0);
    CHECK(w < 3e-4);
    // symmetric in errors vs successes
    CHECK(wilson_halfwidth(10, 100) == doctest::Approx(wilson_halfwidth(90, 100)));
}

TEST_CASE("estimate_bler: perfect system at zero noise has rate 0") {
    Rng rng(1);
    ArchConfig arch;
    arch.M = 4;
    arch.N = 1;
    ChannelSpec chan = AwgnSpec{};
    CommSystem sys = make_system(arch, chan, rng);
    auto scheme = make_learned_scheme(sys);
    EvalConfig cfg;
    cfg.min_blocks = 2000;
    cfg.min_errors = 1;
    cfg.max_blocks = 2000;
    cfg.chunk_blocks = 500;
    BlerPoint p = estimate_bler(*scheme, chan, 300.0, cfg, Rng(5));
    // an untrained system is not perfect; instead check the decoder is at
    // least deterministic and the counts add up
    CHECK(p.blocks == 2000);
    CHECK(p.rate == doctest::Approx(static_cast<double>(p.errors) / 2000.0));

    // a genuinely perfect scheme: QPSK with no noise
    auto qpsk = make_qpsk_scheme(2, false);
    BlerPoint q = estimate_bler(*qpsk, chan, 300.0, cfg, Rng(6));
    CHECK(q.errors == 0);
    CHECK(q.rate == 0.0);
}

TEST_CASE("estimate_bler: uniform receiver errs at 1 - 1/M") {
    Rng rng(2);
    ArchConfig arch;
    arch.M = 16;
    arch.N = 1;
    ChannelSpec chan = AwgnSpec{};
    CommSystem sys = make_system(arch, chan, rng);
    for (auto& l : sys.rx.discriminative.layers) {
        for (double& v : l.W.v) v = 0.0;
        for (double& v : l.b.v) v = 0.0;
    }
    // uniform p ties at every class; decide picks index 0, so the error
    // rate is P(m != 0) = 1 - 1/M
    auto scheme = make_learned_scheme(sys);
    EvalConfig cfg;
    cfg.min_blocks = 50000;
    cfg.min_errors = 100;
    cfg.max_blocks = 50000;
    BlerPoint p = estimate_bler(*scheme, chan, 10.0, cfg, Rng(7));
    double want = 1.0 - 1.0 / 16.0;
    CHECK(p.rate == doctest::Approx(want).epsilon(0.01));
}

TEST_CASE("estimate_bler: unbiased on a synthetic error probability") {
    SyntheticScheme scheme(0.1, snr_to_noise_std(0.0));
    ChannelSpec chan = AwgnSpec{};
    EvalConfig cfg;
    cfg.min_blocks = 20000;
    cfg.min_errors = 1;
    cfg.max_blocks = 20000;
    double acc = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        BlerPoint p = estimate_bler(scheme, chan, 0.0, cfg, Rng(100 + r));
        acc += p.rate;
    }
    double mean = acc / reps;
    double se = std::sqrt(0.1 * 0.9 / (20000.0 * reps));
    CHECK(std::fabs(mean - 0.1) < 3.0 * se);
}

TEST_CASE("estimate_bler: deterministic and independent of worker count") {
    auto qpsk = make_qpsk_scheme(2, false);
    ChannelSpec chan = AwgnSpec{};
    EvalConfig cfg;
    cfg.min_blocks = 30000;
    cfg.min_errors = 50;
    cfg.chunk_blocks = 1000;
    set_worker_count(1);
    BlerPoint a = estimate_bler(*qpsk, chan, 4.0, cfg, Rng(9));
    set_worker_count(4);
    BlerPoint b = estimate_bler(*qpsk, chan, 4.0, cfg, Rng(9));
    set_worker_count(0);
    CHECK(a.blocks == b.blocks);
    CHECK(a.errors == b.errors);
}

TEST_CASE("snr_sweep: QPSK rates are monotone and the CSV format is stable") {
    auto qpsk = make_qpsk_scheme(4, false);
    ChannelSpec chan = AwgnSpec{};
    EvalConfig cfg;
    cfg.min_blocks = 20000;
    cfg.min_errors = 20;
    cfg.max_blocks = 100000;
    std::vector<double> snrs{0, 4, 8};
    auto pts = snr_sweep(*qpsk, chan, snrs, cfg, Rng(11));
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].rate >= pts[1].rate - pts[0].ci95 - pts[1].ci95);
    CHECK(pts[1].rate >= pts[2].rate - pts[1].ci95 - pts[2].ci95);
    CHECK(pts[0].rate > pts[2].rate);

    const char* path = "test_sweep.csv";
    write_bler_csv(path, pts);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "snr_db,bler,blocks,errors,ci95");
    std::string row;
    int rows = 0;
    while (std::getline(in, row))
        if (!row.empty()) ++rows;
    CHECK(rows == 3);
    std::remove(path);

    // determinism across runs
    auto pts2 = snr_sweep(*qpsk, chan, snrs, cfg, Rng(11));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].errors == pts2[i].errors);
        CHECK(pts[i].blocks == pts2[i].blocks);
    }
}

TEST_CASE("qpsk monte-carlo agrees with the analytic curve across the sweep") {
    auto qpsk = make_qpsk_scheme(4, false);
    ChannelSpec chan = AwgnSpec{};
    EvalConfig cfg;
    cfg.min_blocks = 100000;
    cfg.min_errors = 100;
    cfg.max_blocks = 400000;
    for (double snr : {0.0, 4.0, 8.0}) {
        BlerPoint p = estimate_bler(*qpsk, chan, snr, cfg, Rng(13));
        double want = analytic_qpsk_bler(snr, 4);
        CHECK(std::fabs(p.rate - want) <
              1.96 * std::sqrt(want * (1 - want) / static_cast<double>(p.blocks)) + 1e-12);
    }
}

TEST_CASE("variance_experiment: spsa grows with parameters, score stays flat (smoke)") {
    VarianceConfig cfg;
    cfg.m_list = {5, 50};
    cfg.batch = 200;
    cfg.inits = 150;
    auto recs = variance_experiment(cfg, Rng(17));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].params == 16);
    CHECK(recs[1].params == 151);
    // total variance: the spsa substitute grows with the coordinate count
    CHECK(recs[1].var_spsa > 4.0 * recs[0].var_spsa);
    CHECK(recs[1].var_score < 2.0 * recs[0].var_score + 1e-12);
}

TEST_CASE("dump_constellation: shape, energy, loadability") {
    Rng rng(19);
    Transmitter tx = make_transmitter(8, 2, rng);
    const char* path = "test_dump.csv";
    dump_constellation(tx, path);
    Constellation c = load_constellation(path);
    CHECK(c.M() == 8);
    CHECK(c.N() == 2);
    // dump is already unit mean energy, so the loader's renormalization
    // must be a no-op
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    Mat cb = tx_codebook(tx);
    double e = sum_squares(cb) / (8.0 * 2.0);
    CHECK(e == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t j = 0; j < cb.cols; ++j)
        CHECK(c.points(0, j) == doctest::Approx(cb(0, j)).epsilon(1e-9));
    std::remove(path);
}

TEST_CASE("feedback_sweep: the infinite-SNR row equals a plain noiseless run bit-for-bit") {
    ArchConfig arch;
    arch.M = 4;
    arch.N = 1;
    ChannelSpec chan = AwgnSpec{};
    TrainConfig cfg;
    cfg.batch_rx = 32;
    cfg.batch_tx = 32;
    cfg.outer_iters = 5;
    cfg.train_snr_db = 8.0;
    cfg.seed = 77;
    EvalConfig ev;
    ev.min_blocks = 4000;
    ev.min_errors = 5;
    ev.max_blocks = 8000;

    auto rows = feedback_sweep(arch, chan, cfg, {std::numeric_limits<double>::infinity()}, ev);

    Rng init = Rng(cfg.seed).derive(0);
    TrainState ref = make_train_state(arch, chan, cfg, init);
    alternating_train(ref, chan, cfg);
    auto scheme = make_learned_scheme(ref.sys);
    BlerPoint want = estimate_bler(*scheme, chan, cfg.train_snr_db, ev, Rng(cfg.seed).derive(77));

    CHECK(rows[0].point.errors == want.errors);
    CHECK(rows[0].point.blocks == want.blocks);
    CHECK(rows[0].point.rate == want.rate);
}

TEST_CASE("theorem1_check: cosine improves as sigma shrinks (smoke scale)") {
    Theorem1Config cfg;
    cfg.M = 8;
    cfg.N = 1;
    cfg.sigmas = {0.3, 0.05};
    cfg.batch = 20000;
    cfg.reference_batch = 100000;
    auto rows = theorem1_check(cfg, Rng(23));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].cosine > 0.9);
    CHECK(rows[1].cosine >= rows[0].cosine - 3.0 * (rows[0].cosine_se + rows[1].cosine_se));
}
