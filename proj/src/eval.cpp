#include "e2e/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "e2e/parallel.hpp"

namespace e2e {

double wilson_halfwidth(long errors, long blocks) {
    const double z = 1.959963984540054;
    double n = static_cast<double>(blocks);
    double p = static_cast<double>(errors) / n;
    double z2 = z * z;
    return z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
}

namespace {

class LearnedScheme final : public Scheme {
public:
    explicit LearnedScheme(const CommSystem& sys)
        : rx_(sys.rx), codebook_(tx_codebook(sys.tx)), M_(sys.arch.M),
          N_(static_cast<std::size_t>(sys.arch.N)), pilot_(sys.arch.pilot) {}

    int message_count() const override { return M_; }
    std::size_t block_uses() const override { return N_ + (pilot_ ? 1 : 0); }

    SymbolBatch encode(const std::vector<int>& msgs) const override {
        SymbolBatch x(msgs.size(), block_uses());
        const std::size_t off = pilot_ ? 1 : 0;
        for (std::size_t i = 0; i < msgs.size(); ++i) {
            if (pilot_) {
                x.re(i, 0) = 1.0;
                x.im(i, 0) = 0.0;
            }
            const double* row = codebook_.row(static_cast<std::size_t>(msgs[i]));
            for (std::size_t k = 0; k < N_; ++k) {
                x.re(i, off + k) = row[k];
                x.im(i, off + k) = row[N_ + k];
            }
        }
        return x;
    }

    std::vector<int> decode(const SymbolBatch& y) const override {
        if (!pilot_) return decide(rx_forward(rx_, y).p);
        SymbolBatch data(y.batch(), N_);
        for (std::size_t b = 0; b < y.batch(); ++b) {
            double h1 = y.re(b, 0), h2 = y.im(b, 0);
            double s = h1 * h1 + h2 * h2 + kEqualizerEps;
            for (std::size_t k = 0; k < N_; ++k) {
                double u = y.re(b, k + 1), v = y.im(b, k + 1);
                data.re(b, k) = (h1 * u + h2 * v) / s;
                data.im(b, k) = (h1 * v - h2 * u) / s;
            }
        }
        return decide(rx_forward(rx_, data).p);
    }

private:
    Receiver rx_;
    Mat codebook_;
    int M_;
    std::size_t N_;
    bool pilot_;
};

class ConstellationScheme final : public Scheme {
public:
    ConstellationScheme(Constellation c, bool pilot, bool qpsk)
        : c_(std::move(c)), pilot_(pilot), qpsk_(qpsk) {}

    int message_count() const override { return c_.M(); }
    std::size_t block_uses() const override {
        return static_cast<std::size_t>(c_.N()) + (pilot_ ? 1 : 0);
    }

    SymbolBatch encode(const std::vector<int>& msgs) const override {
        const std::size_t n = static_cast<std::size_t>(c_.N());
        SymbolBatch x(msgs.size(), block_uses());
        const std::size_t off = pilot_ ? 1 : 0;
        for (std::size_t i = 0; i < msgs.size(); ++i) {
            if (pilot_) {
                x.re(i, 0) = 1.0;
                x.im(i, 0) = 0.0;
            }
            const double* row = c_.points.row(static_cast<std::size_t>(msgs[i]));
            for (std::size_t k = 0; k < n; ++k) {
                x.re(i, off + k) = row[k];
                x.im(i, off + k) = row[n + k];
            }
        }
        return x;
    }

    std::vector<int> decode(const SymbolBatch& y) const override {
        const int n = c_.N();
        std::vector<int> out(y.batch());
        Mat row(1, static_cast<std::size_t>(2 * n));
        for (std::size_t b = 0; b < y.batch(); ++b) {
            if (pilot_) {
                Mat block(1, y.m.cols);
                for (std::size_t j = 0; j < y.m.cols; ++j) block.v[j] = y.m(b, j);
                try {
                    row = pilot_equalize(block, n);
                } catch (const Error&) {
                    out[b] = -1;  // erasure counts as a block error
                    continue;
                }
            } else {
                for (int k = 0; k < n; ++k) {
                    row.v[static_cast<std::size_t>(k)] = y.re(b, static_cast<std::size_t>(k));
                    row.v[static_cast<std::size_t>(n + k)] = y.im(b, static_cast<std::size_t>(k));
                }
            }
            out[b] = qpsk_ ? qpsk_demod(row, n) : ml_detect(c_, row);
        }
        return out;
    }

private:
    Constellation c_;
    bool pilot_;
    bool qpsk_;
};

} // namespace

std::unique_ptr<Scheme> make_learned_scheme(const CommSystem& sys) {
    return std::make_unique<LearnedScheme>(sys);
}

std::unique_ptr<Scheme> make_qpsk_scheme(int N, bool pilot) {
    return std::make_unique<ConstellationScheme>(qpsk_constellation(N), pilot, true);
}

std::unique_ptr<Scheme> make_constellation_scheme(Constellation c, bool pilot) {
    return std::make_unique<ConstellationScheme>(std::move(c), pilot, false);
}

namespace {

struct ChunkCount {
    long blocks = 0;
    long errors = 0;
};

ChunkCount run_chunk(const Scheme& scheme, const ChannelSpec& chan, long blocks, Rng rng) {
    std::vector<int> msgs = draw_messages(static_cast<int>(blocks), scheme.message_count(), rng);
    SymbolBatch x = scheme.encode(msgs);
    ChannelPass pass = channel_forward(x, chan, false, rng, false);
    std::vector<int> decided = scheme.decode(pass.rx_in);
    ChunkCount c;
    c.blocks = blocks;
    for (std::size_t i = 0; i < msgs.size(); ++i)
        if (decided[i] != msgs[i]) c.errors += 1;
    return c;
}

} // namespace

BlerPoint estimate_bler(const Scheme& scheme, const ChannelSpec& chan, double snr_db,
                        const EvalConfig& cfg, const Rng& rng) {
    if (cfg.min_blocks < 1) fail_numeric("estimate_bler: min_blocks must be >= 1");
    ChannelSpec at = channel_at_snr(chan, snr_db);
    const long chunk = std::max<long>(1, cfg.chunk_blocks);

    std::vector<ChunkCount> done;
    long done_blocks = 0, done_errors = 0;
    auto satisfied = [&](long blocks, long errors) {
        return blocks >= cfg.min_blocks && (errors >= cfg.min_errors || blocks >= cfg.max_blocks);
    };

    std::size_t next_chunk = 0;
    while (!satisfied(done_blocks, done_errors) && done_blocks < cfg.max_blocks) {
        std::size_t wave = static_cast<std::size_t>(std::max(1, worker_count()));
        std::vector<ChunkCount> counts(wave);
        std::size_t base = next_chunk;
        parallel_for(wave, [&](std::size_t w0, std::size_t w1) {
            for (std::size_t w = w0; w < w1; ++w)
                counts[w] = run_chunk(scheme, at, chunk, rng.derive(base + w));
        });
        // fold in chunk order; stop at the first prefix that satisfies the
        // rule so the totals never depend on the wave width
        for (std::size_t w = 0; w < wave; ++w) {
            done.push_back(counts[w]);
            done_blocks += counts[w].blocks;
            done_errors += counts[w].errors;
            if (satisfied(done_blocks, done_errors) || done_blocks >= cfg.max_blocks) break;
        }
        next_chunk = done.size();
    }

    BlerPoint p;
    p.snr_db = snr_db;
    p.blocks = done_blocks;
    p.errors = done_errors;
    p.rate = static_cast<double>(done_errors) / static_cast<double>(done_blocks);
    p.ci95 = wilson_halfwidth(done_errors, done_blocks);
    return p;
}

std::vector<BlerPoint> snr_sweep(const Scheme& scheme, const ChannelSpec& chan,
                                 const std::vector<double>& snr_list, const EvalConfig& cfg,
                                 const Rng& rng) {
    if (snr_list.empty()) fail_config("snr_sweep: empty SNR list");
    std::vector<BlerPoint> out;
    out.reserve(snr_list.size());
    for (std::size_t i = 0; i < snr_list.size(); ++i)
        out.push_back(estimate_bler(scheme, chan, snr_list[i], cfg, rng.derive(1000 + i)));
    return out;
}

namespace {

std::vector<double> flatten_tx_grads(const Gradients& g) { return flatten(g); }

struct MeanAccumulator {
    std::vector<double> sum;
    long count = 0;

    void add(const std::vector<double>& g, long weight) {
        if (sum.empty()) sum.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) sum[i] += g[i] * static_cast<double>(weight);
        count += weight;
    }
    std::vector<double> mean() const {
        std::vector<double> m(sum.size());
        for (std::size_t i = 0; i < sum.size(); ++i) m[i] = sum[i] / static_cast<double>(count);
        return m;
    }
};

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double norm_of(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

} // namespace

std::vector<Theorem1Row> theorem1_check(const Theorem1Config& cfg, const Rng& rng) {
    const long chunk = 10000;
    Rng init_rng = rng.derive(0);
    ChannelSpec chan = channel_at_snr(AwgnSpec{}, cfg.snr_db);
    ArchConfig arch;
    arch.M = cfg.M;
    arch.N = cfg.N;
    CommSystem sys = make_system(arch, chan, init_rng);

    // model-aware reference, chunked mean over an independent large batch
    MeanAccumulator ref_acc;
    {
        Rng msg_rng = rng.derive(1);
        Rng noise_rng = rng.derive(2);
        long left = cfg.reference_batch;
        while (left > 0) {
            long b = std::min(left, chunk);
            std::vector<int> msgs = draw_messages(static_cast<int>(b), cfg.M, msg_rng);
            AwareGrads g = model_aware_grads(sys, chan, msgs, noise_rng, NormMode::codebook);
            ref_acc.add(flatten_tx_grads(g.tx), b);
            left -= b;
        }
    }
    std::vector<double> ref = ref_acc.mean();
    double ref_norm = norm_of(ref);

    const double noise_std = std::get<AwgnSpec>(chan).noise_std;
    std::vector<Theorem1Row> rows;
    for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
        Policy policy{cfg.sigmas[si], true};
        Rng msg_rng = rng.derive(100 + si);
        Rng noise_rng = rng.derive(200 + si);
        const int k = std::max(1, cfg.sub_batches);
        long per_sub_pairs = cfg.batch / (2 * k);
        MeanAccumulator total;
        std::vector<double> sub_cos;
        for (int sb = 0; sb < k; ++sb) {
            MeanAccumulator sub;
            long left = per_sub_pairs;
            while (left > 0) {
                long b = std::min(left, chunk);
                std::vector<int> msgs = draw_messages(static_cast<int>(b), cfg.M, msg_rng);
                Gradients g = tx_grad_mean_awgn_paired(sys, noise_std, policy, msgs, noise_rng,
                                                       NormMode::codebook);
                std::vector<double> flat = flatten_tx_grads(g);
                sub.add(flat, b);
                total.add(flat, b);
                left -= b;
            }
            sub_cos.push_back(cosine(sub.mean(), ref));
        }
        std::vector<double> mean = total.mean();
        Theorem1Row row;
        row.sigma = cfg.sigmas[si];
        row.cosine = cosine(mean, ref);
        row.norm_ratio = norm_of(mean) / ref_norm;
        double cm = 0.0, cv = 0.0;
        for (double c : sub_cos) cm += c;
        cm /= static_cast<double>(sub_cos.size());
        for (double c : sub_cos) cv += (c - cm) * (c - cm);
        cv /= std::max<double>(1.0, static_cast<double>(sub_cos.size() - 1));
        row.cosine_se = std::sqrt(cv / static_cast<double>(sub_cos.size()));
        rows.push_back(row);
    }
    return rows;
}

std::vector<VarianceRecord> variance_experiment(const VarianceConfig& cfg, const Rng& rng) {
    std::vector<VarianceRecord> records;
    for (std::size_t mi = 0; mi < cfg.m_list.size(); ++mi) {
        const int m = cfg.m_list[mi];
        if (m < 1) fail_config("variance_experiment: m must be >= 1");
        const int params = 3 * m + 1;
        std::vector<double> sum_spsa(static_cast<std::size_t>(params), 0.0);
        std::vector<double> sq_spsa(static_cast<std::size_t>(params), 0.0);
        std::vector<double> sum_score(static_cast<std::size_t>(params), 0.0);
        std::vector<double> sq_score(static_cast<std::size_t>(params), 0.0);

        for (long init = 0; init < cfg.inits; ++init) {
            Rng local = rng.derive(mi * 1000003 + static_cast<std::size_t>(init));
            Mlp net = make_mlp(1, {{static_cast<std::size_t>(m), Act::relu}, {1, Act::linear}},
                               local);
            Mat a(static_cast<std::size_t>(cfg.batch), 1);
            for (double& x : a.v) x = local.uniform();

            // score-function estimate with x ~ N(f(a), sigma^2)
            Tape tape;
            Mat f = forward(net, a, &tape);
            Mat dl(f.rows, 1);
            const double inv_s = 1.0 / static_cast<double>(cfg.batch);
            for (std::size_t i = 0; i < f.rows; ++i) {
                double target = a(i, 0) * a(i, 0);
                double x = f(i, 0) + cfg.sigma * local.normal();
                double loss = (x - target) * (x - target);
                dl(i, 0) = inv_s * loss * (x - f(i, 0)) / (cfg.sigma * cfg.sigma);
            }
            Gradients g;
            backward(net, tape, dl, g);
            std::vector<double> score = flatten(g);

            // SPSA probe on the same batch
            auto objective = [&](const std::vector<double>& theta) {
                Mlp probe = net;
                unflatten_params(probe, theta);
                Mat out = forward(probe, a);
                double j = 0.0;
                for (std::size_t i = 0; i < out.rows; ++i) {
                    double d = out(i, 0) - a(i, 0) * a(i, 0);
                    j += d * d;
                }
                return j * inv_s;
            };
            std::vector<double> spsa =
                spsa_grad(objective, flatten_params(net), cfg.spsa_c, local);

            for (int j = 0; j < params; ++j) {
                sum_spsa[j] += spsa[j];
                sq_spsa[j] += spsa[j] * spsa[j];
                sum_score[j] += score[j];
                sq_score[j] += score[j] * score[j];
            }
        }

        // total variance of the estimate vector: per-coordinate variances
        // across initializations, summed over the 3m+1 coordinates
        auto total_var = [&](const std::vector<double>& sum, const std::vector<double>& sq) {
            double acc = 0.0;
            double n = static_cast<double>(cfg.inits);
            for (int j = 0; j < params; ++j)
                acc += (sq[j] - sum[j] * sum[j] / n) / (n - 1.0);
            return acc;
        };

        VarianceRecord rec;
        rec.m = m;
        rec.params = params;
        rec.var_spsa = total_var(sum_spsa, sq_spsa);
        rec.var_score = total_var(sum_score, sq_score);
        records.push_back(rec);
    }
    return records;
}

std::vector<FeedbackRow> feedback_sweep(const ArchConfig& arch, const ChannelSpec& chan,
                                        const TrainConfig& cfg,
                                        const std::vector<double>& snr_fb_list,
                                        const EvalConfig& eval_cfg) {
    if (snr_fb_list.empty()) fail_config("feedback_sweep: empty list");
    std::vector<FeedbackRow> rows;
    for (double snr_fb : snr_fb_list) {
        TrainConfig run_cfg = cfg;
        if (std::isinf(snr_fb) && snr_fb > 0.0)
            run_cfg.feedback_snr_db.reset();
        else
            run_cfg.feedback_snr_db = snr_fb;
        Rng init_rng = Rng(cfg.seed).derive(0);
        TrainState state = make_train_state(arch, chan, run_cfg, init_rng);
        alternating_train(state, chan, run_cfg);
        auto scheme = make_learned_scheme(state.sys);
        FeedbackRow row;
        row.snr_fb_db = snr_fb;
        row.point = estimate_bler(*scheme, chan, cfg.train_snr_db, eval_cfg,
                                  Rng(cfg.seed).derive(77));
        rows.push_back(row);
    }
    return rows;
}

void dump_constellation(const Transmitter& tx, const std::string& path) {
    Mat cb = tx_codebook(tx);
    std::ofstream out(path);
    if (!out) fail_io("dump_constellation: cannot open " + path);
    char buf[64];
    for (std::size_t i = 0; i < cb.rows; ++i) {
        for (std::size_t j = 0; j < cb.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.12g", cb(i, j));
            out << buf;
            out << (j + 1 == cb.cols ? '\n' : ',');
        }
    }
    if (!out) fail_io("dump_constellation: write failed for " + path);
}

} // namespace e2e
