#include "e2e/mlp.hpp"

#include <algorithm>
#include <cmath>

namespace e2e {

const char* act_name(Act a) {
    switch (a) {
        case Act::linear: return "linear";
        case Act::relu: return "relu";
        case Act::elu: return "elu";
        case Act::tanh_: return "tanh";
        case Act::sigmoid: return "sigmoid";
        case Act::softmax: return "softmax";
    }
    return "?";
}

Act act_from_name(const std::string& name) {
    if (name == "linear") return Act::linear;
    if (name == "relu") return Act::relu;
    if (name == "elu") return Act::elu;
    if (name == "tanh") return Act::tanh_;
    if (name == "sigmoid") return Act::sigmoid;
    if (name == "softmax") return Act::softmax;
    fail_config("unknown activation: " + name);
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.W.size() + l.b.size();
    return n;
}

Mat init_glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) fail_numeric("init_glorot: empty shape");
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat w(rows, cols);
    for (double& x : w.v) x = rng.uniform(-limit, limit);
    return w;
}

Mlp make_mlp(std::size_t input_width, const std::vector<LayerSpec>& specs, Rng& rng) {
    if (specs.empty()) fail_numeric("make_mlp: no layers");
    Mlp net;
    std::size_t in = input_width;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].act == Act::softmax && i + 1 != specs.size())
            fail_numeric("make_mlp: softmax only as final activation");
        Layer l;
        l.W = init_glorot(in, specs[i].width, rng);
        l.b = Mat(1, specs[i].width);
        l.act = specs[i].act;
        net.layers.push_back(std::move(l));
        in = specs[i].width;
    }
    return net;
}

void softmax_rows_inplace(Mat& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        double mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) r[j] /= sum;
    }
}

namespace {

void apply_act(Act act, Mat& z) {
    switch (act) {
        case Act::linear:
            break;
        case Act::relu:
            for (double& x : z.v) x = x > 0.0 ? x : 0.0;
            break;
        case Act::elu:
            for (double& x : z.v) x = x >= 0.0 ? x : std::expm1(x);
            break;
        case Act::tanh_:
            for (double& x : z.v) x = std::tanh(x);
            break;
        case Act::sigmoid:
            for (double& x : z.v) x = 1.0 / (1.0 + std::exp(-x));
            break;
        case Act::softmax:
            softmax_rows_inplace(z);
            break;
    }
}

// dZ = G * act'(z), written into g in place. z is the pre-activation.
void apply_act_grad(Act act, const Mat& z, Mat& g) {
    switch (act) {
        case Act::linear:
            break;
        case Act::relu:
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.v[i] <= 0.0) g.v[i] = 0.0;
            break;
        case Act::elu:
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.v[i] < 0.0) g.v[i] *= std::exp(z.v[i]);
            break;
        case Act::tanh_:
            for (std::size_t i = 0; i < z.size(); ++i) {
                double t = std::tanh(z.v[i]);
                g.v[i] *= 1.0 - t * t;
            }
            break;
        case Act::sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-z.v[i]));
                g.v[i] *= s * (1.0 - s);
            }
            break;
        case Act::softmax:
            fail_numeric("softmax gradient handled separately");
    }
}

} // namespace

Mat forward(const Mlp& net, const Mat& x, Tape* tape) {
    if (net.layers.empty()) fail_numeric("forward: empty network");
    if (x.cols != net.input_width())
        fail_numeric("forward: input width " + std::to_string(x.cols) + ", expected " +
                     std::to_string(net.input_width()));
    if (tape) {
        tape->inputs.clear();
        tape->pre.clear();
    }
    Mat a = x;
    for (const auto& layer : net.layers) {
        if (tape) tape->inputs.push_back(a);
        Mat z = matmul(a, layer.W);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zi[j] += layer.b.v[j];
        }
        if (tape) tape->pre.push_back(z);
        apply_act(layer.act, z);
        a = std::move(z);
    }
    if (tape) tape->output = a;
    return a;
}

Gradients zero_gradients(const Mlp& net) {
    Gradients g;
    for (const auto& l : net.layers) {
        g.dW.emplace_back(l.W.rows, l.W.cols);
        g.db.emplace_back(1, l.b.cols);
    }
    return g;
}

void accumulate(Gradients& acc, const Gradients& g, double alpha) {
    for (std::size_t l = 0; l < acc.dW.size(); ++l) {
        axpy(alpha, g.dW[l], acc.dW[l]);
        axpy(alpha, g.db[l], acc.db[l]);
    }
}

void scale_gradients(Gradients& g, double alpha) {
    for (auto& m : g.dW) scale_inplace(m, alpha);
    for (auto& m : g.db) scale_inplace(m, alpha);
}

double grad_dot(const Gradients& a, const Gradients& b) {
    double s = 0.0;
    for (std::size_t l = 0; l < a.dW.size(); ++l)
        s += dot_all(a.dW[l], b.dW[l]) + dot_all(a.db[l], b.db[l]);
    return s;
}

double grad_norm(const Gradients& g) { return std::sqrt(grad_dot(g, g)); }

std::vector<double> flatten(const Gradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        out.insert(out.end(), g.dW[l].v.begin(), g.dW[l].v.end());
        out.insert(out.end(), g.db[l].v.begin(), g.db[l].v.end());
    }
    return out;
}

Mat backward(const Mlp& net, const Tape& tape, const Mat& dL_dy, Gradients& grads) {
    const std::size_t n_layers = net.layers.size();
    if (tape.inputs.size() != n_layers || tape.pre.size() != n_layers)
        fail_numeric("backward: tape does not match network");
    if (dL_dy.rows != tape.output.rows || dL_dy.cols != tape.output.cols)
        fail_numeric("backward: output gradient shape mismatch");
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (tape.inputs[l].cols != net.layers[l].W.rows || tape.pre[l].cols != net.layers[l].W.cols)
            fail_numeric("backward: stale tape for layer " + std::to_string(l));
    }

    grads.dW.assign(n_layers, Mat());
    grads.db.assign(n_layers, Mat());

    Mat g = dL_dy;
    for (std::size_t li = n_layers; li-- > 0;) {
        const Layer& layer = net.layers[li];
        if (layer.act == Act::softmax) {
            // dz_j = p_j * (g_j - sum_k g_k p_k), p from the tape output
            const Mat& p = tape.output;
            Mat dz(g.rows, g.cols);
            for (std::size_t i = 0; i < g.rows; ++i) {
                const double* gi = g.row(i);
                const double* pi = p.row(i);
                double s = 0.0;
                for (std::size_t j = 0; j < g.cols; ++j) s += gi[j] * pi[j];
                double* di = dz.row(i);
                for (std::size_t j = 0; j < g.cols; ++j) di[j] = pi[j] * (gi[j] - s);
            }
            g = std::move(dz);
        } else {
            apply_act_grad(layer.act, tape.pre[li], g);
        }
        grads.dW[li] = matmul_tn(tape.inputs[li], g);
        grads.db[li] = col_sums(g);
        g = matmul_nt(g, layer.W);
    }
    return g;
}

double cross_entropy_row(const double* p, std::size_t width, int m, double eps) {
    if (m < 0 || static_cast<std::size_t>(m) >= width)
        fail_numeric("cross_entropy: message " + std::to_string(m) + " out of range");
    return -std::log(p[m] + eps);
}

double cross_entropy(const Mat& p_row, int m, double eps) {
    return cross_entropy_row(p_row.v.data(), p_row.size(), m, eps);
}

double mse(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.v[i] - b.v[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

AdamState make_adam(const Mlp& net, double lr) {
    AdamState st;
    st.lr = lr;
    for (const auto& l : net.layers) {
        st.mW.emplace_back(l.W.rows, l.W.cols);
        st.vW.emplace_back(l.W.rows, l.W.cols);
        st.mb.emplace_back(1, l.b.cols);
        st.vb.emplace_back(1, l.b.cols);
    }
    return st;
}

namespace {

void adam_step(Mat& param, const Mat& grad, Mat& m, Mat& v, const AdamState& st, double bc1,
               double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad.v[i];
        m.v[i] = st.beta1 * m.v[i] + (1.0 - st.beta1) * g;
        v.v[i] = st.beta2 * v.v[i] + (1.0 - st.beta2) * g * g;
        double mh = m.v[i] / bc1;
        double vh = v.v[i] / bc2;
        param.v[i] -= st.lr * mh / (std::sqrt(vh) + st.eps);
    }
}

} // namespace

void adam_update(Mlp& net, const Gradients& grads, AdamState& state) {
    if (grads.dW.size() != net.layers.size())
        fail_numeric("adam_update: gradient layer count mismatch");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!all_finite(grads.dW[l]) || !all_finite(grads.db[l]))
            fail_numeric("adam_update: non-finite gradient in layer " + std::to_string(l));
    }
    state.t += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        adam_step(net.layers[l].W, grads.dW[l], state.mW[l], state.vW[l], state, bc1, bc2);
        adam_step(net.layers[l].b, grads.db[l], state.mb[l], state.vb[l], state, bc1, bc2);
    }
}

std::vector<double> flatten_params(const Mlp& net) {
    std::vector<double> out;
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.W.v.begin(), l.W.v.end());
        out.insert(out.end(), l.b.v.begin(), l.b.v.end());
    }
    return out;
}

void unflatten_params(Mlp& net, const std::vector<double>& theta) {
    std::size_t pos = 0;
    for (auto& l : net.layers) {
        if (pos + l.W.size() + l.b.size() > theta.size())
            fail_numeric("unflatten_params: vector too short");
        std::copy(theta.begin() + pos, theta.begin() + pos + l.W.size(), l.W.v.begin());
        pos += l.W.size();
        std::copy(theta.begin() + pos, theta.begin() + pos + l.b.size(), l.b.v.begin());
        pos += l.b.size();
    }
    if (pos != theta.size()) fail_numeric("unflatten_params: vector length mismatch");
}

} // namespace e2e
