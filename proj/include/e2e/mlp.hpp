#ifndef E2E_MLP_HPP
#define E2E_MLP_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "e2e/mat.hpp"
#include "e2e/rng.hpp"

namespace e2e {

enum class Act { linear, relu, elu, tanh_, sigmoid, softmax };

const char* act_name(Act a);
Act act_from_name(const std::string& name);

struct Layer {
    Mat W;   // in x out
    Mat b;   // 1 x out
    Act act = Act::linear;
};

struct Mlp {
    std::vector<Layer> layers;

    std::size_t input_width() const { return layers.empty() ? 0 : layers.front().W.rows; }
    std::size_t output_width() const { return layers.empty() ? 0 : layers.back().W.cols; }
    std::size_t param_count() const;
};

struct LayerSpec {
    std::size_t width;
    Act act;
};

// Glorot-uniform weights, zero biases; softmax allowed only on the last layer.
Mlp make_mlp(std::size_t input_width, const std::vector<LayerSpec>& specs, Rng& rng);

Mat init_glorot(std::size_t rows, std::size_t cols, Rng& rng);

// Per-layer cache from one forward pass; consumed by backward().
struct Tape {
    std::vector<Mat> inputs;  // activation entering each layer (B x in)
    std::vector<Mat> pre;     // pre-activation of each layer (B x out)
    Mat output;               // post-activation of the last layer
};

// Returns the network output; fills the tape when given.
Mat forward(const Mlp& net, const Mat& x, Tape* tape = nullptr);

struct Gradients {
    std::vector<Mat> dW;
    std::vector<Mat> db;
};

Gradients zero_gradients(const Mlp& net);
void accumulate(Gradients& acc, const Gradients& g, double alpha = 1.0);
void scale_gradients(Gradients& g, double alpha);
double grad_dot(const Gradients& a, const Gradients& b);
double grad_norm(const Gradients& g);
std::vector<double> flatten(const Gradients& g);

// Exact reverse pass for the scalar loss whose output gradient is dL_dy.
// Returns dL/dx so callers can chain through differentiable channels.
Mat backward(const Mlp& net, const Tape& tape, const Mat& dL_dy, Gradients& grads);

void softmax_rows_inplace(Mat& m);

constexpr double kCrossEntropyEps = 1e-12;

// -log(p[m] + eps); bounded above by -log(eps)
double cross_entropy(const Mat& p_row, int m, double eps = kCrossEntropyEps);
double cross_entropy_row(const double* p, std::size_t width, int m, double eps = kCrossEntropyEps);

double mse(const Mat& a, const Mat& b);

struct AdamState {
    std::vector<Mat> mW, vW, mb, vb;
    long t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(const Mlp& net, double lr = 1e-3);
void adam_update(Mlp& net, const Gradients& grads, AdamState& state);

// Parameter vector round-trip (used by the SPSA path).
std::vector<double> flatten_params(const Mlp& net);
void unflatten_params(Mlp& net, const std::vector<double>& theta);

} // namespace e2e

#endif
