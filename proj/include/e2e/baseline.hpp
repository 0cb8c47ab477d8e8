#ifndef E2E_BASELINE_HPP
#define E2E_BASELINE_HPP

#include <string>
#include <vector>

#include "e2e/mat.hpp"

namespace e2e {

struct Constellation {
    Mat points;  // M x 2N, unit mean energy per complex symbol
    std::string label;

    int M() const { return static_cast<int>(points.rows); }
    int N() const { return static_cast<int>(points.cols / 2); }
};

// Gray-mapped QPSK over N complex uses: bit 2n of m selects the I sign of
// use n, bit 2n+1 the Q sign, 0 -> +. Unit energy per symbol.
Mat qpsk_mod(int m, int N);
int qpsk_demod(const double* y, int N);  // sign decisions; boundary 0 -> +
int qpsk_demod(const Mat& y_row, int N);

Constellation qpsk_constellation(int N);

// 1 - (1 - Q(sqrt(SNR)))^(2N), SNR linear from snr_db
double analytic_qpsk_bler(double snr_db, int N);
double q_function(double x);

// Nearest neighbor in squared Euclidean distance (ML under AWGN); ties go
// to the lowest index.
int ml_detect(const Constellation& c, const double* y);
int ml_detect(const Constellation& c, const Mat& y_row);

// Complex division of the data symbols by hhat = y_pilot / x_pilot. The
// input block carries the pilot on use 0.
// Throws (erasure) when |hhat| < 1e-9.
Mat pilot_equalize(const Mat& block_row, int N, double pilot_re = 1.0, double pilot_im = 0.0);

// Plain text, one point per line, 2N comma-separated values. Points are
// renormalized to unit mean symbol energy on load.
Constellation load_constellation(const std::string& path);

} // namespace e2e

#endif
