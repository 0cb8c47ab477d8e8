#include "e2e/baseline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "e2e/error.hpp"

namespace e2e {

namespace {
const double kInvSqrt2 = 0.7071067811865476;
}

Mat qpsk_mod(int m, int N) {
    const long M = 1L << (2 * N);
    if (m < 0 || m >= M)
        fail_numeric("qpsk_mod: message " + std::to_string(m) + " out of range for N=" +
                     std::to_string(N));
    Mat x(1, static_cast<std::size_t>(2 * N));
    for (int n = 0; n < N; ++n) {
        int bi = (m >> (2 * n)) & 1;
        int bq = (m >> (2 * n + 1)) & 1;
        x(0, static_cast<std::size_t>(n)) = bi ? -kInvSqrt2 : kInvSqrt2;
        x(0, static_cast<std::size_t>(N + n)) = bq ? -kInvSqrt2 : kInvSqrt2;
    }
    return x;
}

int qpsk_demod(const double* y, int N) {
    int m = 0;
    for (int n = 0; n < N; ++n) {
        if (y[n] < 0.0) m |= 1 << (2 * n);
        if (y[N + n] < 0.0) m |= 1 << (2 * n + 1);
    }
    return m;
}

int qpsk_demod(const Mat& y_row, int N) {
    if (y_row.size() != static_cast<std::size_t>(2 * N)) fail_numeric("qpsk_demod: width mismatch");
    return qpsk_demod(y_row.v.data(), N);
}

Constellation qpsk_constellation(int N) {
    const long M = 1L << (2 * N);
    Constellation c;
    c.label = "qpsk";
    c.points = Mat(static_cast<std::size_t>(M), static_cast<std::size_t>(2 * N));
    for (long m = 0; m < M; ++m) {
        Mat row = qpsk_mod(static_cast<int>(m), N);
        for (std::size_t j = 0; j < row.size(); ++j) c.points(static_cast<std::size_t>(m), j) = row.v[j];
    }
    return c;
}

double q_function(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double analytic_qpsk_bler(double snr_db, int N) {
    double snr = std::pow(10.0, snr_db / 10.0);
    double q = q_function(std::sqrt(snr));
    return 1.0 - std::pow(1.0 - q, 2.0 * N);
}

int ml_detect(const Constellation& c, const double* y) {
    int best = 0;
    double best_d = 0.0;
    for (int m = 0; m < c.M(); ++m) {
        const double* p = c.points.row(static_cast<std::size_t>(m));
        double d = 0.0;
        for (std::size_t j = 0; j < c.points.cols; ++j) {
            double e = y[j] - p[j];
            d += e * e;
        }
        if (m == 0 || d < best_d) {
            best = m;
            best_d = d;
        }
    }
    return best;
}

int ml_detect(const Constellation& c, const Mat& y_row) {
    if (y_row.size() != c.points.cols) fail_numeric("ml_detect: width mismatch");
    return ml_detect(c, y_row.v.data());
}

Mat pilot_equalize(const Mat& block_row, int N, double pilot_re, double pilot_im) {
    if (block_row.size() != static_cast<std::size_t>(2 * (N + 1)))
        fail_numeric("pilot_equalize: expected block of " + std::to_string(N + 1) +
                     " complex uses");
    const double* y = block_row.v.data();
    const int bn = N + 1;
    // hhat = y_pilot / x_pilot
    double pe = pilot_re * pilot_re + pilot_im * pilot_im;
    double h1 = (y[0] * pilot_re + y[bn] * pilot_im) / pe;
    double h2 = (y[bn] * pilot_re - y[0] * pilot_im) / pe;
    double hn = h1 * h1 + h2 * h2;
    if (std::sqrt(hn) < 1e-9) fail_numeric("pilot_equalize: fading estimate below 1e-9 (erasure)");
    Mat data(1, static_cast<std::size_t>(2 * N));
    for (int n = 0; n < N; ++n) {
        double u = y[1 + n], v = y[bn + 1 + n];
        data(0, static_cast<std::size_t>(n)) = (h1 * u + h2 * v) / hn;
        data(0, static_cast<std::size_t>(N + n)) = (h1 * v - h2 * u) / hn;
    }
    return data;
}

Constellation load_constellation(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_io("load_constellation: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                fail_io("load_constellation: non-numeric value at " + path + ":" +
                        std::to_string(lineno));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            fail_io("load_constellation: ragged row at " + path + ":" + std::to_string(lineno));
        if (row.empty() || row.size() % 2 != 0)
            fail_io("load_constellation: need an even, positive column count at " + path + ":" +
                    std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail_io("load_constellation: empty file " + path);

    Constellation c;
    c.label = path;
    c.points = Mat(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) c.points(i, j) = rows[i][j];

    double energy = sum_squares(c.points);
    if (energy <= 0.0) fail_io("load_constellation: all-zero constellation in " + path);
    double want = static_cast<double>(c.points.rows) * (static_cast<double>(c.points.cols) / 2.0);
    scale_inplace(c.points, std::sqrt(want / energy));
    return c;
}

} // namespace e2e
