#include "e2e/mat.hpp"

#include <cmath>
#include <string>

#include "e2e/parallel.hpp"

namespace e2e {

namespace {

constexpr std::size_t kParallelFlops = std::size_t(1) << 22;

void gemm_nn_rows(const Mat& a, const Mat& b, Mat& c, std::size_t r0, std::size_t r1) {
    const std::size_t k_dim = a.cols, n = b.cols;
    for (std::size_t i = r0; i < r1; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;  // one-hot rows are the common case
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

// C = A^T B accumulated over a row range of A; caller merges partials.
void gemm_tn_range(const Mat& a, const Mat& b, Mat& c, std::size_t i0, std::size_t i1) {
    const std::size_t m = a.cols, n = b.cols;
    for (std::size_t i = i0; i < i1; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            double* ck = c.row(k);
            for (std::size_t j = 0; j < n; ++j) ck[j] += aik * bi[j];
        }
    }
}

void gemm_nt_rows(const Mat& a, const Mat& b, Mat& c, std::size_t r0, std::size_t r1) {
    const std::size_t k_dim = a.cols, n = b.rows;
    for (std::size_t i = r0; i < r1; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.row(j);
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            std::size_t k = 0;
            for (; k + 4 <= k_dim; k += 4) {
                s0 += ai[k] * bj[k];
                s1 += ai[k + 1] * bj[k + 1];
                s2 += ai[k + 2] * bj[k + 2];
                s3 += ai[k + 3] * bj[k + 3];
            }
            double s = (s0 + s1) + (s2 + s3);
            for (; k < k_dim; ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
}

} // namespace

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows)
        fail_numeric("matmul: inner dimensions " + std::to_string(a.cols) + " vs " +
                     std::to_string(b.rows));
    Mat c(a.rows, b.cols);
    if (a.rows * a.cols * b.cols >= kParallelFlops && a.rows > 1) {
        parallel_for(a.rows, [&](std::size_t r0, std::size_t r1) { gemm_nn_rows(a, b, c, r0, r1); });
    } else {
        gemm_nn_rows(a, b, c, 0, a.rows);
    }
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows != b.rows)
        fail_numeric("matmul_tn: row counts " + std::to_string(a.rows) + " vs " +
                     std::to_string(b.rows));
    Mat c(a.cols, b.cols);
    // Partials per worker keep the row accumulation race-free and the
    // merge order fixed, so the result does not depend on worker count.
    if (a.rows * a.cols * b.cols >= kParallelFlops && a.rows > 1) {
        const std::size_t workers = 2;
        std::vector<Mat> parts(workers, Mat(a.cols, b.cols));
        std::size_t half = a.rows / 2;
        parallel_for(workers, [&](std::size_t w0, std::size_t w1) {
            for (std::size_t w = w0; w < w1; ++w) {
                std::size_t i0 = w == 0 ? 0 : half;
                std::size_t i1 = w == 0 ? half : a.rows;
                gemm_tn_range(a, b, parts[w], i0, i1);
            }
        });
        for (std::size_t w = 0; w < workers; ++w) axpy(1.0, parts[w], c);
    } else {
        gemm_tn_range(a, b, c, 0, a.rows);
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols)
        fail_numeric("matmul_nt: col counts " + std::to_string(a.cols) + " vs " +
                     std::to_string(b.cols));
    Mat c(a.rows, b.rows);
    if (a.rows * a.cols * b.rows >= kParallelFlops && a.rows > 1) {
        parallel_for(a.rows, [&](std::size_t r0, std::size_t r1) { gemm_nt_rows(a, b, c, r0, r1); });
    } else {
        gemm_nt_rows(a, b, c, 0, a.rows);
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

void axpy(double alpha, const Mat& x, Mat& y) {
    require_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] += alpha * x.v[i];
}

void scale_inplace(Mat& a, double alpha) {
    for (double& x : a.v) x *= alpha;
}

double dot_all(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "dot_all");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

double sum_squares(const Mat& a) {
    double s = 0.0;
    for (double x : a.v) s += x * x;
    return s;
}

double frob_norm(const Mat& a) { return std::sqrt(sum_squares(a)); }

Mat col_sums(const Mat& a) {
    Mat s(1, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) s.v[j] += ai[j];
    }
    return s;
}

bool all_finite(const Mat& a) {
    for (double x : a.v)
        if (!std::isfinite(x)) return false;
    return true;
}

void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols)
        fail_numeric(std::string(what) + ": shape " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols));
}

} // namespace e2e
