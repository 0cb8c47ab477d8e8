#ifndef E2E_MAT_HPP
#define E2E_MAT_HPP

#include <cstddef>
#include <vector>

#include "e2e/error.hpp"

namespace e2e {

// Dense row-major matrix of doubles. All numeric state in the project
// (symbols, parameters, gradients) lives in these.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }

    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
};

// C = A * B
Mat matmul(const Mat& a, const Mat& b);
// C = A^T * B
Mat matmul_tn(const Mat& a, const Mat& b);
// C = A * B^T
Mat matmul_nt(const Mat& a, const Mat& b);

Mat transpose(const Mat& a);

// y += alpha * x (shapes must match)
void axpy(double alpha, const Mat& x, Mat& y);
void scale_inplace(Mat& a, double alpha);

double dot_all(const Mat& a, const Mat& b);     // sum of elementwise products
double sum_squares(const Mat& a);
double frob_norm(const Mat& a);
Mat col_sums(const Mat& a);                     // 1 x cols

bool all_finite(const Mat& a);
void require_same_shape(const Mat& a, const Mat& b, const char* what);

} // namespace e2e

#endif
