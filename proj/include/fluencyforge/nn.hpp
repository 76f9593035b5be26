#pragma once

#include <Eigen/Dense>

namespace fluencyforge::nn {

// Convention: activations are (positions × features); a Linear maps the
// feature axis. All arithmetic is in doubles so analytic gradients can be
// validated against central finite differences tightly.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Linear {
    Mat W; // (in × out)
    Vec b; // (out)
};

struct LinearGrad {
    Mat W;
    Vec b;
};

Mat linear_forward(const Linear& lin, const Mat& x);

// Returns dX; accumulates parameter gradients into *grad when non-null.
Mat linear_backward(const Linear& lin, const Mat& x, const Mat& dY, LinearGrad* grad);

inline constexpr double kLayerNormEps = 1e-6;

struct LayerNorm {
    Vec gamma;
    Vec beta;
};

struct LayerNormGrad {
    Vec gamma;
    Vec beta;
};

struct LayerNormCache {
    Mat xhat;    // normalized input
    Vec inv_std; // per row
};

Mat layernorm_forward(const LayerNorm& ln, const Mat& x, LayerNormCache& cache);
Mat layernorm_backward(const LayerNorm& ln, const LayerNormCache& cache, const Mat& dY,
                       LayerNormGrad* grad);

// GELU, tanh approximation — smooth everywhere, which keeps central
// finite differences honest at a 1e-4 step.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dY);

Mat softmax_rows(const Mat& s);
// p = softmax_rows(s); given dp returns ds.
Mat softmax_rows_backward(const Mat& p, const Mat& dP);

} // namespace fluencyforge::nn
