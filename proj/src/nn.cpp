#include "fluencyforge/nn.hpp"

#include <cmath>

namespace fluencyforge::nn {

Mat linear_forward(const Linear& lin, const Mat& x) {
    return (x * lin.W).rowwise() + lin.b.transpose();
}

Mat linear_backward(const Linear& lin, const Mat& x, const Mat& dY, LinearGrad* grad) {
    if (grad != nullptr) {
        grad->W += x.transpose() * dY;
        grad->b += dY.colwise().sum().transpose();
    }
    return dY * lin.W.transpose();
}

Mat layernorm_forward(const LayerNorm& ln, const Mat& x, LayerNormCache& cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    cache.xhat.resize(n, d);
    cache.inv_std.resize(n);
    Mat y(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.inv_std(i) = inv;
        cache.xhat.row(i) = ((x.row(i).array() - mu) * inv).matrix();
        y.row(i) = (cache.xhat.row(i).array() * ln.gamma.transpose().array() +
                    ln.beta.transpose().array())
                       .matrix();
    }
    return y;
}

Mat layernorm_backward(const LayerNorm& ln, const LayerNormCache& cache, const Mat& dY,
                       LayerNormGrad* grad) {
    const Eigen::Index n = dY.rows();
    const Eigen::Index d = dY.cols();
    Mat dX(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (grad != nullptr) {
            grad->beta += dY.row(i).transpose();
            grad->gamma += (dY.row(i).array() * cache.xhat.row(i).array()).matrix().transpose();
        }
        const Eigen::ArrayXd dxhat =
            (dY.row(i).array() * ln.gamma.transpose().array()).transpose();
        const Eigen::ArrayXd xhat = cache.xhat.row(i).transpose().array();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * xhat).mean();
        dX.row(i) = ((dxhat - m1 - xhat * m2) * cache.inv_std(i)).matrix().transpose();
    }
    return dX;
}

namespace {
constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
} // namespace

double gelu_scalar(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Mat gelu(const Mat& x) {
    return x.unaryExpr([](double v) { return gelu_scalar(v); });
}

Mat gelu_backward(const Mat& x, const Mat& dY) {
    Mat g = x.unaryExpr([](double v) { return gelu_grad_scalar(v); });
    return dY.cwiseProduct(g);
}

Mat softmax_rows(const Mat& s) {
    Mat out(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        Eigen::ArrayXd e = (s.row(i).array() - mx).exp().transpose();
        out.row(i) = (e / e.sum()).matrix().transpose();
    }
    return out;
}

Mat softmax_rows_backward(const Mat& p, const Mat& dP) {
    Mat dS(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double dot = (dP.row(i).array() * p.row(i).array()).sum();
        dS.row(i) = (p.row(i).array() * (dP.row(i).array() - dot)).matrix();
    }
    return dS;
}

} // namespace fluencyforge::nn
