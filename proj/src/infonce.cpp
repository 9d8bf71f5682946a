#include "regen/infonce.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "regen/error.hpp"

namespace regen {

namespace {

// Row softmax of logits in place; returns log-sum-exp per row.
std::vector<double> softmax_rows(Matrix& logits) {
    std::vector<double> lse(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        const double max = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - max);
        lse[i] = max + std::log(sum);
        for (double& v : row) v = std::exp(v - lse[i]);
    }
    return lse;
}

}  // namespace

std::vector<double> infonce_row_losses(const Matrix& logits) {
    if (logits.rows() != logits.cols()) throw ConfigError("infonce: logit matrix must be square");
    Matrix probs = logits;
    const auto lse = softmax_rows(probs);
    std::vector<double> losses(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) losses[i] = lse[i] - logits(i, i);
    return losses;
}

InfoNceResult infonce_loss(const Matrix& anchors, const Matrix& positives, double tau) {
    const std::size_t n = anchors.rows();
    const std::size_t dim = anchors.cols();
    if (n == 0) throw ConfigError("infonce: empty batch");
    if (positives.rows() != n || positives.cols() != dim) throw ConfigError("infonce: anchor/positive shapes differ");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("infonce: temperature must be positive");
    for (double v : anchors.data())
        if (!std::isfinite(v)) throw Error("infonce: non-finite anchor entry");
    for (double v : positives.data())
        if (!std::isfinite(v)) throw Error("infonce: non-finite positive entry");

    Matrix probs(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = anchors.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto p = positives.row(j);
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) dot += a[d] * p[d];
            probs(i, j) = dot / tau;
        }
    }

    InfoNceResult out;
    double total = 0.0;
    {
        const Matrix logits = probs;
        const auto lse = softmax_rows(probs);
        for (std::size_t i = 0; i < n; ++i) total += lse[i] - logits(i, i);
    }
    out.loss = std::max(0.0, total / static_cast<double>(n));

    // dL/dlogit_ij = (p_ij - [i==j]) / n, and logit_ij = a_i.p_j / tau.
    Matrix grad_logits = probs;
    for (std::size_t i = 0; i < n; ++i) grad_logits(i, i) -= 1.0;
    const double scale = 1.0 / (static_cast<double>(n) * tau);

    out.grad_anchors = Matrix(n, dim);
    out.grad_positives = Matrix(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double g = grad_logits(i, j) * scale;
            if (g == 0.0) continue;
            const auto a = anchors.row(i);
            const auto p = positives.row(j);
            auto ga = out.grad_anchors.row(i);
            auto gp = out.grad_positives.row(j);
            for (std::size_t d = 0; d < dim; ++d) {
                ga[d] += g * p[d];
                gp[d] += g * a[d];
            }
        }
    }
    return out;
}

}  // namespace regen
