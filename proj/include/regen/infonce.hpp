#pragma once

#include <vector>

#include "regen/matrix.hpp"

namespace regen {

struct InfoNceResult {
    double loss = 0.0;
    Matrix grad_anchors;
    Matrix grad_positives;
};

// In-batch contrastive loss over dot-product similarities:
//   loss = mean_i -log( exp(a_i.p_i / tau) / sum_j exp(a_i.p_j / tau) )
// Row i's negatives are the other rows' positives. Gradients are w.r.t. the
// mean loss. Throws ConfigError on shape mismatch / tau <= 0 and Error on
// non-finite input.
InfoNceResult infonce_loss(const Matrix& anchors, const Matrix& positives, double tau);

// Per-row -log softmax(logits_i)_i for a square logit matrix, computed with
// per-row max subtraction.
std::vector<double> infonce_row_losses(const Matrix& logits);

}  // namespace regen
