// Copyright 2026 The BusGCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "busgcl/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "busgcl/parallel.h"
#include "fmt/format.h"

namespace busgcl {
namespace {

// Rows per block of the similarity matrix. A block of logits stays in cache
// between the product, the softmax and the two gradient products.
constexpr Index kBlockRows = 32;
// Partial sums kept per contiguous run of blocks; also the parallel width.
constexpr Index kReduceGroups = 8;

// Unit-normalizes rows in place; zero rows stay zero. Returns the norms.
Vector normalize_rows(Matrix& m, LossDiagnostics* diag) {
  Vector norms = m.rowwise().norm();
  for (Index i = 0; i < m.rows(); ++i) {
    if (norms[i] > 0) {
      m.row(i) /= norms[i];
    } else if (diag) {
      ++diag->zero_norm_rows;
    }
  }
  return norms;
}

// Pulls a gradient w.r.t. normalized rows back to the raw rows.
Matrix normalize_rows_backward(const Matrix& unit, const Vector& norms,
                               const Matrix& grad_unit) {
  Matrix g(unit.rows(), unit.cols());
  for (Index i = 0; i < unit.rows(); ++i) {
    if (norms[i] > 0) {
      const double proj = unit.row(i).dot(grad_unit.row(i));
      g.row(i) = (grad_unit.row(i) - proj * unit.row(i)) / norms[i];
    } else {
      g.row(i).setZero();
    }
  }
  return g;
}

Matrix gather_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= m.rows()) {
      throw DimensionError(fmt::format("row {} out of range", rows[k]));
    }
    out.row(static_cast<Index>(k)) = m.row(rows[k]);
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (!(tau_c > 0) || !(tau_d > 0)) {
    throw Error("temperatures must be strictly positive");
  }
  if (lambda_c < 0 || lambda_d < 0 || lambda_r < 0) {
    throw Error("loss weights must be non-negative");
  }
}

LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& w) {
  LossBreakdown out = parts;
  out.total = parts.rec + w.lambda_c * (parts.cl_user + parts.cl_item) +
              w.lambda_d * parts.disp + w.lambda_r * parts.reg;
  return out;
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double infonce_rows(const Matrix& anchor, const Matrix& other, double tau,
                    Matrix* grad_anchor, Matrix* grad_other,
                    LossDiagnostics* diag) {
  if (anchor.rows() != other.rows() || anchor.cols() != other.cols()) {
    throw DimensionError("contrastive views differ in shape");
  }
  if (!(tau > 0)) throw Error("temperature must be positive");
  const Index n = anchor.rows();
  if (n == 0) throw Error("contrastive node set is empty");
  const bool want_grad = grad_anchor || grad_other;

  Matrix a = anchor;
  Matrix b = other;
  const Vector a_norms = normalize_rows(a, diag);
  const Vector b_norms = normalize_rows(b, diag);

  Matrix ga;
  if (want_grad) ga.resize(n, a.cols());
  // Blocks are reduced in a fixed number of contiguous groups, each summed in
  // order, so the result does not depend on the thread count.
  const Index n_blocks = (n + kBlockRows - 1) / kBlockRows;
  const Index n_groups = std::min(kReduceGroups, n_blocks);
  std::vector<double> group_loss(n_groups, 0.0);
  std::vector<Matrix> group_gb(want_grad ? n_groups : 0);

  const int threads = static_cast<int>(std::min<Index>(max_threads(), n_groups));
#pragma omp parallel for schedule(static, 1) num_threads(threads)
  for (Index g = 0; g < n_groups; ++g) {
    const Index first = g * n_blocks / n_groups;
    const Index last = (g + 1) * n_blocks / n_groups;
    Matrix logits;
    Matrix gb_part;
    if (want_grad) gb_part = Matrix::Zero(n, b.cols());
    double loss = 0;
    for (Index blk = first; blk < last; ++blk) {
      const Index start = blk * kBlockRows;
      const Index rows = std::min(kBlockRows, n - start);
      logits.noalias() = a.middleRows(start, rows) * b.transpose();
      logits /= tau;
      for (Index r = 0; r < rows; ++r) {
        auto row = logits.row(r);
        const double mx = row.maxCoeff();
        const double positive = row[start + r];
        row = (row.array() - mx).exp();
        const double z = row.sum();
        loss += mx + std::log(z) - positive;
        if (want_grad) {
          row /= z;
          row[start + r] -= 1.0;
          row /= tau;
        }
      }
      if (want_grad) {
        ga.middleRows(start, rows).noalias() = logits * b;
        gb_part.noalias() += logits.transpose() * a.middleRows(start, rows);
      }
    }
    group_loss[g] = loss;
    if (want_grad) group_gb[g] = std::move(gb_part);
  }
  double loss = 0;
  for (double l : group_loss) loss += l;
  if (!want_grad) return loss;
  Matrix gb = std::move(group_gb[0]);
  for (Index g = 1; g < n_groups; ++g) gb += group_gb[g];
  if (grad_anchor) *grad_anchor = normalize_rows_backward(a, a_norms, ga);
  if (grad_other) *grad_other = normalize_rows_backward(b, b_norms, gb);
  return loss;
}

double infonce_bilateral(const BranchStack& anchor, const BranchStack& other,
                         Side side, std::span<const Index> nodes, double tau,
                         LossDiagnostics* diag) {
  const auto& a_layers = side == Side::kUser ? anchor.layer_user : anchor.layer_item;
  const auto& o_layers = side == Side::kUser ? other.layer_user : other.layer_item;
  if (a_layers.size() != o_layers.size()) {
    throw DimensionError("stacks differ in layer count");
  }
  if (a_layers.empty()) throw DimensionError("stacks have no layers");
  if (nodes.empty()) throw Error("contrastive node set is empty");
  double loss = 0;
  for (size_t l = 0; l < a_layers.size(); ++l) {
    const auto& a = a_layers[l];
    const auto& o = o_layers[l];
    loss += infonce_rows(gather_rows(a, nodes), gather_rows(o, nodes), tau,
                         nullptr, nullptr, diag);
  }
  return loss;
}

double dispersing_loss(const Matrix& readout, double tau, Matrix* grad,
                       LossDiagnostics* diag) {
  // Self-contrast is InfoNCE of the matrix against itself.
  if (!grad) return infonce_rows(readout, readout, tau, nullptr, nullptr, diag);
  Matrix ga, gb;
  const double loss = infonce_rows(readout, readout, tau, &ga, &gb, diag);
  *grad = ga + gb;
  return loss;
}

double bpr_loss(std::span<const double> pos_scores,
                std::span<const double> neg_scores,
                std::vector<double>* grad_diff) {
  if (pos_scores.size() != neg_scores.size() || pos_scores.empty()) {
    throw DimensionError("BPR needs equal, non-empty score lists");
  }
  double loss = 0;
  if (grad_diff) grad_diff->resize(pos_scores.size());
  for (size_t i = 0; i < pos_scores.size(); ++i) {
    const double diff = pos_scores[i] - neg_scores[i];
    loss += softplus(-diff);
    if (grad_diff) (*grad_diff)[i] = -sigmoid(-diff);
  }
  return loss;
}

double l2_regularization(const ModelParams& params) {
  return params.e_user.squaredNorm() + params.e_item.squaredNorm() +
         params.w_user.squaredNorm() + params.w_item.squaredNorm();
}

double kl_uniform_loss(const Matrix& readout, Matrix* grad) {
  const Index n = readout.rows();
  const Index d = readout.cols();
  if (n < 2) throw Error("KL loss needs at least two rows");
  if (grad) grad->setZero(n, d);
  const double log_n = std::log(static_cast<double>(n));
  double total = 0;
  Vector p(n), logp(n);
  for (Index c = 0; c < d; ++c) {
    const auto col = readout.col(c);
    const double mx = col.maxCoeff();
    const double z = (col.array() - mx).exp().sum();
    const double log_z = std::log(z) + mx;
    logp = col.array() - log_z;
    p = logp.array().exp();
    const double neg_entropy = p.dot(logp);
    total += neg_entropy + log_n;
    if (grad) {
      grad->col(c) =
          (p.array() * (logp.array() - neg_entropy)) / static_cast<double>(d);
    }
  }
  return total / static_cast<double>(d);
}

Matrix stack_rows(const Matrix& users, std::span<const Index> user_rows,
                  const Matrix& items, std::span<const Index> item_rows) {
  Matrix out(static_cast<Index>(user_rows.size() + item_rows.size()),
             users.cols());
  out.topRows(static_cast<Index>(user_rows.size())) = gather_rows(users, user_rows);
  out.bottomRows(static_cast<Index>(item_rows.size())) =
      gather_rows(items, item_rows);
  return out;
}

}  // namespace busgcl
