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

#ifndef BUSGCL_LOSSES_H_
#define BUSGCL_LOSSES_H_

#include <span>

#include "busgcl/common.h"
#include "busgcl/propagation.h"

namespace busgcl {

struct LossWeights {
  double lambda_c = 0.1;
  double lambda_d = 1.0;
  double lambda_r = 1e-2;
  double tau_c = 0.1;
  double tau_d = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double rec = 0;
  double cl_user = 0;
  double cl_item = 0;
  double disp = 0;
  double reg = 0;
  double total = 0;
};

// Fills `total` from the other fields.
LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& w);

// Counts degenerate inputs met while computing similarities.
struct LossDiagnostics {
  Index zero_norm_rows = 0;
};

enum class Side { kUser, kItem };

// Layer-summed InfoNCE between the layer outputs of two stacks on one side,
// restricted to `nodes`: for every layer and node k the positive pair is
// (anchor_k, other_k) and the denominator runs over other_{k'} for k' in
// `nodes`.
double infonce_bilateral(const BranchStack& anchor, const BranchStack& other,
                         Side side, std::span<const Index> nodes, double tau,
                         LossDiagnostics* diag = nullptr);

// Single-layer InfoNCE on explicit row sets (row k of `anchor` pairs with
// row k of `other`). The gradient outputs may be null.
double infonce_rows(const Matrix& anchor, const Matrix& other, double tau,
                    Matrix* grad_anchor, Matrix* grad_other,
                    LossDiagnostics* diag = nullptr);

// Self-contrast uniformity loss over the rows of `readout`:
//   sum_k -log(exp(sim(R_k,R_k)/tau) / sum_k' exp(sim(R_k,R_k')/tau)).
double dispersing_loss(const Matrix& readout, double tau, Matrix* grad = nullptr,
                       LossDiagnostics* diag = nullptr);

// Sum of softplus(neg - pos). `grad_diff` receives d loss / d (pos - neg).
double bpr_loss(std::span<const double> pos_scores,
                std::span<const double> neg_scores,
                std::vector<double>* grad_diff = nullptr);

double l2_regularization(const ModelParams& params);

// Mean over columns of KL(softmax(column) || uniform).
double kl_uniform_loss(const Matrix& readout, Matrix* grad = nullptr);

// Rows of the final readouts for the given nodes, users first.
Matrix stack_rows(const Matrix& users, std::span<const Index> user_rows,
                  const Matrix& items, std::span<const Index> item_rows);

// Numerically stable log(1 + exp(x)).
double softplus(double x);
double sigmoid(double x);

}  // namespace busgcl

#endif  // BUSGCL_LOSSES_H_
