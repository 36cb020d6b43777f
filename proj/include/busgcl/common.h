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

#ifndef BUSGCL_COMMON_H_
#define BUSGCL_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>

#include "Eigen/Core"
#include "Eigen/SparseCore"

namespace busgcl {

// Embedding tables are accessed row-wise (one row per node), so every dense
// matrix in the engine is row-major.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int64_t>;

using Index = int64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files or config values.
class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace busgcl

#endif  // BUSGCL_COMMON_H_
