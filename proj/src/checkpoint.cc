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

#include "busgcl/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "fmt/format.h"

namespace busgcl {
namespace {

void put_u64(std::ostream& out, uint64_t x) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw ParseError("checkpoint truncated");
  }
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return x;
}

void put_tensor(std::ostream& out, const Matrix& m) {
  put_u64(out, static_cast<uint64_t>(m.rows()));
  put_u64(out, static_cast<uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      put_u64(out, std::bit_cast<uint64_t>(m(i, j)));
    }
  }
}

Matrix get_tensor(std::istream& in) {
  const uint64_t rows = get_u64(in);
  const uint64_t cols = get_u64(in);
  if (rows > (1ULL << 32) || cols > (1ULL << 20)) {
    throw ParseError(fmt::format("implausible tensor shape {}x{}", rows, cols));
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = std::bit_cast<double>(get_u64(in));
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p,
                     const std::string& config_text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out.write(kCheckpointMagic, 4);
  out.put(static_cast<char>(kCheckpointVersion));
  put_u64(out, config_text.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  put_tensor(out, p.e_user);
  put_tensor(out, p.e_item);
  put_tensor(out, p.w_user);
  put_tensor(out, p.w_item);
  if (!out) throw Error(fmt::format("failed writing {}", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open checkpoint {}", path.string()));
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError(fmt::format("{} is not a checkpoint", path.string()));
  }
  const int version = in.get();
  if (version != kCheckpointVersion) {
    throw ParseError(fmt::format("unsupported checkpoint version {}", version));
  }
  Checkpoint ck;
  const uint64_t len = get_u64(in);
  if (len > (1ULL << 24)) throw ParseError("implausible config length");
  ck.config_text.resize(len);
  if (!in.read(ck.config_text.data(), static_cast<std::streamsize>(len))) {
    throw ParseError("checkpoint truncated");
  }
  ck.params.e_user = get_tensor(in);
  ck.params.e_item = get_tensor(in);
  ck.params.w_user = get_tensor(in);
  ck.params.w_item = get_tensor(in);
  const Index d = ck.params.e_user.cols();
  if (ck.params.e_item.cols() != d || ck.params.w_user.rows() != d ||
      ck.params.w_item.rows() != d ||
      ck.params.w_user.cols() != ck.params.w_item.cols()) {
    throw ParseError("checkpoint tensors have inconsistent shapes");
  }
  return ck;
}

}  // namespace busgcl
