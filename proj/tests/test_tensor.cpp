/*
 * Copyright 2026 The Varprop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>

#include <doctest.h>

#include "testing/oracles.hpp"
#include "varprop/errors.hpp"
#include "varprop/rng.hpp"
#include "varprop/tensor.hpp"

using namespace varprop;
using namespace varprop::testing;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.extent(0) == 2);
  CHECK(t.extent(1) == 3);
  t(1, 2) = 4.0;
  CHECK(t[5] == 4.0);

  const Tensor r = t.reshaped({3, 2});
  CHECK(r.extent(0) == 3);
  CHECK(r[5] == 4.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("matmul identity and diagonal cases") {
  const Tensor a = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  const Tensor i2 = Tensor::identity(2);
  CHECK(max_abs_diff(matmul(i2, a), a) == 0.0);

  const Tensor d = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 2.0});
  const Tensor ones = Tensor::matrix(2, 1, {1.0, 1.0});
  const Tensor got = matmul(d, ones);
  CHECK(got(0, 0) == 1.0);
  CHECK(got(1, 0) == 2.0);
}

TEST_CASE("matmul matches an independently ordered reference") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 5);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * 5);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 5);
    const Tensor a = random_tensor({m, k}, rng, -2.0, 2.0);
    const Tensor b = random_tensor({k, n}, rng, -2.0, 2.0);
    CHECK(max_abs_diff(matmul(a, b), matmul_reference(a, b)) < 1e-13);
  }
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST_CASE("matvec applies a matrix to any flattenable operand") {
  const Tensor w = Tensor::matrix(2, 3, {1.0, 0.0, 2.0, 0.0, 1.0, 0.0});
  const Tensor x({3, 1, 1}, {1.0, 5.0, 2.0});
  const Tensor y = matvec(w, x);
  CHECK(y.size() == 2);
  CHECK(y[0] == 5.0);
  CHECK(y[1] == 5.0);
  CHECK_THROWS_AS(matvec(w, Tensor({2})), ShapeError);
}

TEST_CASE("elementwise helpers") {
  const Tensor a = Tensor::vector({1.0, -2.0});
  const Tensor b = Tensor::vector({0.5, 3.0});
  CHECK(add(a, b)[1] == 1.0);
  CHECK(sub(a, b)[0] == 0.5);
  CHECK(hadamard(a, b)[1] == -6.0);
  CHECK(scaled(a, -1.0)[0] == -1.0);
  CHECK_THROWS_AS(add(a, Tensor({3})), ShapeError);
}

TEST_CASE("transpose round trip") {
  RngStream rng(3, 0);
  const Tensor a = random_tensor({3, 5}, rng);
  const Tensor t = transposed(a);
  CHECK(t.extent(0) == 5);
  CHECK(max_abs_diff(transposed(t), a) == 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(t(j, i) == a(i, j));
  }
}

TEST_CASE("erf endpoints and series oracle") {
  CHECK(varprop::erf(0.0) == 0.0);
  CHECK(std::abs(varprop::erf(10.0) - 1.0) < 1e-12);
  CHECK(varprop::erf(1.0) == doctest::Approx(0.8427007929).epsilon(1e-9));
  for (double x = -3.0; x <= 3.0; x += 0.37) {
    CHECK(std::abs(varprop::erf(x) - taylor_erf(x)) < 1e-13);
  }
}

TEST_CASE("conv2d identity kernel passes input through") {
  RngStream rng(5, 0);
  const Tensor x = random_tensor({4, 3, 1}, rng);
  const Tensor k({1, 1, 1, 1}, {1.0});
  CHECK(max_abs_diff(conv2d(x, k, Padding::kValid), x) == 0.0);
  CHECK(max_abs_diff(conv2d(x, k, Padding::kSame), x) == 0.0);
}

TEST_CASE("conv2d hand-summed 1x2 kernel") {
  const Tensor x({1, 3, 1}, {1.0, 1.0, 1.0});
  const Tensor k({1, 2, 1, 1}, {1.0, 2.0});
  const Tensor y = conv2d(x, k, Padding::kValid);
  CHECK(y.extent(0) == 1);
  CHECK(y.extent(1) == 2);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 3.0);
}

TEST_CASE("conv2d same padding keeps spatial extent") {
  RngStream rng(6, 0);
  const Tensor x = random_tensor({5, 5, 2}, rng);
  const Tensor k = random_tensor({3, 3, 2, 4}, rng);
  const Tensor y = conv2d(x, k, Padding::kSame);
  CHECK(y.extent(0) == 5);
  CHECK(y.extent(1) == 5);
  CHECK(y.extent(2) == 4);

  // Centre output of an all-ones 3x3 kernel on an interior pixel sums the
  // whole neighbourhood.
  const Tensor ones_k({3, 3, 1, 1}, std::vector<double>(9, 1.0));
  const Tensor plane({3, 3, 1},
                     {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0});
  const Tensor c = conv2d(plane, ones_k, Padding::kSame);
  CHECK(c(1, 1, 0) == 45.0);
  CHECK(c(0, 0, 0) == 1.0 + 2.0 + 4.0 + 5.0);
}

TEST_CASE("conv2d rejects oversized kernels") {
  const Tensor x({2, 2, 1});
  const Tensor k({3, 3, 1, 1});
  CHECK_THROWS_AS(conv2d(x, k, Padding::kValid), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor({2, 2, 2}), Tensor({1, 1, 1, 1}),
                         Padding::kValid),
                  ShapeError);
}

TEST_CASE("all_finite flags bad values") {
  Tensor t({2}, {1.0, 2.0});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK(!t.all_finite());
}
