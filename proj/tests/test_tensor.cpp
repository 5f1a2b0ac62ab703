// Copyright 2026 The metaug Authors.
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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "metaug/tensor.hpp"

namespace metaug {
namespace {

TEST(Tensor, ShapeAndIndexingAreRowMajor) {
  Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  EXPECT_EQ(t(1, 0), 4.0);
  EXPECT_EQ(t[5], 6.0);
  EXPECT_EQ(t.row_view(1)[2], 6.0);
}

TEST(Tensor, ItemRequiresScalar) {
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW((void)Tensor(2, 1).item(), ShapeError);
}

TEST(Tensor, RaggedRowsRejected) {
  EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST(Tensor, MatmulMatchesHandComputation) {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor b = Tensor::from_rows({{5}, {6}});
  Tensor c = matmul(a, b);
  EXPECT_EQ(c, Tensor::from_rows({{17}, {39}}));
  EXPECT_THROW(matmul(b, b), ShapeError);
}

TEST(Tensor, TransposeTwiceIsIdentity) {
  Tensor a = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(a.transposed().shape(), (Shape{3, 2}));
  EXPECT_EQ(a.transposed().transposed(), a);
}

TEST(Tensor, StackingAndRowSubsets) {
  std::vector<Tensor> rows = {Tensor::row({1, 2}), Tensor::row({3, 4})};
  Tensor v = vstack(rows);
  EXPECT_EQ(v, Tensor::from_rows({{1, 2}, {3, 4}}));
  std::vector<Tensor> cols = {v, v};
  EXPECT_EQ(hstack(cols), Tensor::from_rows({{1, 2, 1, 2}, {3, 4, 3, 4}}));
  const std::vector<std::size_t> idx = {1, 1, 0};
  EXPECT_EQ(v.rows_subset(idx), Tensor::from_rows({{3, 4}, {3, 4}, {1, 2}}));
  const std::vector<std::size_t> bad = {2};
  EXPECT_THROW(v.rows_subset(bad), std::out_of_range);
  std::vector<Tensor> mismatched = {Tensor::row({1}), Tensor::row({1, 2})};
  EXPECT_THROW(vstack(mismatched), ShapeError);
}

TEST(Tensor, RelativeErrorUsesFloor) {
  Tensor a = Tensor::row({1e-9});
  Tensor b = Tensor::row({0.0});
  EXPECT_NEAR(relative_error(a, b), 1e-3, 1e-12);
  EXPECT_DOUBLE_EQ(relative_error(Tensor::row({3, 4}), Tensor::row({3, 4})), 0.0);
  EXPECT_THROW(relative_error(Tensor::row({1}), Tensor::row({1, 2})), ShapeError);
}

TEST(Tensor, FinitenessCheck) {
  EXPECT_TRUE(all_finite(Tensor::row({1, 2})));
  EXPECT_FALSE(all_finite(Tensor::row({1, std::nan("")})));
  EXPECT_FALSE(all_finite(Tensor::row({INFINITY})));
}

}  // namespace
}  // namespace metaug
