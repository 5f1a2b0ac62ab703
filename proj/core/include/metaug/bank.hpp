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

#pragma once

#include <cstdint>
#include <vector>

#include "metaug/tensor.hpp"

namespace metaug {

/// Negatives drawn from the bank for one batch. For query view j the picks
/// index rows of `slots[j]`, which hold the occupied features of view
/// source_view(j).
struct BankSample {
  std::vector<std::size_t> source_view;
  std::vector<Tensor> slots;                               // per query view: R x feat_dim
  std::vector<std::vector<std::int64_t>> slot_ids;         // per query view: R
  std::vector<std::vector<std::vector<std::size_t>>> picks;  // [query view][query row] -> slot rows

  bool empty() const;
  /// Smallest number of picks over all queries (0 when empty).
  std::size_t min_picks() const;
};

/// Per-view FIFO ring buffer of detached unit-norm features.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(std::size_t m_views, std::size_t capacity, std::size_t feature_dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t m_views() const { return views_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t occupancy() const { return size_; }

  /// Appends one row per sample to every view (rows of `features[j]` belong
  /// to `ids`), re-normalizing each row and overwriting the oldest slots.
  void push(const std::vector<Tensor>& features, const std::vector<std::int64_t>& ids);

  /// Features of `view` in slot order (oldest first) and their sample ids.
  Tensor features(std::size_t view) const;
  std::vector<std::int64_t> ids(std::size_t view) const;

  /// For every query row and view: up to `k` distinct slots of the next view
  /// (j + 1 mod M), drawn uniformly from `seed`, never with the query's own id.
  BankSample retrieve(const std::vector<std::int64_t>& query_ids, std::size_t k,
                      std::uint64_t seed) const;

 private:
  struct ViewRing {
    std::vector<double> data;  // capacity x feature_dim
    std::vector<std::int64_t> ids;
  };
  std::size_t slot(std::size_t age) const;  // age 0 is the oldest entry

  std::vector<ViewRing> views_;
  std::size_t capacity_ = 0;
  std::size_t feature_dim_ = 0;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace metaug
