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

#include "metaug/bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "metaug/random.hpp"

namespace metaug {

bool BankSample::empty() const {
  return std::all_of(slots.begin(), slots.end(), [](const Tensor& t) { return t.rows() == 0; });
}

std::size_t BankSample::min_picks() const {
  std::size_t best = 0;
  bool first = true;
  for (const auto& view : picks)
    for (const auto& q : view) {
      best = first ? q.size() : std::min(best, q.size());
      first = false;
    }
  return best;
}

MemoryBank::MemoryBank(std::size_t m_views, std::size_t capacity, std::size_t feature_dim)
    : views_(m_views), capacity_(capacity), feature_dim_(feature_dim) {
  for (auto& v : views_) {
    v.data.assign(capacity * feature_dim, 0.0);
    v.ids.assign(capacity, -1);
  }
}

std::size_t MemoryBank::slot(std::size_t age) const {
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  return (oldest + age) % capacity_;
}

void MemoryBank::push(const std::vector<Tensor>& features, const std::vector<std::int64_t>& ids) {
  if (capacity_ == 0) return;
  if (features.size() != views_.size()) {
    throw ShapeError("bank push: expected " + std::to_string(views_.size()) + " views");
  }
  for (const auto& f : features) {
    if (f.cols() != feature_dim_ || f.rows() != ids.size()) {
      throw ShapeError("bank push: features " + to_string(f.shape()) + " for " +
                       std::to_string(ids.size()) + " ids of dim " + std::to_string(feature_dim_));
    }
  }
  for (std::size_t r = 0; r < ids.size(); ++r) {
    for (std::size_t j = 0; j < views_.size(); ++j) {
      const auto row = features[j].row_view(r);
      const double norm = l2_norm(row);
      double* dst = views_[j].data.data() + cursor_ * feature_dim_;
      for (std::size_t c = 0; c < feature_dim_; ++c) dst[c] = norm > 0.0 ? row[c] / norm : 0.0;
      views_[j].ids[cursor_] = ids[r];
    }
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

Tensor MemoryBank::features(std::size_t view) const {
  Tensor out(size_, feature_dim_);
  const auto& ring = views_.at(view);
  for (std::size_t a = 0; a < size_; ++a) {
    std::copy_n(ring.data.begin() + static_cast<std::ptrdiff_t>(slot(a) * feature_dim_),
                feature_dim_, out.row_view(a).begin());
  }
  return out;
}

std::vector<std::int64_t> MemoryBank::ids(std::size_t view) const {
  std::vector<std::int64_t> out(size_);
  for (std::size_t a = 0; a < size_; ++a) out[a] = views_.at(view).ids[slot(a)];
  return out;
}

BankSample MemoryBank::retrieve(const std::vector<std::int64_t>& query_ids, std::size_t k,
                                std::uint64_t seed) const {
  BankSample out;
  const std::size_t m = views_.size();
  out.source_view.resize(m);
  out.slots.resize(m);
  out.slot_ids.resize(m);
  out.picks.assign(m, std::vector<std::vector<std::size_t>>(query_ids.size()));
  if (m == 0) return out;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t src = (j + 1) % m;
    out.source_view[j] = src;
    out.slots[j] = features(src);
    out.slot_ids[j] = ids(src);
  }
  if (size_ == 0 || k == 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> pool(size_);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& sid = out.slot_ids[j];
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t q = 0; q < query_ids.size(); ++q) {
      auto& picked = out.picks[j][q];
      // Partial Fisher-Yates; the pool stays a permutation between queries.
      for (std::size_t i = 0; i < size_ && picked.size() < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, size_ - 1);
        std::swap(pool[i], pool[pick(rng)]);
        if (sid[pool[i]] != query_ids[q]) picked.push_back(pool[i]);
      }
    }
  }
  return out;
}

}  // namespace metaug
