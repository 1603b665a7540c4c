#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "reprocs/types.hpp"

namespace reprocs {

// Sorted, duplicate-free set of 0-based coordinate indices.
class SupportSet {
 public:
  SupportSet() = default;
  SupportSet(std::initializer_list<Index> indices);
  explicit SupportSet(std::vector<Index> indices);

  // Nonzero pattern of v.
  static SupportSet of(const Vector& v);
  static SupportSet range(Index first, Index count);

  const std::vector<Index>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(Index i) const;
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  // Largest index + 1, or 0 for the empty set.
  Index bound() const { return indices_.empty() ? 0 : indices_.back() + 1; }

  friend bool operator==(const SupportSet&, const SupportSet&) = default;

 private:
  std::vector<Index> indices_;
};

SupportSet set_intersection(const SupportSet& a, const SupportSet& b);
// a \ b
SupportSet set_difference(const SupportSet& a, const SupportSet& b);
SupportSet set_union(const SupportSet& a, const SupportSet& b);

}  // namespace reprocs
