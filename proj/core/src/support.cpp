#include "reprocs/support.hpp"

#include <algorithm>
#include <iterator>

namespace reprocs {

SupportSet::SupportSet(std::initializer_list<Index> indices)
    : SupportSet(std::vector<Index>(indices)) {}

SupportSet::SupportSet(std::vector<Index> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

SupportSet SupportSet::of(const Vector& v) {
  std::vector<Index> idx;
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) idx.push_back(i);
  }
  SupportSet s;
  s.indices_ = std::move(idx);
  return s;
}

SupportSet SupportSet::range(Index first, Index count) {
  SupportSet s;
  s.indices_.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) s.indices_.push_back(first + i);
  return s;
}

bool SupportSet::contains(Index i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

SupportSet set_intersection(const SupportSet& a, const SupportSet& b) {
  std::vector<Index> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return SupportSet(std::move(out));
}

SupportSet set_difference(const SupportSet& a, const SupportSet& b) {
  std::vector<Index> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return SupportSet(std::move(out));
}

SupportSet set_union(const SupportSet& a, const SupportSet& b) {
  std::vector<Index> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return SupportSet(std::move(out));
}

}  // namespace reprocs
