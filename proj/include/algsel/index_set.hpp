#ifndef ALGSEL_INDEX_SET_HPP
#define ALGSEL_INDEX_SET_HPP

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace algsel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sorted set of distinct column indices (a support estimate).
class IndexSet {
 public:
  IndexSet() = default;

  /// Sorts and deduplicates.
  static IndexSet from_unsorted(std::vector<int> idx) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    IndexSet out;
    out.idx_ = std::move(idx);
    return out;
  }

  static IndexSet all(int n) {
    IndexSet out;
    out.idx_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.idx_[static_cast<std::size_t>(i)] = i;
    return out;
  }

  static IndexSet set_union(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    out.idx_.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.idx_));
    return out;
  }

  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  int operator[](std::size_t i) const { return idx_[i]; }
  std::vector<int>::const_iterator begin() const { return idx_.begin(); }
  std::vector<int>::const_iterator end() const { return idx_.end(); }
  const std::vector<int>& indices() const { return idx_; }

  bool contains(int i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

  /// Throws unless every index lies in [0, n).
  void check_bounds(int n) const {
    if (!idx_.empty() && (idx_.front() < 0 || idx_.back() >= n))
      throw std::out_of_range("IndexSet: index outside [0, n)");
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<int> idx_;
};

}  // namespace algsel

#endif  // ALGSEL_INDEX_SET_HPP
