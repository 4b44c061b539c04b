#ifndef EOFLOW_INDEX_SET_HPP
#define EOFLOW_INDEX_SET_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "eoflow/errors.hpp"

namespace eoflow {

// Subset of latent dimensions, 0-based, kept sorted and unique.
class IndexSet {
  public:
    IndexSet() = default;

    explicit IndexSet(std::vector<int64_t> indices) : idx_(std::move(indices)) {
        std::sort(idx_.begin(), idx_.end());
        idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
        if (!idx_.empty() && idx_.front() < 0) {
            throw config_error("IndexSet: negative index " + std::to_string(idx_.front()));
        }
    }

    static IndexSet single(int64_t i) { return IndexSet({i}); }

    // [lo, hi)
    static IndexSet range(int64_t lo, int64_t hi) {
        std::vector<int64_t> v;
        for (int64_t i = lo; i < hi; ++i) v.push_back(i);
        return IndexSet(std::move(v));
    }

    static IndexSet full(int64_t dim) { return range(0, dim); }

    int64_t size() const { return static_cast<int64_t>(idx_.size()); }
    bool empty() const { return idx_.empty(); }
    const std::vector<int64_t>& indices() const { return idx_; }
    int64_t max_index() const { return idx_.empty() ? -1 : idx_.back(); }

    bool contains(int64_t i) const {
        return std::binary_search(idx_.begin(), idx_.end(), i);
    }

    bool disjoint_with(const IndexSet& other) const {
        for (int64_t i : other.idx_) {
            if (contains(i)) return false;
        }
        return true;
    }

    bool contiguous() const {
        if (idx_.size() < 2) return true;
        return idx_.back() - idx_.front() + 1 == static_cast<int64_t>(idx_.size());
    }

    IndexSet complement(int64_t dim) const {
        if (max_index() >= dim) {
            throw config_error("IndexSet: index " + std::to_string(max_index()) +
                               " out of range for D=" + std::to_string(dim));
        }
        std::vector<int64_t> v;
        for (int64_t i = 0; i < dim; ++i) {
            if (!contains(i)) v.push_back(i);
        }
        return IndexSet(std::move(v));
    }

    IndexSet unite(const IndexSet& other) const {
        std::vector<int64_t> v = idx_;
        v.insert(v.end(), other.idx_.begin(), other.idx_.end());
        return IndexSet(std::move(v));
    }

    std::string str() const {
        std::string out = "{";
        for (size_t i = 0; i < idx_.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(idx_[i]);
        }
        return out + "}";
    }

  private:
    std::vector<int64_t> idx_;
};

}  // namespace eoflow

#endif
