#pragma once

// Brute-force k-nearest-neighbors classifier on normalized feature vectors.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tasdl/error.hpp"
#include "tasdl/matrix.hpp"
#include "tasdl/parallel.hpp"

namespace tasdl {

class KnnModel {
 public:
  KnnModel(Matrix points, std::vector<int> labels, std::size_t k)
      : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
    if (points_.rows == 0) throw ConfigError("knn_fit: empty training set");
    if (labels_.size() != points_.rows)
      throw ConfigError("knn_fit: " + std::to_string(labels_.size()) + " labels for " +
                        std::to_string(points_.rows) + " points");
    if (k_ == 0) throw ConfigError("knn_fit: k must be >= 1");
    if (k_ > points_.rows)
      throw ConfigError("knn_fit: k=" + std::to_string(k_) + " exceeds training size " +
                        std::to_string(points_.rows));
    for (int l : labels_)
      if (l < 1) throw ConfigError("knn_fit: labels must be >= 1");
    max_label_ = *std::max_element(labels_.begin(), labels_.end());
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return points_.rows; }
  std::size_t width() const noexcept { return points_.cols; }

  /// Majority label among the k nearest points (Euclidean). Distance ties go
  /// to the lower point index, vote ties to the smaller label.
  int predict(std::span<const double> query) const {
    if (query.size() != points_.cols)
      throw ConfigError("knn_predict: query width " + std::to_string(query.size()) +
                        " != model width " + std::to_string(points_.cols));
    // (squared distance, index), kept sorted; lexicographic order is the tie-break.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k_ + 1);
    for (std::size_t i = 0; i < points_.rows; ++i) {
      const double* p = points_.data.data() + i * points_.cols;
      double dist = 0.0;
      for (std::size_t j = 0; j < points_.cols; ++j) {
        const double diff = p[j] - query[j];
        dist += diff * diff;
      }
      if (best.size() == k_ && !(dist < best.back().first)) continue;
      const std::pair<double, std::size_t> item{dist, i};
      best.insert(std::upper_bound(best.begin(), best.end(), item), item);
      if (best.size() > k_) best.pop_back();
    }
    std::vector<std::size_t> votes(static_cast<std::size_t>(max_label_) + 1, 0);
    for (const auto& [dist, idx] : best) ++votes[static_cast<std::size_t>(labels_[idx])];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }

  std::vector<int> predict_batch(const Matrix& queries, unsigned parallelism = 0) const {
    std::vector<int> out(queries.rows);
    parallel_for(queries.rows, parallelism, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) out[i] = predict(queries.row(i));
    });
    return out;
  }

 private:
  Matrix points_;
  std::vector<int> labels_;
  std::size_t k_;
  int max_label_ = 1;
};

inline KnnModel knn_fit(Matrix points, std::vector<int> labels, std::size_t k) {
  return KnnModel(std::move(points), std::move(labels), k);
}

}  // namespace tasdl
