#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace hsharp::stats {

// Population moments accumulated in double, in index order.

template <class T>
double mean(std::span<const T> x) {
  double s = 0.0;
  for (const auto v : x) s += static_cast<double>(v);
  return s / static_cast<double>(x.size());
}

template <class A, class B>
double covariance(std::span<const A> a, std::span<const B> b) {
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += (static_cast<double>(a[i]) - ma) * (static_cast<double>(b[i]) - mb);
  return s / static_cast<double>(a.size());
}

template <class T>
double variance(std::span<const T> x) {
  return covariance(x, x);
}

template <class T>
double stddev(std::span<const T> x) {
  return std::sqrt(variance(x));
}

/// True when a variance is zero relative to the squared mean scale.
inline bool negligible_variance(double var, double mean) {
  return !(var > 1e-24 * std::max(1.0, mean * mean));
}

}  // namespace hsharp::stats
