#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <random>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "wada/errors.hpp"

namespace wada {

using Vec = std::vector<double>;

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double squared_distance(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

inline double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

/// Neumaier-compensated accumulator. Results depend only on the order of `add` calls.
class CompensatedSum {
public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

/// Axis-aligned hyperrectangle; `project` is the clipping map onto it.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw DimensionMismatch("box bounds have different dimensions");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i])) throw InvalidMeasure("box lower bound exceeds upper bound");
  }

  static Box cube(std::size_t dim, double lo, double hi) { return Box(Vec(dim, lo), Vec(dim, hi)); }

  std::size_t dim() const noexcept { return lower.size(); }

  bool contains(std::span<const double> p) const noexcept {
    if (p.size() != dim()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!(p[i] >= lower[i] && p[i] <= upper[i])) return false;
    return true;
  }

  void project(std::span<double> p) const noexcept {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
  }

  Vec projected(Vec p) const {
    project(p);
    return p;
  }

  bool operator==(const Box&) const = default;
};

// Seed splitting: every random stream is derived as mix(seed, fnv1a(name), index),
// so components draw from independent, reproducible streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(seed ^ fnv1a(name)) + index);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(seed, name, index));
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers using contiguous chunks.
/// Callers write only to slot i, so results never depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  // One slot per chunk; the lowest failing chunk is rethrown, as a serial loop would.
  std::vector<std::exception_ptr> failures(workers);
  auto run_chunk = [&fn, &failures, chunk, n](std::size_t w) {
    try {
      for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run_chunk, w);
    run_chunk(0);
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

inline bool all_finite(std::span<const double> xs) noexcept {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace wada
