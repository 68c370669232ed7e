#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pagn {

/// Precondition or shape-contract violation. Mapped to exit code 1 by the CLI.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem / serialization failure. Mapped to exit code 2 by the CLI.
class IOError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

// splitmix64 finalizer; the project-wide seed derivation primitive.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2)));
}

/// Canonical [0,1) double from a full 64-bit draw.
constexpr double to_unit(std::uint64_t bits) { return double(bits >> 11) * 0x1.0p-53; }

/// Worker-thread cap. Reads PAGN_THREADS once (default 1); results are
/// bitwise independent of the value because every output element keeps a
/// fixed accumulation order.
int worker_threads();
void set_worker_threads(int n);

/// Compensated summation; keeps evaluation means independent of chunking.
struct KahanSum {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

}  // namespace pagn
