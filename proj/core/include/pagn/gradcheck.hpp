#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pagn/tensor.hpp"

namespace pagn::gradcheck {

struct OpReport {
  std::string op;
  int cases = 0;
  std::int64_t elements = 0;
  double max_rel_err = 0.0;
};

struct Report {
  std::vector<OpReport> ops;
  double tolerance = 1e-4;
  bool pass = false;
  double seconds = 0.0;
};

/// Central finite differences (64-bit, h=1e-5) against the tape backward for
/// every differentiable operation and for each composed loss. The oracle
/// evaluates the forward path only, so it stays independent of the backward
/// implementation it is checking. Relative error uses
/// |ga-gf| / max(|ga|,|gf|,1e-8).
Report run_all(std::uint64_t seed = 7, int cases_per_op = 20, double tol = 1e-4);

void print(const Report& r, std::ostream& os);

}  // namespace pagn::gradcheck
