#include "pagn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace pagn {

std::int64_t shape_numel(const Shape& s) {
  check(!s.empty(), "tensor: empty shape");
  std::int64_t n = 1;
  for (int d : s) {
    check(d > 0, "tensor: non-positive dimension in shape " + shape_str(s));
    n *= d;
    check(n < (std::int64_t(1) << 40), "tensor: shape too large " + shape_str(s));
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

template <typename T>
bool TensorT<T>::all_finite() const {
  for (T v : data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template struct TensorT<float>;
template struct TensorT<double>;

}  // namespace pagn
