#include "volc/tensor.hpp"

namespace volc {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t checked_element_count(const Shape& shape) {
  if (shape.empty()) fail(ErrorCode::kInvalidShape, "shape must have at least one dimension");
  std::size_t count = 1;
  for (std::size_t d : shape) {
    if (d == 0) fail(ErrorCode::kInvalidShape, "zero dimension in shape " + shape_to_string(shape));
    count *= d;
  }
  return count;
}

void require_shape(const Shape& actual, const Shape& expected, const std::string& what) {
  if (actual != expected) {
    fail(ErrorCode::kShape, what + ": expected " + shape_to_string(expected) + ", got " +
                                shape_to_string(actual));
  }
}

}  // namespace volc
