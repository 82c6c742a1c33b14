#include "distla/local_matrix.hpp"

namespace distla {

DataType parse_datatype(std::string_view tag) {
  if (tag == "d") return DataType::Double;
  if (tag == "i") return DataType::Integer;
  throw UsageError("unknown datatype tag '" + std::string(tag) + "'");
}

} // namespace distla
