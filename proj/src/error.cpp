#include "regimes/error.hpp"

namespace regimes {

void throw_usage(const std::string& what) { throw Error(ErrorKind::usage, what); }
void throw_data(const std::string& what) { throw Error(ErrorKind::data, what); }
void throw_numerical(const std::string& what) {
  throw Error(ErrorKind::numerical, what);
}

}  // namespace regimes
