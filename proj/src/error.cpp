#include "gradleak/error.hpp"

namespace gradleak {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kOverflow: return "overflow";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kCollapsed: return "collapsed";
  }
  return "error";
}

}  // namespace gradleak
