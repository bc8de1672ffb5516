#include "clv/version.hpp"

namespace clv {
const char* version() { return "0.1.0"; }
}  // namespace clv
