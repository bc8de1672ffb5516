#pragma once

namespace clv {

/// Library version string, "major.minor.patch".
const char* version();

}  // namespace clv
