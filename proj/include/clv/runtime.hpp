#pragma once

namespace clv {

/// Deterministic mode pins Eigen and OpenCV to a single thread so that every
/// reduction runs in a fixed order. The library itself is single-threaded and
/// seeded throughout, so results are reproducible either way; the switch keeps
/// them so when the linked math libraries were built with threading.
void set_deterministic(bool on);
bool deterministic();

}  // namespace clv
