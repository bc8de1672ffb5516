#include "clv/runtime.hpp"

#include <Eigen/Core>
#include <opencv2/core.hpp>

namespace clv {
namespace {
bool g_deterministic = false;
}

void set_deterministic(bool on) {
    g_deterministic = on;
    if (on) {
        Eigen::setNbThreads(1);
        cv::setNumThreads(1);
    }
}

bool deterministic() { return g_deterministic; }

}  // namespace clv
