#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace mewls {

/// Shannon entropy -sum w log w of a weight vector, with 0 log 0 = 0.
inline double entropy(const Eigen::VectorXd& w) {
    double h = 0.0;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        if (w[k] > 0.0) h -= w[k] * std::log(w[k]);
    }
    return h;
}

}  // namespace mewls
