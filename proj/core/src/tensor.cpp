#include "mnistcnn/tensor.hpp"

#include <cmath>

namespace mcnn {

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
}

}  // namespace mcnn
