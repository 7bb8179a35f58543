#include "hrm/dynamics.hpp"

namespace hrm {

template struct Model<float>;
template struct Model<double>;
template SegmentResult<float> segment_forward(const Model<float>&, const CarryState<float>&,
                                              std::span<const int>, bool, bool);
template SegmentResult<double> segment_forward(const Model<double>&, const CarryState<double>&,
                                               std::span<const int>, bool, bool);

}  // namespace hrm
