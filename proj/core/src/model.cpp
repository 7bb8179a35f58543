#include "hrm/model.hpp"

namespace hrm {

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kInput: return "input";
    case ParamGroup::kLow: return "low";
    case ParamGroup::kHigh: return "high";
    case ParamGroup::kOutput: return "output";
    case ParamGroup::kQHead: return "q_head";
  }
  return "unknown";
}

template struct Parameters<float>;
template struct Parameters<double>;

}  // namespace hrm
