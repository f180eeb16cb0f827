#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "excursion/trajectory.hpp"

namespace testing {

inline std::string config_path(const std::string& name) { return std::string(EXCURSION_CONFIG_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Path with every I* = I = 1 and the given treatments; Y_T = final_y.
inline excursion::Trajectory path_with(std::vector<int> treatments, int final_y = 0) {
  excursion::Trajectory p(static_cast<int>(treatments.size()) - 1);
  p.treatments = std::move(treatments);
  for (std::size_t t = 0; t < p.treatments.size(); ++t) p.availability[t] = p.eligibility[t] = 1;
  p.outcomes.back() = final_y;
  return p;
}

inline double binomial_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace testing
