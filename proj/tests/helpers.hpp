#pragma once

#include <initializer_list>
#include <json.hpp>
#include <string>

#include "oulab/config.hpp"
#include "oulab/geometry.hpp"

namespace testutil {

inline oulab::AVec vec(std::initializer_list<double> xs) {
  oulab::AVec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline oulab::ProblemSpec problem(const std::string& json_text) {
  return oulab::parse_problem(nlohmann::json::parse(json_text), "<test>").problem;
}

inline oulab::ProblemSpec config(const std::string& name) {
  return oulab::load_problem(std::string(OULAB_CONFIG_DIR) + "/" + name + ".json").problem;
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace testutil
