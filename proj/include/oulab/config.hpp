#pragma once

#include <json.hpp>
#include <string>

#include "oulab/fields.hpp"

namespace oulab {

struct ProblemConfig {
  ProblemSpec problem;
  int samples = 256;  // assumption sample count
  std::string path;
};

/// Builds a problem from a parsed config document.  Every failure is reported
/// as a ConfigError naming `path` and the offending field.
ProblemConfig parse_problem(const nlohmann::json& doc, const std::string& path);
ProblemConfig load_problem(const std::string& path);

}  // namespace oulab
