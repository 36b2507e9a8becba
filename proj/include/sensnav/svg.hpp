#pragma once

#include <string>
#include <vector>

#include "sensnav/envgen.hpp"

namespace sensnav {

/// Top-down drawing: obstacles black, sensors blue squares, robot start red
/// square, target green square, expert path red, executed path orange.
/// Output depends only on the inputs.
std::string render_svg(const EnvironmentMap& m, const std::vector<Vec2>& expert_path = {},
                       const std::vector<Vec2>& executed_path = {});

}  // namespace sensnav
