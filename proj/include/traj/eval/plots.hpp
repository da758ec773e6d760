#pragma once

#include <string>
#include <vector>

#include "traj/eval/analysis.hpp"
#include "traj/num/tensor.hpp"

namespace traj::eval {

// Plain SVG documents; numbers are printed with fixed precision so output is
// byte-stable.

std::string heatmap_csv(const DistanceMatrix& m);
std::string heatmap_svg(const DistanceMatrix& m, const std::string& title);

// points is n x 2; one color per distinct label.
std::string scatter_svg(const num::Tensor& points, const std::vector<int>& labels, const std::string& title);

// Columns: delta,rollout,t,x,y
std::string perturb_traces_csv(const std::vector<PerturbRecord>& records);
std::string perturb_traces_svg(const std::vector<PerturbRecord>& records, const std::string& title);

}  // namespace traj::eval
