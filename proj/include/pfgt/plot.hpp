#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pfgt/evaluation.hpp"

namespace pfgt {

struct TracePlotOptions {
  int width = 960;
  int height = 440;
  int window = 5;  // moving-average window over batches
};

// Renders a sequential-inference trace as a self-contained SVG line chart:
// one line per group, shaded bands from each removal event to the end of the
// stream, batch index on x and accuracy (percent) on y.
void render_trace_svg(const std::vector<TraceRow>& rows,
                      const std::vector<std::pair<int, std::string>>& events,
                      const std::string& path, const TracePlotOptions& options = {});

}  // namespace pfgt
