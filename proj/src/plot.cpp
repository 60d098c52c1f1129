#include "pfgt/plot.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pfgt {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::vector<double> moving_average(const std::vector<double>& v, int window) {
  if (window <= 1) return v;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = (i + 1 >= static_cast<std::size_t>(window)) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += v[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

}  // namespace

void render_trace_svg(const std::vector<TraceRow>& rows,
                      const std::vector<std::pair<int, std::string>>& events,
                      const std::string& path, const TracePlotOptions& options) {
  if (rows.empty()) throw std::invalid_argument("render_trace_svg: empty trace");

  std::map<std::string, std::map<int, double>> by_group;
  int max_batch = 0;
  for (const auto& r : rows) {
    by_group[r.group][r.batch] = r.accuracy;
    max_batch = std::max(max_batch, r.batch);
  }

  const double ml = 56, mr = 16, mt = 28, mb = 44;
  const double pw = options.width - ml - mr;
  const double ph = options.height - mt - mb;
  auto x_of = [&](double batch) { return ml + pw * (max_batch > 0 ? batch / max_batch : 0.5); };
  auto y_of = [&](double acc) { return mt + ph * (1.0 - acc / 100.0); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << ' ' << options.height
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Removal phases: violet band from each event to the end of the stream.
  for (const auto& [batch, label] : events) {
    svg << "<rect x=\"" << x_of(batch) << "\" y=\"" << mt << "\" width=\""
        << (x_of(max_batch) - x_of(batch)) << "\" height=\"" << ph
        << "\" fill=\"#8a2be2\" opacity=\"0.10\"/>\n";
    svg << "<line x1=\"" << x_of(batch) << "\" y1=\"" << mt << "\" x2=\"" << x_of(batch)
        << "\" y2=\"" << (mt + ph) << "\" stroke=\"#8a2be2\" stroke-dasharray=\"4 3\"/>\n";
    svg << "<text x=\"" << (x_of(batch) + 4) << "\" y=\"" << (mt + ph + 16)
        << "\" font-size=\"11\" fill=\"#8a2be2\" font-family=\"sans-serif\">" << label
        << "</text>\n";
  }

  // Axes and gridlines.
  for (int acc = 0; acc <= 100; acc += 25) {
    svg << "<line x1=\"" << ml << "\" y1=\"" << y_of(acc) << "\" x2=\"" << (ml + pw) << "\" y2=\""
        << y_of(acc) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << (ml - 8) << "\" y=\"" << (y_of(acc) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" << acc
        << "</text>\n";
  }
  svg << "<text x=\"" << (ml + pw / 2) << "\" y=\"" << (options.height - 8)
      << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">batch</text>\n";
  svg << "<text x=\"14\" y=\"" << (mt + ph / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 14 "
      << (mt + ph / 2) << ")\">accuracy (%)</text>\n";

  int color = 0;
  double legend_x = ml + 8;
  for (const auto& [group, points] : by_group) {
    std::vector<double> accs;
    std::vector<int> batches;
    for (const auto& [batch, acc] : points) {
      batches.push_back(batch);
      accs.push_back(acc);
    }
    const auto smooth = moving_average(accs, options.window);
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 8]
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < smooth.size(); ++i) {
      svg << x_of(batches[i]) << ',' << y_of(smooth[i]) << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << legend_x << "\" y=\"" << (mt - 10) << "\" font-size=\"12\" fill=\""
        << kPalette[color % 8] << "\" font-family=\"sans-serif\">" << group << "</text>\n";
    legend_x += 16.0 + 7.0 * static_cast<double>(group.size());
    ++color;
  }
  svg << "</svg>\n";

  std::ofstream os(path);
  if (!os) throw std::runtime_error("render_trace_svg: cannot open " + path + " for writing");
  os << svg.str();
}

}  // namespace pfgt
