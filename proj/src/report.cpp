#include <cstdio>
#include <filesystem>
#include <fstream>

#include "enav/eval.hpp"

namespace enav {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Minimal deterministic SVG line/bar plots; the raw numbers ride along in a
// <desc> block so every figure is auditable from the file alone.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string desc_table)
      : title_(std::move(title)), desc_(std::move(desc_table)) {}

  void add_series(const std::string& name, std::vector<std::pair<double, double>> pts) {
    series_.push_back({name, std::move(pts)});
  }
  void add_bars(const std::string& name, std::vector<std::pair<std::string, double>> bars) {
    bars_.push_back({name, std::move(bars)});
  }

  std::string render() const {
    constexpr int W = 640, H = 400, ML = 60, MR = 20, MT = 40, MB = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series_) {
      for (const auto& [x, y] : s.points) {
        if (first) {
          xmin = xmax = x;
          ymin = ymax = y;
          first = false;
        }
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
    for (const auto& b : bars_) {
      for (const auto& [_, v] : b.bars) {
        if (first) {
          ymin = std::min(0.0, v);
          ymax = v;
          first = false;
        }
        ymin = std::min(ymin, std::min(0.0, v));
        ymax = std::max(ymax, v);
      }
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    auto px = [&](double x) {
      return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
    };
    auto py = [&](double y) {
      return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);
    };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
           "\" height=\"" + std::to_string(H) + "\">\n";
    out += "<desc>\n" + desc_ + "</desc>\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + std::to_string(W / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" + title_ + "</text>\n";
    out += "<line x1=\"" + std::to_string(ML) + "\" y1=\"" + std::to_string(H - MB) +
           "\" x2=\"" + std::to_string(W - MR) + "\" y2=\"" + std::to_string(H - MB) +
           "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + std::to_string(ML) + "\" y1=\"" + std::to_string(MT) +
           "\" x2=\"" + std::to_string(ML) + "\" y2=\"" + std::to_string(H - MB) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + std::to_string(ML - 6) + "\" y=\"" + std::to_string(H - MB + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           fmt(ymin) + "</text>\n";
    out += "<text x=\"" + std::to_string(ML - 6) + "\" y=\"" + std::to_string(MT + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           fmt(ymax) + "</text>\n";

    int ci = 0;
    for (const auto& s : series_) {
      std::string pts;
      for (const auto& [x, y] : s.points) {
        pts += fmt(px(x)) + "," + fmt(py(y)) + " ";
      }
      out += "<polyline fill=\"none\" stroke=\"" + std::string(kColors[ci % 6]) +
             "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
      for (const auto& [x, y] : s.points) {
        out += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) +
               "\" r=\"3\" fill=\"" + std::string(kColors[ci % 6]) + "\"/>\n";
      }
      out += "<text x=\"" + std::to_string(W - MR) + "\" y=\"" +
             std::to_string(MT + 16 * (ci + 1)) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" +
             kColors[ci % 6] + "\">" + s.name + "</text>\n";
      ++ci;
    }

    for (const auto& group : bars_) {
      const size_t n = group.bars.size();
      if (n == 0) continue;
      const double bw = static_cast<double>(W - ML - MR) / static_cast<double>(n);
      size_t i = 0;
      for (const auto& [label, v] : group.bars) {
        const double x0 = ML + static_cast<double>(i) * bw + bw * 0.15;
        const double y0 = py(v);
        out += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" +
               fmt(bw * 0.7) + "\" height=\"" + fmt(py(std::max(0.0, ymin)) - y0) +
               "\" fill=\"" + std::string(kColors[ci % 6]) + "\"/>\n";
        out += "<text x=\"" + fmt(x0 + bw * 0.35) + "\" y=\"" + std::to_string(H - MB + 16) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               label + "</text>\n";
        ++i;
      }
      ++ci;
    }
    out += "</svg>\n";
    return out;
  }

 private:
  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
  };
  struct BarGroup {
    std::string name;
    std::vector<std::pair<std::string, double>> bars;
  };
  std::string title_, desc_;
  std::vector<Series> series_;
  std::vector<BarGroup> bars_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit_report: cannot open " + path);
  f.write(content.data(), static_cast<long>(content.size()));
}

}  // namespace

void emit_report(const ReportInputs& inputs, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::filesystem::create_directories(out_dir + "/plots", ec);
  if (!std::filesystem::is_directory(out_dir)) {
    throw std::runtime_error("emit_report: cannot create " + out_dir);
  }

  std::string csv =
      "strategy,sr,sel,tokens_per_episode,tokens_per_step,thinking_ratio,episodes\n";
  for (const auto& row : inputs.strategies) {
    csv += row.name + "," + fmt(row.sr) + "," + fmt(row.sel_score) + "," +
           fmt(row.tokens_per_episode) + "," + fmt(row.tokens_per_step) + "," +
           fmt(row.thinking_ratio) + "," + std::to_string(row.episodes) + "\n";
  }
  write_file(out_dir + "/strategies.csv", csv);

  std::string records;
  for (const auto& r : inputs.records) records += episode_record_json(r) + "\n";
  write_file(out_dir + "/records.jsonl", records);

  if (inputs.histogram) {
    std::string table = "bin_low,count\n";
    std::vector<std::pair<double, double>> pts;
    for (int b = 0; b < 20; ++b) {
      const double lo = b / 20.0;
      table += fmt(lo) + "," + std::to_string(inputs.histogram->bins[static_cast<size_t>(b)]) + "\n";
      pts.emplace_back(lo, static_cast<double>(inputs.histogram->bins[static_cast<size_t>(b)]));
    }
    SvgPlot plot("Action entropy distribution", table);
    plot.add_series("count", pts);
    write_file(out_dir + "/plots/entropy_histogram.svg", plot.render());
  }

  if (inputs.sweep) {
    std::string table = "tau,mean_q,tokens_per_step,episodes\n";
    std::vector<std::pair<double, double>> q_pts, t_pts;
    for (size_t i = 0; i < inputs.sweep->thresholds.size(); ++i) {
      table += fmt(inputs.sweep->thresholds[i]) + "," + fmt(inputs.sweep->mean_q[i]) +
               "," + fmt(inputs.sweep->mean_tokens_per_step[i]) + "," +
               std::to_string(inputs.sweep->episode_counts[i]) + "\n";
      q_pts.emplace_back(inputs.sweep->thresholds[i], inputs.sweep->mean_q[i]);
      t_pts.emplace_back(inputs.sweep->thresholds[i],
                         inputs.sweep->mean_tokens_per_step[i]);
    }
    SvgPlot plot("Mean Q vs entropy threshold", table);
    plot.add_series("mean Q", q_pts);
    plot.add_series("tokens/step", t_pts);
    write_file(out_dir + "/plots/qvalue_sweep.svg", plot.render());
  }

  if (!inputs.pass_counts.empty() && !inputs.pass_ks.empty()) {
    const auto curve = pass_at_k(inputs.pass_counts, inputs.pass_ks);
    std::string table = "k,pass_at_k\n";
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < inputs.pass_ks.size(); ++i) {
      table += std::to_string(inputs.pass_ks[i]) + "," + fmt(curve[i]) + "\n";
      pts.emplace_back(inputs.pass_ks[i], curve[i]);
    }
    SvgPlot plot("Pass@k", table);
    plot.add_series("pass@k", pts);
    write_file(out_dir + "/plots/pass_at_k.svg", plot.render());
  }

  if (inputs.has_strata) {
    static const char* kNames[3] = {"easy", "medium", "hard"};
    std::string table = "bucket,count,sr,mean_tr\n";
    std::vector<std::pair<std::string, double>> bars;
    for (int b = 0; b < 3; ++b) {
      const auto& row = inputs.strata[static_cast<size_t>(b)];
      table += std::string(kNames[b]) + "," + std::to_string(row.count) + "," +
               fmt(row.sr) + "," + fmt(row.mean_tr) + "\n";
      bars.emplace_back(kNames[b], row.sr);
    }
    SvgPlot plot("Success rate by difficulty", table);
    plot.add_bars("sr", bars);
    write_file(out_dir + "/plots/difficulty.svg", plot.render());
  }

  if (!inputs.robustness.empty()) {
    std::string table = "p_drop,p_mislabel,sr,sel\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& pt : inputs.robustness) {
      table += fmt(pt.p_drop) + "," + fmt(pt.p_mislabel) + "," + fmt(pt.sr) + "," +
               fmt(pt.sel_score) + "\n";
      pts.emplace_back(pt.p_drop + pt.p_mislabel, pt.sr);
    }
    SvgPlot plot("SR under map corruption", table);
    plot.add_series("sr", pts);
    write_file(out_dir + "/plots/robustness.svg", plot.render());
  }
}

}  // namespace enav
