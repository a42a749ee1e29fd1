#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tinydet/errors.hpp"
#include "tinydet/eval.hpp"
#include "tinydet/harness.hpp"

// Plain-text emission for the CLI: CSV tables with a one-line comment
// header carrying the run parameters, and a small self-contained SVG
// chart. Files are written to a temporary sibling and renamed so readers
// never observe a half-written table.

namespace tinydet {

// Shortest decimal form that parses back to the same double, so CSV
// consumers can reproduce values bit for bit.
inline std::string format_double(double v) {
    char buf[64];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw config_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.flush())
            throw config_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// key=value pairs for the leading comment row, in insertion order
struct CsvMeta {
    std::vector<std::pair<std::string, std::string>> entries;

    CsvMeta& add(const std::string& key, const std::string& value) {
        entries.emplace_back(key, value);
        return *this;
    }
    CsvMeta& add(const std::string& key, double value) {
        return add(key, format_double(value));
    }
    CsvMeta& add(const std::string& key, uint64_t value) {
        return add(key, std::to_string(value));
    }

    std::string line() const {
        std::string s = "#";
        for (const auto& [k, v] : entries)
            s += " " + k + "=" + v;
        s += "\n";
        return s;
    }
};

inline const char* bucket_label(int bucket_index) {
    switch (bucket_index) {
        case 0: return "very_tiny";
        case 1: return "tiny";
        case 2: return "small";
        case 3: return "medium";
    }
    return "out_of_range";
}

inline std::string decay_curve_csv(std::span<const CurvePoint> rows, const CsvMeta& meta) {
    std::string s = meta.line();
    s += "side,shift,iou,loss\n";
    for (const auto& p : rows) {
        s += format_double(p.side) + "," + format_double(p.shift) + "," +
             format_double(p.iou) + "," + format_double(p.loss) + "\n";
    }
    return s;
}

// One row per beta; empty cells for buckets the scene did not populate.
inline std::string sweep_csv(std::span<const SweepRow> rows, const CsvMeta& meta) {
    std::string s = meta.line();
    s += "beta,mean_iou,mean_iou_vt,mean_iou_t,mean_iou_s,mean_iou_m\n";
    for (const auto& row : rows) {
        s += format_double(row.beta) + "," + format_double(row.mean_iou);
        for (int b = 0; b < 4; ++b) {
            auto it = row.bucket_mean_iou.find(b);
            s += ",";
            if (it != row.bucket_mean_iou.end()) s += format_double(it->second);
        }
        s += "\n";
    }
    return s;
}

inline std::string share_report_csv(const LossShareReport& report, const CsvMeta& meta) {
    std::string s = meta.line();
    s += "tercile,count,area_min,area_max,share_plain,share_sfl,grad_norm_plain,grad_norm_sfl\n";
    int t = 0;
    for (const auto& stat : report.terciles) {
        s += std::to_string(t++) + "," + std::to_string(stat.count) + "," +
             format_double(stat.area_min) + "," + format_double(stat.area_max) + "," +
             format_double(stat.share_plain) + "," + format_double(stat.share_sfl) + "," +
             format_double(stat.grad_norm_plain) + "," + format_double(stat.grad_norm_sfl) + "\n";
    }
    return s;
}

inline std::string trace_csv(const RegressionTrace& trace, const CsvMeta& meta) {
    std::string s = meta.line();
    s += "step,object,share,grad_norm,iou\n";
    for (size_t step = 0; step < trace.steps.size(); ++step) {
        const StepRecord& rec = trace.steps[step];
        for (size_t i = 0; i < rec.share.size(); ++i) {
            s += std::to_string(step) + "," + std::to_string(i) + "," +
                 format_double(rec.share[i]) + "," + format_double(rec.grad_norm[i]) + "," +
                 format_double(rec.iou[i]) + "\n";
        }
    }
    return s;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find(',') == std::string::npos && s.find('"') == std::string::npos &&
        s.find('\n') == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// One row per metric; absent metrics keep the row with an empty value.
inline std::string eval_report_csv(const EvalReport& report,
                                   const std::map<int64_t, std::string>& category_names,
                                   const CsvMeta& meta) {
    auto cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("");
    };
    std::string s = meta.line();
    s += "metric,value\n";
    s += "ap," + cell(report.ap) + "\n";
    s += "ap50," + cell(report.ap50) + "\n";
    s += "ap75," + cell(report.ap75) + "\n";
    s += "ap_vt," + cell(report.ap_vt) + "\n";
    s += "ap_t," + cell(report.ap_t) + "\n";
    s += "ap_s," + cell(report.ap_s) + "\n";
    s += "ap_m," + cell(report.ap_m) + "\n";
    for (const auto& [id, ap] : report.per_category) {
        auto it = category_names.find(id);
        const std::string name =
            it != category_names.end() ? it->second : std::to_string(id);
        s += csv_escape("cat:" + name) + "," + format_double(ap) + "\n";
    }
    return s;
}

// One polyline per curve over a shared x axis. Deliberately minimal:
// axes, labels, and nothing interactive.
struct SvgCurve {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

inline std::string svg_chart(std::span<const SvgCurve> curves, const std::string& x_label,
                             const std::string& y_label) {
    const double width = 640.0, height = 420.0;
    const double ml = 60.0, mr = 20.0, mt = 20.0, mb = 50.0;
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const auto& c : curves) {
        for (size_t i = 0; i < c.xs.size(); ++i) {
            if (first) {
                x_min = x_max = c.xs[i];
                y_min = y_max = c.ys[i];
                first = false;
            }
            x_min = std::min(x_min, c.xs[i]);
            x_max = std::max(x_max, c.xs[i]);
            y_min = std::min(y_min, c.ys[i]);
            y_max = std::max(y_max, c.ys[i]);
        }
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    if (y_max == y_min) y_max = y_min + 1.0;
    auto px = [&](double x) {
        return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr);
    };
    auto py = [&](double y) {
        return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
         "viewBox=\"0 0 640 420\">\n";
    s += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    s += "<line x1=\"" + format_double(ml) + "\" y1=\"" + format_double(height - mb) +
         "\" x2=\"" + format_double(width - mr) + "\" y2=\"" + format_double(height - mb) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + format_double(ml) + "\" y1=\"" + format_double(mt) + "\" x2=\"" +
         format_double(ml) + "\" y2=\"" + format_double(height - mb) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + format_double((ml + width - mr) / 2) + "\" y=\"" +
         format_double(height - 12.0) + "\" text-anchor=\"middle\" font-size=\"14\">" +
         x_label + "</text>\n";
    s += "<text x=\"16\" y=\"" + format_double((mt + height - mb) / 2) +
         "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 " +
         format_double((mt + height - mb) / 2) + ")\">" + y_label + "</text>\n";
    for (const char* extreme : {"min", "max"}) {
        const bool lo = extreme[1] == 'i';
        s += "<text x=\"" + format_double(lo ? px(x_min) : px(x_max)) + "\" y=\"" +
             format_double(height - mb + 18.0) + "\" text-anchor=\"middle\" font-size=\"12\">" +
             format_double(lo ? x_min : x_max) + "</text>\n";
        s += "<text x=\"" + format_double(ml - 6.0) + "\" y=\"" +
             format_double((lo ? py(y_min) : py(y_max)) + 4.0) +
             "\" text-anchor=\"end\" font-size=\"12\">" + format_double(lo ? y_min : y_max) +
             "</text>\n";
    }
    size_t ci = 0;
    double legend_y = mt + 14.0;
    for (const auto& c : curves) {
        const char* color = palette[ci % (sizeof(palette) / sizeof(palette[0]))];
        std::string pts;
        for (size_t i = 0; i < c.xs.size(); ++i) {
            if (i) pts += " ";
            pts += format_double(px(c.xs[i])) + "," + format_double(py(c.ys[i]));
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        s += "<text x=\"" + format_double(width - mr - 6.0) + "\" y=\"" +
             format_double(legend_y) + "\" text-anchor=\"end\" font-size=\"12\" fill=\"" +
             color + "\">" + c.label + "</text>\n";
        legend_y += 16.0;
        ++ci;
    }
    s += "</svg>\n";
    return s;
}

} // namespace tinydet
