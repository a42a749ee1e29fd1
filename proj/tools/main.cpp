// tinydet command-line tool: loss inspection, COCO-style evaluation with
// size buckets, closed-form IoU decay curves, the synthetic rebalancing
// demo, the beta sweep, and a relay attention forward-pass demo.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tinydet/tinydet.hpp"

namespace fs = std::filesystem;

namespace {

std::string strip_spaces(const std::string& s) {
    std::string out;
    for (char c : s)
        if (c != ' ' && c != '\t') out += c;
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_number(const std::string& field, const std::string& context) {
    const std::string t = strip_spaces(field);
    const char* c = t.c_str();
    char* end = nullptr;
    const double v = std::strtod(c, &end);
    if (end == c || *end != '\0' || !std::isfinite(v))
        throw tinydet::parse_error(context + ": bad number '" + field + "'");
    return v;
}

// Pairs file: one comment-or-header line, then rows of
// gt_x,gt_y,gt_w,gt_h,pr_x,pr_y,pr_w,pr_h
std::vector<tinydet::MatchedPair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw tinydet::parse_error(path + ": cannot open");
    static const char* kHeader = "gt_x,gt_y,gt_w,gt_h,pr_x,pr_y,pr_w,pr_h";
    std::vector<tinydet::MatchedPair> pairs;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = strip_spaces(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::string where = path + ": line " + std::to_string(lineno);
        if (!have_header) {
            if (stripped != kHeader)
                throw tinydet::parse_error(where + ": expected header '" + kHeader + "'");
            have_header = true;
            continue;
        }
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 8)
            throw tinydet::parse_error(where + ": expected 8 fields, got " +
                                       std::to_string(fields.size()));
        double v[8];
        for (int i = 0; i < 8; ++i)
            v[i] = parse_number(fields[i], where);
        tinydet::MatchedPair pair;
        pair.gt = {v[0], v[1], v[2], v[3]};
        pair.pred = {v[4], v[5], v[6], v[7]};
        if (!pair.gt.valid() || !pair.pred.valid())
            throw tinydet::parse_error(where + ": box needs positive width and height");
        pairs.push_back(pair);
    }
    if (!have_header)
        throw tinydet::parse_error(path + ": missing header row");
    if (pairs.empty())
        throw tinydet::parse_error(path + ": no data rows");
    return pairs;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    for (const std::string& part : split(s, ',')) {
        if (strip_spaces(part).empty())
            throw tinydet::config_error(flag + ": empty element in '" + s + "'");
        const char* c = part.c_str();
        char* end = nullptr;
        const double v = std::strtod(c, &end);
        if (end == c || *strip_spaces(end ? end : "").c_str() != '\0' || !std::isfinite(v))
            throw tinydet::config_error(flag + ": bad number '" + part + "'");
        out.push_back(v);
    }
    return out;
}

// Either a comma list ("0.5,0.75") or begin:step:end ("0.5:0.05:0.95").
std::vector<double> parse_thresholds(const std::string& spec) {
    if (spec.find(':') != std::string::npos) {
        const std::vector<std::string> parts = split(spec, ':');
        if (parts.size() != 3)
            throw tinydet::config_error("--iou-thresholds: expected begin:step:end");
        const double begin = parse_number(parts[0], "--iou-thresholds");
        const double step = parse_number(parts[1], "--iou-thresholds");
        const double end = parse_number(parts[2], "--iou-thresholds");
        if (step <= 0.0 || end < begin)
            throw tinydet::config_error("--iou-thresholds: need step > 0 and end >= begin");
        const int n = static_cast<int>(std::lround((end - begin) / step));
        std::vector<double> out;
        for (int i = 0; i <= n; ++i)
            out.push_back(begin + i * step);
        return out;
    }
    return parse_double_list(spec, "--iou-thresholds");
}

fs::path resolve_out_dir(const std::string& out_flag, bool out_given) {
    if (out_given) return out_flag;
    if (const char* env = std::getenv("TINYDET_OUT_DIR"); env && *env) return env;
    return ".";
}

bool out_dir_requested(bool out_given) {
    const char* env = std::getenv("TINYDET_OUT_DIR");
    return out_given || (env && *env);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir))
        throw tinydet::config_error("cannot create output directory '" + dir.string() +
                                    "': " + (ec ? ec.message() : "not a directory"));
}

void write_artifact(const fs::path& path, const std::string& content) {
    tinydet::atomic_write(path, content);
    std::printf("wrote %s\n", path.string().c_str());
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? tinydet::format_double(*v) : std::string("n/a");
}

struct SceneFlags {
    double extent = 256.0;
    std::string counts = "4,4,4,4";
    double jitter = 0.25;
    double scale_jitter = 0.0;

    void attach(CLI::App* sub) {
        sub->add_option("--extent", extent, "scene extent in pixels");
        sub->add_option("--counts", counts, "objects per size bucket, vt,t,s,m");
        sub->add_option("--jitter", jitter, "translation jitter as a fraction of the side");
        sub->add_option("--scale-jitter", scale_jitter, "scale jitter fraction");
    }

    tinydet::SceneConfig to_config(uint64_t seed) const {
        tinydet::SceneConfig cfg;
        cfg.extent = extent;
        const std::vector<double> c = parse_double_list(counts, "--counts");
        if (c.size() != 4)
            throw tinydet::config_error("--counts: expected 4 comma-separated values");
        for (int b = 0; b < 4; ++b) {
            if (c[b] < 0.0 || c[b] != std::floor(c[b]))
                throw tinydet::config_error("--counts: entries must be non-negative integers");
            cfg.bucket_counts[b] = static_cast<int>(c[b]);
        }
        cfg.translation_jitter = jitter;
        cfg.scale_jitter = scale_jitter;
        cfg.seed = seed;
        return cfg;
    }
};

int cmd_eval(const std::string& gt_path, const std::string& det_path, int max_dets,
             const std::string& thresholds_spec, const std::string& out, bool out_given) {
    tinydet::EvalConfig cfg;
    cfg.max_dets_per_image = max_dets;
    if (!thresholds_spec.empty())
        cfg.iou_thresholds = parse_thresholds(thresholds_spec);
    tinydet::validate_config(cfg);

    const tinydet::GroundTruthSet gts = tinydet::load_coco_ground_truth(gt_path);
    const std::vector<tinydet::Detection> dets = tinydet::load_coco_detections(det_path);
    const tinydet::EvalReport report = tinydet::evaluate(gts, dets, cfg);

    std::printf("images      %zu\n", gts.image_ids.size());
    std::printf("categories  %zu\n", gts.categories.size());
    std::printf("annotations %zu\n", gts.annotations.size());
    std::printf("detections  %zu\n\n", dets.size());
    std::printf("AP          %s\n", opt_cell(report.ap).c_str());
    std::printf("AP50        %s\n", opt_cell(report.ap50).c_str());
    std::printf("AP75        %s\n", opt_cell(report.ap75).c_str());
    std::printf("AP_vt       %s\n", opt_cell(report.ap_vt).c_str());
    std::printf("AP_t        %s\n", opt_cell(report.ap_t).c_str());
    std::printf("AP_s        %s\n", opt_cell(report.ap_s).c_str());
    std::printf("AP_m        %s\n", opt_cell(report.ap_m).c_str());
    if (!report.per_category.empty()) {
        std::printf("\nper-category AP\n");
        for (const auto& [cat_id, cat_ap] : report.per_category) {
            auto it = gts.categories.find(cat_id);
            const std::string name =
                it != gts.categories.end() ? it->second : std::to_string(cat_id);
            std::printf("  %-16s %s\n", name.c_str(), tinydet::format_double(cat_ap).c_str());
        }
    }

    if (out_dir_requested(out_given)) {
        const fs::path dir = resolve_out_dir(out, out_given);
        ensure_dir(dir);
        tinydet::CsvMeta meta;
        meta.add("tool", "tinydet").add("cmd", "eval");
        meta.add("max_dets", std::to_string(cfg.max_dets_per_image));
        meta.add("thresholds", std::to_string(cfg.iou_thresholds.size()));
        write_artifact(dir / "eval.csv", tinydet::eval_report_csv(report, gts.categories, meta));
    }
    return 0;
}

int cmd_loss(const std::string& pairs_path, double alpha, double beta) {
    tinydet::LossConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    const std::vector<tinydet::MatchedPair> pairs = load_pairs(pairs_path);
    const tinydet::PositionLoss pos = tinydet::position_loss(pairs, cfg);

    std::vector<tinydet::Box> gts;
    gts.reserve(pairs.size());
    for (const auto& p : pairs) gts.push_back(p.gt);
    const std::vector<double> weights = tinydet::sfl_weights(gts, cfg.beta);

    std::printf("pairs  %zu\n", pairs.size());
    std::printf("alpha  %s\n", tinydet::format_double(cfg.alpha).c_str());
    std::printf("beta   %s\n\n", tinydet::format_double(cfg.beta).c_str());
    std::printf("l1     %s\n", tinydet::format_double(pos.l1).c_str());
    std::printf("sfl    %s\n", tinydet::format_double(pos.sfl).c_str());
    std::printf("pos    %s\n\n", tinydet::format_double(pos.pos).c_str());
    for (size_t i = 0; i < pairs.size(); ++i) {
        std::printf("pair %-3zu area %-12s iou %-14s weight %s\n", i,
                    tinydet::format_double(pairs[i].gt.area()).c_str(),
                    tinydet::format_double(tinydet::iou(pairs[i].gt, pairs[i].pred)).c_str(),
                    tinydet::format_double(weights[i]).c_str());
    }
    return 0;
}

int cmd_curves(const std::string& sides_spec, const std::string& shifts_spec,
               const std::string& out, bool out_given) {
    std::vector<double> sides = {4.0, 8.0, 16.0, 32.0, 64.0};
    if (!sides_spec.empty()) sides = parse_double_list(sides_spec, "--sides");
    std::vector<double> shifts;
    if (!shifts_spec.empty()) {
        shifts = parse_double_list(shifts_spec, "--shifts");
    } else {
        for (int i = 0; i <= 40; ++i) shifts.push_back(i * 0.1);
    }
    for (double s : sides)
        if (s <= 0.0) throw tinydet::config_error("--sides: sides must be positive");
    for (double s : shifts)
        if (s < 0.0) throw tinydet::config_error("--shifts: shifts must be non-negative");

    const std::vector<tinydet::CurvePoint> rows = tinydet::iou_decay_curve(sides, shifts);

    const fs::path dir = resolve_out_dir(out, out_given);
    ensure_dir(dir);
    tinydet::CsvMeta meta;
    meta.add("tool", "tinydet").add("cmd", "curves");
    write_artifact(dir / "curves.csv", tinydet::decay_curve_csv(rows, meta));

    std::vector<tinydet::SvgCurve> curves;
    for (double side : sides) {
        tinydet::SvgCurve c;
        c.label = "side " + tinydet::format_double(side);
        for (const auto& p : rows) {
            if (p.side != side) continue;
            c.xs.push_back(p.shift);
            c.ys.push_back(p.iou);
        }
        curves.push_back(std::move(c));
    }
    write_artifact(dir / "curves.svg", tinydet::svg_chart(curves, "shift (px)", "IoU"));
    return 0;
}

int cmd_demo(uint64_t seed, int steps, double lr, double alpha, double beta,
             const SceneFlags& scene_flags, const std::string& out, bool out_given) {
    const tinydet::SceneConfig scfg = scene_flags.to_config(seed);
    const tinydet::Scene scene = tinydet::gen_scene(scfg);
    tinydet::LossConfig lcfg;
    lcfg.alpha = alpha;
    lcfg.beta = beta;

    const tinydet::RegressionTrace plain = tinydet::regress(
        scene.gts, scene.preds, tinydet::LossVariant::plain_iou_sq, lcfg, steps, lr);
    const tinydet::RegressionTrace sfl_trace = tinydet::regress(
        scene.gts, scene.preds, tinydet::LossVariant::sfl, lcfg, steps, lr);
    for (const auto* t : {&plain, &sfl_trace})
        if (t->diverged_at)
            throw tinydet::divergence_error(std::string("demo: ") + tinydet::variant_name(t->variant) +
                                            " run diverged at step " + std::to_string(*t->diverged_at));

    const tinydet::LossShareReport report = tinydet::loss_share_report(plain, sfl_trace);

    std::printf("objects %zu, steps %d, lr %s, beta %s\n\n", scene.gts.size(), steps,
                tinydet::format_double(lr).c_str(), tinydet::format_double(beta).c_str());
    std::printf("initial loss shares by area tercile\n");
    std::printf("%-8s %-6s %-12s %-12s %-12s %-12s\n", "tercile", "count", "share_plain",
                "share_sfl", "gnorm_plain", "gnorm_sfl");
    int t = 0;
    for (const auto& stat : report.terciles) {
        std::printf("%-8d %-6d %-12.6f %-12.6f %-12.6f %-12.6f\n", t++, stat.count,
                    stat.share_plain, stat.share_sfl, stat.grad_norm_plain, stat.grad_norm_sfl);
    }
    std::printf("\nsmallest tercile share: %s\n",
                report.degenerate ? "degenerate scene (equal areas)"
                                  : (report.rebalanced ? "raised by sfl" : "NOT raised by sfl"));

    std::printf("\nfinal mean IoU by bucket\n");
    std::printf("%-10s %-10s %-10s\n", "bucket", "plain", "sfl");
    for (int b = 0; b < 4; ++b) {
        auto p = plain.bucket_mean_iou.find(b);
        auto s = sfl_trace.bucket_mean_iou.find(b);
        if (p == plain.bucket_mean_iou.end() && s == sfl_trace.bucket_mean_iou.end()) continue;
        std::printf("%-10s %-10s %-10s\n", tinydet::bucket_label(b),
                    p != plain.bucket_mean_iou.end() ? tinydet::format_double(p->second).c_str() : "n/a",
                    s != sfl_trace.bucket_mean_iou.end() ? tinydet::format_double(s->second).c_str() : "n/a");
    }

    const fs::path dir = resolve_out_dir(out, out_given);
    ensure_dir(dir);
    tinydet::CsvMeta meta;
    meta.add("tool", "tinydet").add("cmd", "demo").add("seed", seed);
    meta.add("alpha", alpha).add("beta", beta).add("lr", lr);
    meta.add("steps", std::to_string(steps));
    write_artifact(dir / "share_report.csv", tinydet::share_report_csv(report, meta));
    write_artifact(dir / "trace_plain.csv", tinydet::trace_csv(plain, meta));
    write_artifact(dir / "trace_sfl.csv", tinydet::trace_csv(sfl_trace, meta));

    // Mean IoU per step for the smallest and largest populated terciles
    const size_t n = scene.gts.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return scene.gts[a].area() < scene.gts[b].area();
    });
    const size_t t1 = n / 3, t2 = 2 * n / 3;
    const size_t small_hi = t1 > 0 ? t1 : (t2 > 0 ? t2 : n); // first populated tercile
    std::vector<size_t> small_set, large_set;
    for (size_t r = 0; r < small_hi; ++r)
        small_set.push_back(order[r]);
    for (size_t r = t2; r < n; ++r)
        large_set.push_back(order[r]);

    auto mean_iou_curve = [&](const tinydet::RegressionTrace& trace,
                              const std::vector<size_t>& set, const std::string& label) {
        tinydet::SvgCurve c;
        c.label = label;
        for (size_t step = 0; step < trace.steps.size(); ++step) {
            double sum = 0.0;
            for (size_t i : set) sum += trace.steps[step].iou[i];
            c.xs.push_back(static_cast<double>(step));
            c.ys.push_back(sum / static_cast<double>(set.size()));
        }
        return c;
    };
    std::vector<tinydet::SvgCurve> curves;
    if (!small_set.empty()) {
        curves.push_back(mean_iou_curve(plain, small_set, "plain, small tercile"));
        curves.push_back(mean_iou_curve(sfl_trace, small_set, "sfl, small tercile"));
    }
    if (!large_set.empty()) {
        curves.push_back(mean_iou_curve(plain, large_set, "plain, large tercile"));
        curves.push_back(mean_iou_curve(sfl_trace, large_set, "sfl, large tercile"));
    }
    write_artifact(dir / "demo.svg", tinydet::svg_chart(curves, "step", "mean IoU"));
    return 0;
}

int cmd_sweep(uint64_t seed, int steps, double lr, std::vector<double> betas,
              const SceneFlags& scene_flags, const std::string& out, bool out_given) {
    if (betas.empty()) betas = tinydet::default_sweep_betas();
    const tinydet::SceneConfig scfg = scene_flags.to_config(seed);
    const std::vector<tinydet::SweepRow> rows = tinydet::beta_sweep(scfg, betas, steps, lr);
    for (const auto& row : rows)
        if (row.diverged_at)
            throw tinydet::divergence_error("sweep: beta " + tinydet::format_double(row.beta) +
                                            " diverged at step " + std::to_string(*row.diverged_at));

    std::printf("%-12s %-10s %-10s %-10s %-10s %-10s\n", "beta", "mean_iou", "vt", "t", "s", "m");
    for (const auto& row : rows) {
        auto cell = [&](int b) {
            auto it = row.bucket_mean_iou.find(b);
            return it != row.bucket_mean_iou.end() ? tinydet::format_double(it->second)
                                                   : std::string("n/a");
        };
        std::printf("%-12.6f %-10.6f %-10s %-10s %-10s %-10s\n", row.beta, row.mean_iou,
                    cell(0).c_str(), cell(1).c_str(), cell(2).c_str(), cell(3).c_str());
    }

    const fs::path dir = resolve_out_dir(out, out_given);
    ensure_dir(dir);
    tinydet::CsvMeta meta;
    meta.add("tool", "tinydet").add("cmd", "sweep").add("seed", seed);
    meta.add("lr", lr).add("steps", std::to_string(steps));
    write_artifact(dir / "sweep.csv", tinydet::sweep_csv(rows, meta));
    return 0;
}

int cmd_relay(const std::string& shapes_spec, uint64_t seed, int reduction,
              const std::string& out, bool out_given) {
    std::vector<int> channels;
    tinydet::Pyramid pyramid;
    for (const std::string& part : split(shapes_spec, ',')) {
        const std::vector<std::string> dims = split(part, 'x');
        if (dims.size() != 3)
            throw tinydet::config_error("--shapes: expected CxHxW, got '" + part + "'");
        int v[3];
        for (int i = 0; i < 3; ++i) {
            const double d = parse_number(dims[i], "--shapes");
            if (d < 1.0 || d != std::floor(d))
                throw tinydet::config_error("--shapes: dimensions must be positive integers");
            v[i] = static_cast<int>(d);
        }
        tinydet::FeatureMap f;
        f.channels = v[0];
        f.height = v[1];
        f.width = v[2];
        f.data.assign(static_cast<size_t>(v[0]) * v[1] * v[2], 0.0);
        pyramid.levels.push_back(std::move(f));
        channels.push_back(v[0]);
    }
    tinydet::validate_pyramid(pyramid);

    tinydet::SplitRng features = tinydet::SplitRng(seed).split("features");
    for (size_t l = 0; l < pyramid.levels.size(); ++l) {
        tinydet::SplitRng rng = features.split(static_cast<uint64_t>(l));
        for (double& v : pyramid.levels[l].data)
            v = rng.uniform(-1.0, 1.0);
    }

    const tinydet::RelayParams params = tinydet::init_relay_params(channels, reduction, seed);
    const tinydet::Pyramid result = tinydet::relay_forward(pyramid, params);

    struct Stats {
        double lo = 0.0, hi = 0.0, mean = 0.0;
    };
    auto stats_of = [](const std::vector<double>& data) {
        Stats s;
        s.lo = s.hi = data.front();
        double sum = 0.0;
        for (double v : data) {
            s.lo = std::min(s.lo, v);
            s.hi = std::max(s.hi, v);
            sum += v;
        }
        s.mean = sum / static_cast<double>(data.size());
        return s;
    };

    std::string csv;
    tinydet::CsvMeta meta;
    meta.add("tool", "tinydet").add("cmd", "relay-demo").add("seed", seed);
    meta.add("reduction", std::to_string(reduction));
    csv = meta.line();
    csv += "level,channels,height,width,in_min,in_max,in_mean,out_min,out_max,out_mean,"
           "ac_min,ac_max,as_min,as_max\n";

    const size_t top = pyramid.levels.size() - 1;
    for (size_t l = 0; l < pyramid.levels.size(); ++l) {
        const tinydet::FeatureMap& in = pyramid.levels[l];
        const tinydet::FeatureMap& res = result.levels[l];
        const tinydet::FeatureMap& semantic = pyramid.levels[std::min(l + 1, top)];
        const std::vector<double> ac =
            tinydet::channel_attention(semantic, params.levels[l], in.channels);
        const tinydet::FeatureMap as = tinydet::spatial_attention(in, params.levels[l]);

        const Stats si = stats_of(in.data);
        const Stats so = stats_of(res.data);
        const Stats sac = stats_of(ac);
        const Stats sas = stats_of(as.data);
        if (!(sac.lo > 0.0 && sac.hi < 1.0 && sas.lo > 0.0 && sas.hi < 1.0))
            throw tinydet::divergence_error("relay-demo: attention left the open interval (0,1) at level " +
                                            std::to_string(l));

        std::printf("level %zu: %dx%dx%d -> %dx%dx%d\n", l, in.channels, in.height, in.width,
                    res.channels, res.height, res.width);
        std::printf("  input  min %- .6f max %- .6f mean %- .6f\n", si.lo, si.hi, si.mean);
        std::printf("  output min %- .6f max %- .6f mean %- .6f\n", so.lo, so.hi, so.mean);
        std::printf("  A_c in (%.6f, %.6f) ok, A_s in (%.6f, %.6f) ok\n", sac.lo, sac.hi,
                    sas.lo, sas.hi);

        csv += std::to_string(l) + "," + std::to_string(in.channels) + "," +
               std::to_string(in.height) + "," + std::to_string(in.width);
        for (double v : {si.lo, si.hi, si.mean, so.lo, so.hi, so.mean, sac.lo, sac.hi,
                         sas.lo, sas.hi})
            csv += "," + tinydet::format_double(v);
        csv += "\n";
    }

    const fs::path dir = resolve_out_dir(out, out_given);
    ensure_dir(dir);
    write_artifact(dir / "relay_stats.csv", csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tiny-object detection losses, evaluation, and demos"};
    app.require_subcommand(1);
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "print configuration before running");

    // eval
    auto* eval = app.add_subcommand("eval", "size-bucketed COCO-style evaluation");
    std::string gt_path, det_path, thresholds_spec, eval_out;
    int max_dets = 100;
    eval->add_option("gt", gt_path, "COCO annotation file")->required();
    eval->add_option("det", det_path, "COCO results file")->required();
    eval->add_option("--max-dets", max_dets, "detections kept per image");
    eval->add_option("--iou-thresholds", thresholds_spec, "comma list or begin:step:end");
    eval->add_option("--out", eval_out, "output directory for eval.csv");

    // loss
    auto* loss = app.add_subcommand("loss", "loss breakdown for a pairs file");
    std::string pairs_path;
    double alpha = 1.0;
    double beta = tinydet::LossConfig::default_beta();
    loss->add_option("pairs", pairs_path, "CSV of gt/pred box pairs")->required();
    loss->add_option("--alpha", alpha, "weight of the scale-adaptive term");
    loss->add_option("--beta", beta, "scale-adaptive slope");

    // curves
    auto* curves = app.add_subcommand("curves", "closed-form IoU decay curves");
    std::string sides_spec, shifts_spec, curves_out;
    curves->add_option("--sides", sides_spec, "comma list of box sides");
    curves->add_option("--shifts", shifts_spec, "comma list of absolute shifts");
    curves->add_option("--out", curves_out, "output directory");

    // demo
    auto* demo = app.add_subcommand("demo", "loss rebalancing on a synthetic scene");
    uint64_t demo_seed = 42;
    int demo_steps = 200;
    double demo_lr = 0.05;
    double demo_alpha = 1.0;
    double demo_beta = tinydet::LossConfig::default_beta();
    std::string demo_out;
    SceneFlags demo_scene;
    demo->add_option("--seed", demo_seed, "RNG seed");
    demo->add_option("--steps", demo_steps, "descent steps");
    demo->add_option("--lr", demo_lr, "learning rate");
    demo->add_option("--alpha", demo_alpha, "weight of the scale-adaptive term");
    demo->add_option("--beta", demo_beta, "scale-adaptive slope");
    demo->add_option("--out", demo_out, "output directory");
    demo_scene.attach(demo);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "final IoU per size bucket across betas");
    uint64_t sweep_seed = 42;
    int sweep_steps = 200;
    double sweep_lr = 0.05;
    std::vector<double> sweep_betas;
    std::string sweep_out;
    SceneFlags sweep_scene;
    sweep->add_option("--seed", sweep_seed, "RNG seed");
    sweep->add_option("--steps", sweep_steps, "descent steps");
    sweep->add_option("--lr", sweep_lr, "learning rate");
    sweep->add_option("--beta", sweep_betas, "beta value, repeatable");
    sweep->add_option("--out", sweep_out, "output directory");
    sweep_scene.attach(sweep);

    // relay-demo
    auto* relay = app.add_subcommand("relay-demo", "relay attention forward pass");
    std::string shapes_spec = "256x80x80,512x40x40,1024x20x20";
    uint64_t relay_seed = 42;
    int reduction = 16;
    std::string relay_out;
    relay->add_option("--shapes", shapes_spec, "comma list of CxHxW levels, fine to coarse");
    relay->add_option("--seed", relay_seed, "RNG seed");
    relay->add_option("--reduction", reduction, "channel reduction ratio");
    relay->add_option("--out", relay_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (verbosity > 0)
            std::printf("tinydet %s\n", app.get_subcommands().front()->get_name().c_str());
        if (app.got_subcommand(eval))
            return cmd_eval(gt_path, det_path, max_dets, thresholds_spec, eval_out,
                            eval->count("--out") > 0);
        if (app.got_subcommand(loss))
            return cmd_loss(pairs_path, alpha, beta);
        if (app.got_subcommand(curves))
            return cmd_curves(sides_spec, shifts_spec, curves_out, curves->count("--out") > 0);
        if (app.got_subcommand(demo))
            return cmd_demo(demo_seed, demo_steps, demo_lr, demo_alpha, demo_beta, demo_scene,
                            demo_out, demo->count("--out") > 0);
        if (app.got_subcommand(sweep))
            return cmd_sweep(sweep_seed, sweep_steps, sweep_lr, sweep_betas, sweep_scene,
                             sweep_out, sweep->count("--out") > 0);
        if (app.got_subcommand(relay))
            return cmd_relay(shapes_spec, relay_seed, reduction, relay_out,
                             relay->count("--out") > 0);
        return 1;
    } catch (const tinydet::parse_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const tinydet::divergence_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const tinydet::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 10;
    }
}
