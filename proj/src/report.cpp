#include "fluctlab/report.hpp"

#include "fluctlab/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fluctlab::report {

namespace {

constexpr const char* kOriginalColor = "#1f2937";
constexpr const char* kReconstructedColor = "#e4572e";
constexpr const char* kBarColor = "#3b82f6";

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string px(double v) { return fmt("%.2f", v); }

std::string escape_xml(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

void open_svg(std::ostringstream& svg, const FigureSpec& spec) {
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << spec.width
        << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height
        << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
        << "\" fill=\"#ffffff\"/>\n"
        << "<text x=\"" << px(spec.width / 2.0)
        << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">"
        << escape_xml(spec.title) << "</text>\n";
}

struct Panel {
    double left;
    double top;
    double size;

    double map_x(double v) const {
        const double c = std::clamp(v, kFrameMin, kFrameMax);
        return left + (c - kFrameMin) / (kFrameMax - kFrameMin) * size;
    }
    double map_y(double v) const {
        const double c = std::clamp(v, kFrameMin, kFrameMax);
        return top + (kFrameMax - c) / (kFrameMax - kFrameMin) * size;
    }
};

void draw_frame(std::ostringstream& svg, const Panel& p, const FigureSpec& spec,
                std::string_view caption) {
    svg << "<rect x=\"" << px(p.left) << "\" y=\"" << px(p.top) << "\" width=\"" << px(p.size)
        << "\" height=\"" << px(p.size) << "\" fill=\"none\" stroke=\"#000000\"/>\n";
    for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        const double x = p.map_x(t);
        const double y = p.map_y(t);
        const double bottom = p.top + p.size;
        svg << "<line x1=\"" << px(x) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(x)
            << "\" y2=\"" << px(bottom + 5) << "\" stroke=\"#000000\"/>\n"
            << "<text x=\"" << px(x) << "\" y=\"" << px(bottom + 18)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << fmt("%.1f", t) << "</text>\n"
            << "<line x1=\"" << px(p.left - 5) << "\" y1=\"" << px(y) << "\" x2=\"" << px(p.left)
            << "\" y2=\"" << px(y) << "\" stroke=\"#000000\"/>\n"
            << "<text x=\"" << px(p.left - 8) << "\" y=\"" << px(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << fmt("%.1f", t) << "</text>\n";
    }
    svg << "<text x=\"" << px(p.left + p.size / 2) << "\" y=\"" << px(p.top + p.size + 34)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << escape_xml(spec.x_label) << "</text>\n"
        << "<text x=\"" << px(p.left - 34) << "\" y=\"" << px(p.top + p.size / 2)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 "
        << px(p.left - 34) << ' ' << px(p.top + p.size / 2) << ")\">" << escape_xml(spec.y_label)
        << "</text>\n";
    if (!caption.empty()) {
        svg << "<text x=\"" << px(p.left + p.size / 2) << "\" y=\"" << px(p.top - 8)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
            << escape_xml(caption) << "</text>\n";
    }
}

void draw_points(std::ostringstream& svg, const Panel& p, std::span<const Point2> points,
                 std::string_view cls, const char* color, double radius) {
    for (const auto& pt : points) {
        if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
            throw InvalidArgument("figure coordinates must be finite");
        }
        svg << "<circle class=\"marker " << cls << "\" cx=\"" << px(p.map_x(pt.x)) << "\" cy=\""
            << px(p.map_y(pt.y)) << "\" r=\"" << px(radius) << "\" fill=\"" << color
            << "\" fill-opacity=\"0.7\"/>\n";
    }
}

void draw_legend(std::ostringstream& svg, double x, double y) {
    svg << "<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"10\" height=\"10\" fill=\""
        << kOriginalColor << "\"/>\n"
        << "<text x=\"" << px(x + 16) << "\" y=\"" << px(y + 9)
        << "\" font-family=\"sans-serif\" font-size=\"12\">original</text>\n"
        << "<rect x=\"" << px(x) << "\" y=\"" << px(y + 18)
        << "\" width=\"10\" height=\"10\" fill=\"" << kReconstructedColor << "\"/>\n"
        << "<text x=\"" << px(x + 16) << "\" y=\"" << px(y + 27)
        << "\" font-family=\"sans-serif\" font-size=\"12\">reconstructed</text>\n";
}

std::string lr_label(double lr) {
    char buf[128];
    const auto res = std::to_chars(buf, buf + sizeof buf, lr, std::chars_format::fixed);
    return "lr=" + std::string(buf, res.ptr);
}

}  // namespace

ReconstructionResult reconstruct_with(const netcore::NetworkState& net,
                                      const shapegen::ShapeDataset& dataset, double learning_rate) {
    ReconstructionResult r;
    r.shape = dataset.kind;
    r.learning_rate = learning_rate;
    r.original = dataset.points;
    r.reconstructed.reserve(dataset.points.size());
    for (const auto& p : dataset.points) {
        r.reconstructed.push_back(netcore::forward(net, p).output());
    }
    r.final_mse = netcore::mse(r.original, r.reconstructed);
    return r;
}

shapegen::ShapeDataset dataset_for(const runstore::RunManifest& manifest) {
    return shapegen::generate(manifest.config.shape, manifest.config.sample_count,
                              manifest.config.data_seed);
}

ReconstructionResult reconstruct(const runstore::RunReader& run,
                                 const shapegen::ShapeDataset& dataset) {
    const auto& m = run.manifest();
    if (!m.complete) {
        throw InvalidArgument("cannot reconstruct from an incomplete run");
    }
    if (dataset.kind != m.config.shape || dataset.seed != m.config.data_seed ||
        dataset.points.size() != m.config.sample_count) {
        throw InvalidArgument("dataset does not match the run manifest (shape, seed or count)");
    }
    if (run.size() == 0) {
        throw InsufficientData("run holds no snapshots");
    }
    const auto net = network_from_snapshot(m.architecture, run.snapshot(run.size() - 1));
    return reconstruct_with(net, dataset, m.config.learning_rate);
}

ReconstructionResult reconstruct(const std::filesystem::path& run_file,
                                 const shapegen::ShapeDataset& dataset) {
    return reconstruct(runstore::RunReader::open(run_file), dataset);
}

std::string scatter_svg(const ReconstructionResult& result, const FigureSpec& spec) {
    if (result.original.size() != result.reconstructed.size()) {
        throw InvalidArgument("original and reconstructed point counts differ");
    }
    if (result.original.empty()) {
        throw InvalidArgument("scatter figure needs at least one point");
    }
    std::ostringstream svg;
    open_svg(svg, spec);
    const double size = std::min(spec.width - 260.0, spec.height - 120.0);
    const Panel panel{70.0, 60.0, size};
    draw_frame(svg, panel, spec,
               std::string(shapegen::to_string(result.shape)) + ", " + lr_label(result.learning_rate) +
                   ", MSE " + fmt("%.6g", result.final_mse));
    draw_points(svg, panel, result.original, "original", kOriginalColor, 2.0);
    draw_points(svg, panel, result.reconstructed, "reconstructed", kReconstructedColor, 2.0);
    draw_legend(svg, panel.left + panel.size + 30, panel.top + 10);
    svg << "</svg>\n";
    return svg.str();
}

std::string comparison_svg(std::span<const ReconstructionResult> results, const FigureSpec& spec) {
    if (results.empty()) {
        throw InvalidArgument("comparison figure needs at least one run");
    }
    std::ostringstream svg;
    open_svg(svg, spec);
    const double n = static_cast<double>(results.size());
    const double slot = (spec.width - 40.0) / n;
    const double size = std::min(slot - 70.0, spec.height - 150.0);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (r.original.size() != r.reconstructed.size()) {
            throw InvalidArgument("original and reconstructed point counts differ");
        }
        const Panel panel{60.0 + slot * static_cast<double>(i), 70.0, size};
        draw_frame(svg, panel, spec, lr_label(r.learning_rate) + ", MSE " + fmt("%.4g", r.final_mse));
        draw_points(svg, panel, r.original, "original", kOriginalColor, 1.2);
        draw_points(svg, panel, r.reconstructed, "reconstructed", kReconstructedColor, 1.2);
    }
    draw_legend(svg, 60.0, spec.height - 40.0);
    svg << "</svg>\n";
    return svg.str();
}

std::string hist_svg(const analysis::FluctuationReport& report, Channel channel,
                     const FigureSpec& spec) {
    const auto& ch = report.channel(channel);
    std::ostringstream svg;
    open_svg(svg, spec);

    const double panel_w = (spec.width - 120.0) / 2.0;
    const double panel_h = spec.height - 170.0;
    const double top = 80.0;
    int panel_index = 0;
    for (auto half : {analysis::Half::encoder, analysis::Half::decoder}) {
        const auto& h = ch.half(half);
        const double left = 60.0 + panel_index * (panel_w + 40.0);
        const double bottom = top + panel_h;
        ++panel_index;

        std::size_t max_count = 1;
        for (auto c : h.histogram.counts) max_count = std::max(max_count, c);

        svg << "<g class=\"panel\" data-half=\"" << analysis::to_string(half) << "\">\n";
        svg << "<text x=\"" << px(left + panel_w / 2) << "\" y=\"" << px(top - 22)
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
            << analysis::to_string(half) << " (" << lr_label(report.run.config.learning_rate)
            << ")</text>\n"
            << "<text x=\"" << px(left + panel_w / 2) << "\" y=\"" << px(top - 6)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << "spread of spread " << fmt("%.4g", h.spread_of_spread) << ", inactive "
            << h.inactive.size() << "/" << h.neuron_count << "</text>\n";
        svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(bottom) << "\" x2=\""
            << px(left + panel_w) << "\" y2=\"" << px(bottom) << "\" stroke=\"#000000\"/>\n"
            << "<line x1=\"" << px(left) << "\" y1=\"" << px(top) << "\" x2=\"" << px(left)
            << "\" y2=\"" << px(bottom) << "\" stroke=\"#000000\"/>\n";

        const auto bins = h.histogram.counts.size();
        const double bar_w = panel_w / static_cast<double>(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            const auto count = h.histogram.counts[b];
            const double height = panel_h * static_cast<double>(count) / static_cast<double>(max_count);
            const double x = left + bar_w * static_cast<double>(b);
            svg << "<rect class=\"bar\" data-count=\"" << count << "\" x=\"" << px(x) << "\" y=\""
                << px(bottom - height) << "\" width=\"" << px(bar_w) << "\" height=\"" << px(height)
                << "\" fill=\"" << kBarColor << "\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
            if (count > 0) {
                svg << "<text class=\"count\" x=\"" << px(x + bar_w / 2) << "\" y=\""
                    << px(bottom - height - 3)
                    << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">"
                    << count << "</text>\n";
            }
        }

        // Ticks on every edge; labels on roughly six of them.
        const auto& edges = h.histogram.edges;
        const std::size_t label_every = std::max<std::size_t>(1, (edges.size() + 4) / 6);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const double x = left + bar_w * static_cast<double>(std::min(e, bins));
            svg << "<line x1=\"" << px(x) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(x)
                << "\" y2=\"" << px(bottom + 4) << "\" stroke=\"#000000\"/>\n";
            if (e % label_every == 0 || e + 1 == edges.size()) {
                svg << "<text class=\"edge\" x=\"" << px(x) << "\" y=\"" << px(bottom + 16)
                    << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">"
                    << fmt("%.2e", edges[e]) << "</text>\n";
            }
        }
        svg << "<text x=\"" << px(left + panel_w / 2) << "\" y=\"" << px(bottom + 36)
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
            << escape_xml(spec.x_label) << "</text>\n";
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

FluctuationTable fluctuation_table(const analysis::FluctuationReport& report) {
    std::ostringstream md;
    std::ostringstream csv;
    md << "| channel | half | neurons | inactive | min spread | median spread | max spread | "
          "spread of spread |\n"
       << "|---|---|---:|---:|---:|---:|---:|---:|\n";
    csv << kTableColumns << '\n';
    for (const auto& ch : report.channels) {
        for (auto half : {analysis::Half::encoder, analysis::Half::decoder}) {
            const auto& h = ch.half(half);
            const auto name = to_string(ch.channel);
            const auto half_name = analysis::to_string(half);
            md << "| " << name << " | " << half_name << " | " << h.neuron_count << " | "
               << h.inactive.size() << " | " << fmt("%.6g", h.min_spread) << " | "
               << fmt("%.6g", h.median_spread) << " | " << fmt("%.6g", h.max_spread) << " | "
               << fmt("%.6g", h.spread_of_spread) << " |\n";
            csv << name << ',' << half_name << ',' << h.neuron_count << ',' << h.inactive.size()
                << ',' << analysis::format_double(h.min_spread) << ','
                << analysis::format_double(h.median_spread) << ','
                << analysis::format_double(h.max_spread) << ','
                << analysis::format_double(h.spread_of_spread) << '\n';
        }
    }
    return {md.str(), csv.str()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

}  // namespace fluctlab::report
