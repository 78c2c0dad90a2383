#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "badhmp/types.hpp"

namespace badhmp {

struct RenderOptions {
    int strip_frames = 15;       // down-sampled frame count
    double frame_spacing = 1.2;  // horizontal spacing in skeleton-height units
    double margin_px = 20.0;
    double scale_px_per_mm = 0.08;
};

namespace render_detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << v;
    return os.str();
}

// Orthographic side view: world x right, world z up.
inline void draw_skeleton(std::ostringstream& svg, const Pose& pose, const SkeletonTopology& topo,
                          double ox, double oy, double scale, const std::string& stroke,
                          bool dashed) {
    svg << "  <g stroke=\"" << stroke << "\" stroke-width=\"1.5\" fill=\"none\"";
    if (dashed) svg << " stroke-dasharray=\"4 3\"";
    svg << ">\n";
    for (const auto& [p, c] : topo.bones) {
        const auto a = pose.joint(p);
        const auto b = pose.joint(c);
        svg << "    <line x1=\"" << fmt(ox + a.x() * scale) << "\" y1=\""
            << fmt(oy - a.z() * scale) << "\" x2=\"" << fmt(ox + b.x() * scale) << "\" y2=\""
            << fmt(oy - b.z() * scale) << "\"/>\n";
    }
    svg << "  </g>\n";
}

} // namespace render_detail

// Renders a horizontal strip of down-sampled frames, the paper-figure style:
// solid skeleton for the main sample, dashed overlay for a second one.
inline std::string render_strip_svg(const MotionSequence& seq, const SkeletonTopology& topo,
                                    const MotionSequence* overlay = nullptr,
                                    const RenderOptions& opts = {}) {
    const int total = seq.total_frames();
    const int strip = std::min(opts.strip_frames, total);
    if (strip < 1) throw UsageError("render: need at least one frame");
    if (overlay && overlay->total_frames() != total)
        throw DimensionError("render: overlay frame count mismatch");

    // Pick evenly spaced frame indices across the whole sequence.
    std::vector<int> indices;
    for (int i = 0; i < strip; ++i)
        indices.push_back(strip == 1 ? 0 : static_cast<int>(std::llround(
                                               i * static_cast<double>(total - 1) / (strip - 1))));

    // Bounding box of the rendered frames (x/z extents), centered per frame
    // on the root's x so the strip reads left to right.
    double min_z = 1e300, max_z = -1e300, max_half_w = 0.0;
    for (int idx : indices) {
        const Pose& pose = seq.frame(idx);
        const double root_x = pose.joint(topo.root()).x();
        for (int j = 0; j < pose.joint_count(); ++j) {
            min_z = std::min(min_z, pose.joint(j).z());
            max_z = std::max(max_z, pose.joint(j).z());
            max_half_w = std::max(max_half_w, std::abs(pose.joint(j).x() - root_x));
        }
    }
    const double scale = opts.scale_px_per_mm;
    const double cell_w = std::max(2.0 * max_half_w * scale, 20.0) * opts.frame_spacing;
    const double height = (max_z - min_z) * scale + 2.0 * opts.margin_px;
    const double width = cell_w * strip + 2.0 * opts.margin_px;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << render_detail::fmt(width)
        << "\" height=\"" << render_detail::fmt(height) << "\">\n";
    svg << "  <!-- sample " << seq.sample_id << " (" << seq.action_label << "), " << strip
        << " of " << total << " frames -->\n";
    for (int i = 0; i < strip; ++i) {
        const int idx = indices[static_cast<std::size_t>(i)];
        const Pose& pose = seq.frame(idx);
        const double root_x = pose.joint(topo.root()).x();
        const double ox = opts.margin_px + cell_w * (i + 0.5) - root_x * scale;
        const double oy = opts.margin_px + max_z * scale;
        const bool is_history = idx < seq.n_history;
        render_detail::draw_skeleton(svg, pose, topo, ox, oy, scale,
                                     is_history ? "#1f4e9c" : "#c03020", false);
        if (overlay)
            render_detail::draw_skeleton(svg, overlay->frame(idx), topo, ox, oy, scale, "#444444",
                                         true);
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void render_strip_svg_file(const MotionSequence& seq, const SkeletonTopology& topo,
                                  const std::filesystem::path& path,
                                  const MotionSequence* overlay = nullptr,
                                  const RenderOptions& opts = {}) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    out << render_strip_svg(seq, topo, overlay, opts);
}

} // namespace badhmp
