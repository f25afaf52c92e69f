#pragma once
// Miami plots: scan -log10 p above the axis, mean |attribution| mirrored
// below. Output is plain SVG text with fixed-precision coordinates, so the
// same inputs always give the same bytes.

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dlgwas/assoc.hpp"
#include "dlgwas/deeplift.hpp"
#include "dlgwas/error.hpp"
#include "dlgwas/io.hpp"

namespace dlgwas {

struct MiamiRow {
  std::string snp_id;
  double neg_log10_p = 0.0;
  double score = 0.0;
  bool top_scan = false;
  bool top_score = false;
  bool shared() const { return top_scan && top_score; }
};

struct MiamiData {
  std::vector<MiamiRow> rows;  // scan order
  double bonferroni_neg_log10_p = 0.0;
};

// Joins scan rows and attribution scores on snp_id. Both sides must carry
// the same id set; the error lists ids present on only one side.
inline MiamiData join_miami(const ScanTable& scan, const ScoreTable& scores, std::size_t k = 10) {
  std::unordered_map<std::string, std::size_t> score_index;
  for (std::size_t i = 0; i < scores.snp_ids.size(); ++i) {
    if (!score_index.emplace(scores.snp_ids[i], i).second) throw DataError("duplicate snp_id '" + scores.snp_ids[i] + "' in scores");
  }
  std::set<std::string> scan_ids(scan.snp_ids.begin(), scan.snp_ids.end());
  if (scan_ids.size() != scan.snp_ids.size()) throw DataError("duplicate snp_id in scan");
  std::vector<std::string> offenders;
  for (const auto& id : scan.snp_ids) {
    if (!score_index.contains(id)) offenders.push_back(id + " (scan only)");
  }
  for (const auto& id : scores.snp_ids) {
    if (!scan_ids.contains(id)) offenders.push_back(id + " (scores only)");
  }
  if (!offenders.empty()) {
    std::string list;
    const std::size_t shown = std::min<std::size_t>(offenders.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) list += (i ? ", " : "") + offenders[i];
    if (shown < offenders.size()) list += ", ... (" + std::to_string(offenders.size()) + " total)";
    throw DataError("snp_id sets differ: " + list);
  }
  if (scan.snp_ids.empty()) throw DataError("nothing to plot");

  MiamiData d;
  d.bonferroni_neg_log10_p = scan.bonferroni_neg_log10_p;
  const std::size_t m = scan.snp_ids.size();
  Eigen::VectorXd p(static_cast<Eigen::Index>(m));
  Eigen::VectorXd s(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    MiamiRow r;
    r.snp_id = scan.snp_ids[i];
    r.neg_log10_p = scan.neg_log10_p[i];
    r.score = scores.scores(static_cast<Eigen::Index>(score_index.at(r.snp_id)));
    // Failed fits carry NaN; rank them last.
    p(static_cast<Eigen::Index>(i)) = std::isfinite(r.neg_log10_p) ? r.neg_log10_p : -1.0;
    s(static_cast<Eigen::Index>(i)) = r.score;
    d.rows.push_back(std::move(r));
  }
  k = std::min(k, m);
  for (auto i : top_k(p, k)) d.rows[i].top_scan = true;
  for (auto i : top_k(s, k)) d.rows[i].top_score = true;
  if (!std::isfinite(d.bonferroni_neg_log10_p)) d.bonferroni_neg_log10_p = -std::log10(0.05 / static_cast<double>(m));
  return d;
}

inline std::string write_miami_tsv(const MiamiData& d) {
  std::string out = "index\tsnp_id\tneg_log10_p\tmean_abs_score\ttop_scan\ttop_score\tshared\n";
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& r = d.rows[i];
    out += std::to_string(i) + '\t' + r.snp_id + '\t' + io::format_double(r.neg_log10_p) + '\t' +
           io::format_double(r.score) + '\t' + (r.top_scan ? "1" : "0") + '\t' + (r.top_score ? "1" : "0") + '\t' +
           (r.shared() ? "1" : "0") + '\n';
  }
  return out;
}

struct MiamiStyle {
  double width = 1000.0;
  double panel_height = 260.0;
  double margin = 60.0;
  std::string title;
};

// Top panel: height proportional to -log10 p, dashed Bonferroni line.
// Bottom panel: mean |score| growing downward. Shared top-k SNPs get a ring
// in both panels.
inline std::string render_miami_svg(const MiamiData& d, const MiamiStyle& st = {}) {
  const auto fx = [](double v) { return io::format_fixed(v, 2); };
  const double plot_w = st.width - 2 * st.margin;
  const double axis_y = st.margin + st.panel_height;
  const double height = 2 * st.panel_height + 2 * st.margin;
  double max_p = d.bonferroni_neg_log10_p;
  double max_s = 0.0;
  for (const auto& r : d.rows) {
    if (std::isfinite(r.neg_log10_p)) max_p = std::max(max_p, r.neg_log10_p);
    if (std::isfinite(r.score)) max_s = std::max(max_s, r.score);
  }
  max_p = max_p > 0 ? max_p * 1.05 : 1.0;
  max_s = max_s > 0 ? max_s * 1.05 : 1.0;
  const double n = static_cast<double>(d.rows.size());
  const auto x_of = [&](std::size_t i) { return st.margin + (n > 1 ? plot_w * static_cast<double>(i) / (n - 1) : plot_w / 2); };
  const auto top_y = [&](double v) { return axis_y - st.panel_height * std::clamp(v, 0.0, max_p) / max_p; };
  const auto bot_y = [&](double v) { return axis_y + st.panel_height * std::clamp(v, 0.0, max_s) / max_s; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fx(st.width) << "\" height=\"" << fx(height)
    << "\" viewBox=\"0 0 " << fx(st.width) << ' ' << fx(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!st.title.empty()) o << "<text x=\"" << fx(st.width / 2) << "\" y=\"20\" text-anchor=\"middle\">" << st.title << "</text>\n";
  o << "<line x1=\"" << fx(st.margin) << "\" y1=\"" << fx(axis_y) << "\" x2=\"" << fx(st.margin + plot_w) << "\" y2=\""
    << fx(axis_y) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << fx(st.margin) << "\" y1=\"" << fx(st.margin) << "\" x2=\"" << fx(st.margin) << "\" y2=\""
    << fx(axis_y + st.panel_height) << "\" stroke=\"black\"/>\n";
  o << "<text x=\"15\" y=\"" << fx(st.margin + st.panel_height / 2) << "\" transform=\"rotate(-90 15 "
    << fx(st.margin + st.panel_height / 2) << ")\" text-anchor=\"middle\">-log10 p</text>\n";
  o << "<text x=\"15\" y=\"" << fx(axis_y + st.panel_height / 2) << "\" transform=\"rotate(-90 15 "
    << fx(axis_y + st.panel_height / 2) << ")\" text-anchor=\"middle\">mean |DeepLIFT|</text>\n";
  o << "<text x=\"" << fx(st.margin - 5) << "\" y=\"" << fx(st.margin + 4) << "\" text-anchor=\"end\">"
    << io::format_fixed(max_p, 2) << "</text>\n";
  o << "<text x=\"" << fx(st.margin - 5) << "\" y=\"" << fx(axis_y + st.panel_height) << "\" text-anchor=\"end\">"
    << io::format_fixed(max_s, 4) << "</text>\n";
  const double by = top_y(d.bonferroni_neg_log10_p);
  o << "<line class=\"bonferroni\" x1=\"" << fx(st.margin) << "\" y1=\"" << fx(by) << "\" x2=\"" << fx(st.margin + plot_w)
    << "\" y2=\"" << fx(by) << "\" stroke=\"red\" stroke-dasharray=\"6 4\"/>\n";

  o << "<g class=\"scan\" fill=\"#1f4e79\">\n";
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (!std::isfinite(d.rows[i].neg_log10_p)) continue;
    o << "<circle cx=\"" << fx(x_of(i)) << "\" cy=\"" << fx(top_y(d.rows[i].neg_log10_p)) << "\" r=\"1.5\"/>\n";
  }
  o << "</g>\n<g class=\"score\" fill=\"#7f6000\">\n";
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (!std::isfinite(d.rows[i].score)) continue;
    o << "<circle cx=\"" << fx(x_of(i)) << "\" cy=\"" << fx(bot_y(d.rows[i].score)) << "\" r=\"1.5\"/>\n";
  }
  o << "</g>\n<g class=\"shared\" fill=\"none\" stroke=\"#c00000\" stroke-width=\"1.5\">\n";
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& r = d.rows[i];
    if (!r.shared()) continue;
    o << "<circle cx=\"" << fx(x_of(i)) << "\" cy=\"" << fx(top_y(r.neg_log10_p)) << "\" r=\"5\"><title>" << r.snp_id
      << "</title></circle>\n";
    o << "<circle cx=\"" << fx(x_of(i)) << "\" cy=\"" << fx(bot_y(r.score)) << "\" r=\"5\"><title>" << r.snp_id
      << "</title></circle>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace dlgwas
