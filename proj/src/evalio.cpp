#include "abbspo/evalio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "abbspo/losses.hpp"

namespace abbspo::evalio {

namespace {

std::vector<std::string> split_single_space(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t pos = line.find(' ', start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_number(const std::string& field, int line_no) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &consumed);
  } catch (const std::exception&) {
    throw ParseError(line_no, "unparsable number '" + field + "'");
  }
  if (consumed != field.size() || !std::isfinite(v)) {
    throw ParseError(line_no, "unparsable number '" + field + "'");
  }
  return v;
}

int parse_int(const std::string& field, int line_no) {
  std::size_t consumed = 0;
  int v = 0;
  try {
    v = std::stoi(field, &consumed);
  } catch (const std::exception&) {
    throw ParseError(line_no, "unparsable integer '" + field + "'");
  }
  if (consumed != field.size()) {
    throw ParseError(line_no, "unparsable integer '" + field + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string_view strip_newline(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  return line;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Area under the exact precision envelope (all-point interpolation).
double average_precision(std::vector<std::pair<double, bool>> scored_hits,
                         int n_gt) {
  if (n_gt == 0) return 0.0;
  std::stable_sort(scored_hits.begin(), scored_hits.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const auto& [score, hit] : scored_hits) {
    (void)score;
    hit ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / n_gt);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    const double r = recall[i];
    if (r <= prev_recall) continue;
    double p_env = 0.0;
    for (std::size_t j = i; j < precision.size(); ++j) {
      p_env = std::max(p_env, precision[j]);
    }
    ap += (r - prev_recall) * p_env;
    prev_recall = r;
  }
  return ap;
}

}  // namespace

RBoxAnnotation parse_rbox_line(std::string_view line, int line_no) {
  const auto fields = split_single_space(strip_newline(line));
  if (fields.size() != 10) {
    throw ParseError(line_no, "expected 10 fields, got " +
                                  std::to_string(fields.size()));
  }
  RBoxAnnotation ann;
  for (int i = 0; i < 4; ++i) {
    ann.corners.vertices.push_back({parse_number(fields[2 * i], line_no),
                                    parse_number(fields[2 * i + 1], line_no)});
  }
  if (fields[8].empty()) throw ParseError(line_no, "empty class token");
  ann.class_token = fields[8];
  ann.difficulty = parse_int(fields[9], line_no);
  return ann;
}

HBoxAnnotation parse_hbox_line(std::string_view line, int line_no) {
  const auto fields = split_single_space(strip_newline(line));
  if (fields.size() != 5) {
    throw ParseError(line_no, "expected 5 fields, got " +
                                  std::to_string(fields.size()));
  }
  const double xmin = parse_number(fields[0], line_no);
  const double ymin = parse_number(fields[1], line_no);
  const double xmax = parse_number(fields[2], line_no);
  const double ymax = parse_number(fields[3], line_no);
  if (xmin > xmax || ymin > ymax) {
    throw ParseError(line_no, "inverted extents");
  }
  if (fields[4].empty()) throw ParseError(line_no, "empty class token");
  return {{0.5 * (xmin + xmax), 0.5 * (ymin + ymax), xmax - xmin, ymax - ymin},
          fields[4]};
}

DetectionRecord parse_detection_line(std::string_view line, int line_no) {
  const auto fields = split_single_space(strip_newline(line));
  if (fields.size() != 10) {
    throw ParseError(line_no, "expected 10 fields, got " +
                                  std::to_string(fields.size()));
  }
  DetectionRecord det;
  if (fields[0].empty()) throw ParseError(line_no, "empty class token");
  det.class_token = fields[0];
  det.score = parse_number(fields[1], line_no);
  geom::Polygon corners;
  for (int i = 0; i < 4; ++i) {
    corners.vertices.push_back({parse_number(fields[2 + 2 * i], line_no),
                                parse_number(fields[3 + 2 * i], line_no)});
  }
  det.rbox = corners_to_rbox(corners).box;
  return det;
}

std::string format_rbox_line(const geom::Polygon& corners,
                             const std::string& class_token, int difficulty) {
  std::string out;
  for (const geom::Vec2& v : corners.vertices) {
    out += fmt(v.x) + " " + fmt(v.y) + " ";
  }
  out += class_token + " " + std::to_string(difficulty) + "\n";
  return out;
}

std::string format_rbox_line(const geom::RBox& rbox,
                             const std::string& class_token, int difficulty) {
  return format_rbox_line(geom::rbox_corners(rbox), class_token, difficulty);
}

std::string format_hbox_line(const geom::HBox& box,
                             const std::string& class_token) {
  return fmt(box.cx - 0.5 * box.w) + " " + fmt(box.cy - 0.5 * box.h) + " " +
         fmt(box.cx + 0.5 * box.w) + " " + fmt(box.cy + 0.5 * box.h) + " " +
         class_token + "\n";
}

std::string format_detection_line(const DetectionRecord& det) {
  std::string out = det.class_token + " " + fmt(det.score);
  for (const geom::Vec2& v : geom::rbox_corners(det.rbox).vertices) {
    out += " " + fmt(v.x) + " " + fmt(v.y);
  }
  return out + "\n";
}

namespace {

std::vector<std::string> read_nonempty_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

std::vector<RBoxAnnotation> read_rbox_file(const std::string& path) {
  std::vector<RBoxAnnotation> out;
  int line_no = 0;
  for (const std::string& line : read_nonempty_lines(path)) {
    ++line_no;
    if (strip_newline(line).empty()) continue;
    out.push_back(parse_rbox_line(line, line_no));
  }
  return out;
}

std::vector<HBoxAnnotation> read_hbox_file(const std::string& path) {
  std::vector<HBoxAnnotation> out;
  int line_no = 0;
  for (const std::string& line : read_nonempty_lines(path)) {
    ++line_no;
    if (strip_newline(line).empty()) continue;
    out.push_back(parse_hbox_line(line, line_no));
  }
  return out;
}

std::vector<DetectionRecord> read_detection_file(const std::string& path) {
  std::vector<DetectionRecord> out;
  int line_no = 0;
  for (const std::string& line : read_nonempty_lines(path)) {
    ++line_no;
    if (strip_newline(line).empty()) continue;
    out.push_back(parse_detection_line(line, line_no));
  }
  return out;
}

void write_lines(const std::string& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const std::string& line : lines) out << line;
  if (!out) throw std::runtime_error("write failed: " + path);
}

CornersFit corners_to_rbox(const geom::Polygon& corners) {
  const auto& v = corners.vertices;
  if (v.size() != 4) {
    throw std::invalid_argument("corners_to_rbox: need exactly 4 points");
  }
  CornersFit fit;
  fit.box.cx = 0.25 * (v[0].x + v[1].x + v[2].x + v[3].x);
  fit.box.cy = 0.25 * (v[0].y + v[1].y + v[2].y + v[3].y);
  // Edge vectors of opposite sides, averaged to cancel perturbations.
  const double e1x = 0.5 * ((v[1].x - v[0].x) + (v[2].x - v[3].x));
  const double e1y = 0.5 * ((v[1].y - v[0].y) + (v[2].y - v[3].y));
  const double e2x = 0.5 * ((v[3].x - v[0].x) + (v[2].x - v[1].x));
  const double e2y = 0.5 * ((v[3].y - v[0].y) + (v[2].y - v[1].y));
  const double len1 = std::hypot(e1x, e1y);
  const double len2 = std::hypot(e2x, e2y);
  if (len1 < 1e-12 || len2 < 1e-12) {
    throw std::invalid_argument("corners_to_rbox: degenerate corners");
  }
  fit.box.w = len1;
  fit.box.h = len2;
  fit.box.theta = geom::canonical_angle(std::atan2(e1y, e1x));
  // Keep w with the first edge: if canonicalization crossed a pi/2 boundary
  // the fitted corners below still match because theta is mod pi.
  const geom::Polygon refit = geom::rbox_corners(fit.box);
  double residual = 0.0;
  for (const geom::Vec2& p : v) {
    double best = 1e300;
    for (const geom::Vec2& q : refit.vertices) {
      best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
    }
    residual = std::max(residual, best);
  }
  fit.residual = residual;
  return fit;
}

std::vector<HBoxAnnotation> convert_rbox_to_chbox(
    std::span<const RBoxAnnotation> records) {
  std::vector<HBoxAnnotation> out;
  out.reserve(records.size());
  for (const RBoxAnnotation& rec : records) {
    const CornersFit fit = corners_to_rbox(rec.corners);
    out.push_back({geom::mcr(fit.box), rec.class_token});
  }
  return out;
}

double angle_error_deg(const geom::RBox& pred, const geom::RBox& gt) {
  const double d =
      losses::wrap_periodic(pred.theta - gt.theta, geom::kHalfPi);
  return std::abs(d) * 180.0 / geom::kPi;
}

std::vector<double> rotated_iou_matrix_reference(
    std::span<const geom::RBox> a, std::span<const geom::RBox> b) {
  std::vector<double> m(a.size() * b.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      m[i * b.size() + j] = geom::rotated_iou(a[i], b[j]);
    }
  }
  return m;
}

std::vector<double> rotated_iou_matrix(std::span<const geom::RBox> a,
                                       std::span<const geom::RBox> b) {
  std::vector<double> m(a.size() * b.size(), 0.0);
  const std::int64_t rows = static_cast<std::int64_t>(a.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      m[i * b.size() + j] = geom::rotated_iou(a[i], b[j]);
    }
  }
  return m;
}

MetricsReport ap50(std::span<const DetectionRecord> preds,
                   std::span<const std::pair<std::string, geom::RBox>> gts,
                   double iou_thresh, std::span<const std::string> subset) {
  if (gts.empty()) throw std::invalid_argument("ap50: empty ground truth");
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw std::invalid_argument("ap50: threshold outside (0, 1)");
  }
  MetricsReport report;
  report.n_gt = static_cast<int>(gts.size());
  report.n_pred = static_cast<int>(preds.size());

  std::map<std::string, std::vector<std::size_t>> gt_by_class;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    gt_by_class[gts[i].first].push_back(i);
  }
  std::map<std::string, std::vector<std::size_t>> pred_by_class;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_by_class[preds[i].class_token].push_back(i);
  }

  std::vector<double> matched_ious;
  std::vector<double> matched_angle_errors;

  for (const auto& [token, gt_idx] : gt_by_class) {
    std::vector<std::size_t> pred_idx;
    if (auto it = pred_by_class.find(token); it != pred_by_class.end()) {
      pred_idx = it->second;
    }
    std::stable_sort(pred_idx.begin(), pred_idx.end(),
                     [&](std::size_t x, std::size_t y) {
                       return preds[x].score > preds[y].score;
                     });
    std::vector<geom::RBox> pred_boxes, gt_boxes;
    for (std::size_t i : pred_idx) pred_boxes.push_back(preds[i].rbox);
    for (std::size_t i : gt_idx) gt_boxes.push_back(gts[i].second);
    const std::vector<double> iou = rotated_iou_matrix(pred_boxes, gt_boxes);

    std::vector<bool> gt_used(gt_idx.size(), false);
    std::vector<std::pair<double, bool>> scored_hits;
    for (std::size_t pi = 0; pi < pred_idx.size(); ++pi) {
      double best = 0.0;
      std::size_t best_g = 0;
      bool any = false;
      for (std::size_t gi = 0; gi < gt_idx.size(); ++gi) {
        if (gt_used[gi]) continue;
        const double v = iou[pi * gt_idx.size() + gi];
        if (!any || v > best) {
          best = v;
          best_g = gi;
          any = true;
        }
      }
      const bool hit = any && best >= iou_thresh;
      if (hit) {
        gt_used[best_g] = true;
        matched_ious.push_back(best);
        matched_angle_errors.push_back(
            angle_error_deg(pred_boxes[pi], gt_boxes[best_g]));
      }
      scored_hits.emplace_back(preds[pred_idx[pi]].score, hit);
    }
    report.per_class_ap[token] =
        average_precision(std::move(scored_hits),
                          static_cast<int>(gt_idx.size()));
  }

  report.n_matched = static_cast<int>(matched_ious.size());
  if (!matched_ious.empty()) {
    report.mean_iou =
        std::accumulate(matched_ious.begin(), matched_ious.end(), 0.0) /
        static_cast<double>(matched_ious.size());
    report.median_iou = median(matched_ious);
    report.median_angle_error_deg = median(matched_angle_errors);
  }
  double sum = 0.0;
  for (const auto& [token, ap] : report.per_class_ap) sum += ap;
  report.mean_ap = sum / static_cast<double>(report.per_class_ap.size());

  double subset_sum = 0.0;
  int subset_n = 0;
  for (const std::string& token : subset) {
    if (auto it = report.per_class_ap.find(token);
        it != report.per_class_ap.end()) {
      subset_sum += it->second;
      ++subset_n;
    }
  }
  report.subset_mean_ap = subset_n > 0 ? subset_sum / subset_n : 0.0;
  return report;
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream out;
  out << "n_gt: " << report.n_gt << "\n";
  out << "n_pred: " << report.n_pred << "\n";
  out << "n_matched: " << report.n_matched << "\n";
  for (const auto& [token, ap] : report.per_class_ap) {
    out << "ap50." << token << ": " << fmt(ap) << "\n";
  }
  out << "mean_ap50: " << fmt(report.mean_ap) << "\n";
  out << "subset_mean_ap50: " << fmt(report.subset_mean_ap) << "\n";
  out << "mean_iou: " << fmt(report.mean_iou) << "\n";
  out << "median_iou: " << fmt(report.median_iou) << "\n";
  out << "median_angle_error_deg: " << fmt(report.median_angle_error_deg)
      << "\n";
  return out.str();
}

std::vector<std::string> report_records(const MetricsReport& report) {
  std::vector<std::string> records;
  for (const auto& [token, ap] : report.per_class_ap) {
    records.push_back("class " + token + " ap " + fmt(ap) + "\n");
  }
  records.push_back("summary mean_ap " + fmt(report.mean_ap) +
                    " subset_mean_ap " + fmt(report.subset_mean_ap) +
                    " mean_iou " + fmt(report.mean_iou) + " median_iou " +
                    fmt(report.median_iou) + " median_angle_error_deg " +
                    fmt(report.median_angle_error_deg) + " n_gt " +
                    std::to_string(report.n_gt) + " n_pred " +
                    std::to_string(report.n_pred) + " n_matched " +
                    std::to_string(report.n_matched) + "\n");
  return records;
}

}  // namespace abbspo::evalio
