#pragma once

// DOTA-style annotation parsing/writing, corner<->rbox conversion, rotated
// IoU matching, AP50 and angle-error metrics, and report emission.
//
// Line formats (LF endings, single ASCII spaces, 6-decimal fixed point):
//   rbox:      x1 y1 x2 y2 x3 y3 x4 y4 <class> <difficulty>
//   hbox:      xmin ymin xmax ymax <class>
//   detection: <class> <score> x1 y1 x2 y2 x3 y3 x4 y4

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "abbspo/geom.hpp"

namespace abbspo::evalio {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
  int line;
};

struct RBoxAnnotation {
  geom::Polygon corners;  // 4 points in annotation order
  std::string class_token;
  int difficulty = 0;
};

struct HBoxAnnotation {
  geom::HBox box;
  std::string class_token;
};

struct DetectionRecord {
  std::string class_token;
  geom::RBox rbox;
  double score = 0.0;
};

RBoxAnnotation parse_rbox_line(std::string_view line, int line_no = 1);
HBoxAnnotation parse_hbox_line(std::string_view line, int line_no = 1);
DetectionRecord parse_detection_line(std::string_view line, int line_no = 1);

std::string format_rbox_line(const geom::Polygon& corners,
                             const std::string& class_token, int difficulty);
std::string format_rbox_line(const geom::RBox& rbox,
                             const std::string& class_token, int difficulty);
std::string format_hbox_line(const geom::HBox& box,
                             const std::string& class_token);
std::string format_detection_line(const DetectionRecord& det);

std::vector<RBoxAnnotation> read_rbox_file(const std::string& path);
std::vector<HBoxAnnotation> read_hbox_file(const std::string& path);
std::vector<DetectionRecord> read_detection_file(const std::string& path);
void write_lines(const std::string& path, std::span<const std::string> lines);

// Least-surprise rectangle fit of 4 corners: center from the vertex mean,
// sides and angle from the edge vectors. `residual` is the maximum corner
// deviation from the fitted box (> 1 px means visibly non-rectangular input).
struct CornersFit {
  geom::RBox box;
  double residual = 0.0;
};
CornersFit corners_to_rbox(const geom::Polygon& corners);

std::vector<HBoxAnnotation> convert_rbox_to_chbox(
    std::span<const RBoxAnnotation> records);

// |theta_pred - theta_gt| folded into [0, 45] degrees under pi/2 symmetry.
double angle_error_deg(const geom::RBox& pred, const geom::RBox& gt);

struct MetricsReport {
  std::map<std::string, double> per_class_ap;
  double mean_ap = 0.0;
  double subset_mean_ap = 0.0;  // filtered mean over the configured subset
  double mean_iou = 0.0;        // over greedy score-ordered matches
  double median_iou = 0.0;
  double median_angle_error_deg = 0.0;
  int n_gt = 0;
  int n_pred = 0;
  int n_matched = 0;  // matches at the IoU threshold
};

// VOC-style AP at a rotated-IoU threshold: predictions sorted by descending
// score (stable), greedy one-match-per-GT, all-point PR interpolation.
// Classes absent from the GT are ignored in the means.
MetricsReport ap50(std::span<const DetectionRecord> preds,
                   std::span<const std::pair<std::string, geom::RBox>> gts,
                   double iou_thresh = 0.5,
                   std::span<const std::string> subset = {});

// Dense pairwise rotated IoU (row-major a x b); the parallel kernel and the
// serial reference agree bit-for-bit.
std::vector<double> rotated_iou_matrix(std::span<const geom::RBox> a,
                                       std::span<const geom::RBox> b);
std::vector<double> rotated_iou_matrix_reference(std::span<const geom::RBox> a,
                                                 std::span<const geom::RBox> b);

// Fixed-order human-readable report plus line-delimited machine records.
std::string format_report(const MetricsReport& report);
std::vector<std::string> report_records(const MetricsReport& report);

}  // namespace abbspo::evalio
