#pragma once

// Synthetic scene generation: bilaterally symmetric shapes with known true
// rotated boxes, supersampled rasterization, tight/coarse HBox annotation
// derivation, and the three augmented views (original, rotated, flipped).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abbspo/geom.hpp"
#include "abbspo/types.hpp"

namespace abbspo::synth {

enum class ShapeKind {
  rectangle,
  rounded_rectangle,
  cross,
  airplane_polygon,
  disc,
};

ShapeKind shape_kind_from_string(const std::string& s);
std::string to_string(ShapeKind kind);

// Disc models the orientation-ambiguous class: no symmetry axis to learn,
// and its true rbox is fixed horizontal (w = h, theta = 0).
bool shape_is_symmetric(ShapeKind kind);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::rectangle;
  geom::RBox rbox;          // true oriented box, theta = symmetry axis
  double intensity = 1.0;   // in (0, 1]
  int class_id = 0;
};

// Point-in-shape test in image coordinates. Shapes are bilaterally symmetric
// about the rbox's local u-axis and span the full rbox extent.
bool shape_contains(const ShapeSpec& spec, double x, double y);

// Analytic tight axis-aligned extent of the shape at its current pose.
geom::HBox shape_extent(const ShapeSpec& spec);

struct Scene {
  Image image;
  std::vector<ShapeSpec> objects;
  std::uint64_t seed = 0;
};

struct AnnotationRecord {
  int class_id = 0;
  geom::HBox t_hbox;   // tight extent of occupied pixels
  geom::HBox c_hbox;   // mcr(rbox)
  geom::RBox rbox;     // held out for evaluation only
};

struct SceneConfig {
  int width = 256;
  int height = 256;
  int min_objects = 3;
  int max_objects = 8;
  double min_long_side = 50.0;
  double max_long_side = 120.0;
  double margin = 6.0;
  double noise_amplitude = 0.05;
  int supersample = 4;
  std::vector<ShapeKind> kinds = {ShapeKind::rectangle,
                                  ShapeKind::rounded_rectangle,
                                  ShapeKind::cross,
                                  ShapeKind::airplane_polygon,
                                  ShapeKind::disc};
};

// Mean coverage x intensity per pixel over supersample^2 sub-samples;
// background 0. The parallel kernel and the serial reference produce
// identical images.
Image rasterize(const Scene& scene, int supersample);
Image rasterize_reference(const Scene& scene, int supersample);

// Coverage fraction in [0, 1] of one object per pixel.
Image object_coverage(const ShapeSpec& spec, int width, int height,
                      int supersample);

// Tight center-size box of pixels with coverage >= threshold, in pixel-edge
// coordinates (a single pixel (x, y) gives center (x+.5, y+.5), size 1x1).
geom::HBox tight_hbox(const Image& coverage, double threshold = 0.5);

std::vector<AnnotationRecord> derive_annotations(const Scene& scene,
                                                 int supersample = 4);

// Places objects with pairwise rotated IoU <= 0.05, rasterizes, and adds
// low-amplitude seeded background noise. Retries with a derived seed when
// object masks merge; throws after bounded retries.
Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

struct ViewSet {
  Image rot;            // rotated by R about the image center, zero padding
  Image flp;            // horizontal mirror
  double rotation = 0.0;
  geom::Vec2 center;
};

ViewSet augment_views(const Scene& scene, double rotation);

Image rotate_image(const Image& image, double rotation, geom::Vec2 center);
Image flip_image(const Image& image);

// Binary P5 portable graymap, maxval 255.
void write_pgm(const std::string& path, const Image& image);
Image read_pgm(const std::string& path);

}  // namespace abbspo::synth
