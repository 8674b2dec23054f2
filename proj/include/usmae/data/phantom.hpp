#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "usmae/data/image.hpp"
#include "usmae/data/manifest.hpp"

namespace usmae::data {

struct Ellipse {
  double cx = 0, cy = 0;  // pixels
  double rx = 0, ry = 0;  // semi-axes, pixels
  double angle = 0;       // radians

  bool contains(double x, double y) const;
};

struct Circle {
  double cx = 0, cy = 0, r = 0;
  bool contains(double x, double y) const;
};

// Geometry and noise of one synthetic kidney image. Intensities are 8-bit
// gray levels before speckle.
struct PhantomSpec {
  Label label = Label::normal;
  std::size_t size = 64;
  Ellipse kidney;
  Ellipse sinus;                 // echogenic central complex
  Ellipse pelvis;                // UTD only; ry is half the pelvis diameter
  std::vector<Circle> cysts;     // MCDK only
  double background = 25, parenchyma = 120, sinus_level = 175, fluid = 12;
  double speckle_sigma = 0.25;   // log-normal sigma; 0 renders a smooth image
  std::uint64_t seed = 0;        // speckle stream
  bool annotate = false;         // add caliper and text overlays

  double pelvis_diameter() const { return 2 * pelvis.ry; }
};

// Smallest UTD pelvis diameter in pixels for a given image size.
double pelvis_threshold(std::size_t size);

// Random geometry for a class, drawn from `seed`.
PhantomSpec random_phantom_spec(Label label, std::size_t size, std::uint64_t seed);

struct Phantom {
  GrayImage image;        // speckled image without overlays
  GrayImage anomaly;      // 255 inside the pelvis or cysts, else 0
  RgbImage annotated;     // overlays drawn on `image`; empty unless spec.annotate
  GrayImage overlay;      // 255 where overlays were drawn
};

// Throws ContractError for a spec that breaks its class invariants: a UTD
// pelvis below threshold, fewer than three or overlapping MCDK cysts, or
// anomalies on a normal kidney.
Phantom render_phantom(const PhantomSpec& spec);

// Yellow calipers (9x9 crosses) and a short block of colored text.
void draw_overlays(RgbImage& img, GrayImage& overlay, std::uint64_t seed);

// Bounding box of the nonzero pixels of a mask; empty mask gives all zeros.
struct Box {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
  bool empty = true;
};
Box bounding_box(const GrayImage& mask);

struct SynthOptions {
  std::size_t normal = 400, mcdk = 40, utd = 160;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  double speckle_sigma = 0.25;
  double annotate_fraction = 0.0;  // share of images written with overlays (as P6)
};

// Writes images/, masks/ and manifest.csv under `dir`; sample i uses seed
// (seed ^ i) of the synth stream. Records are interleaved across classes in a
// fixed order. Returns the records in manifest order.
std::vector<SampleRecord> synth_dataset(const std::filesystem::path& dir, const SynthOptions& opts);

// images/<name> -> masks/<name with .pgm>
std::filesystem::path synth_mask_path(const std::filesystem::path& image_path);

}  // namespace usmae::data
