#include "usmae/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "usmae/errors.hpp"
#include "usmae/rng.hpp"

namespace usmae::data {

namespace fs = std::filesystem;

bool Ellipse::contains(double x, double y) const {
  if (rx <= 0 || ry <= 0) return false;
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = x - cx, dy = y - cy;
  const double u = (dx * c + dy * s) / rx, v = (-dx * s + dy * c) / ry;
  return u * u + v * v <= 1.0;
}

bool Circle::contains(double x, double y) const {
  return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
}

double pelvis_threshold(std::size_t size) { return 0.125 * static_cast<double>(size); }

namespace {

// Circle lies inside the ellipse shrunk by `margin` pixels (checked on the
// circle's boundary).
bool circle_inside(const Circle& c, const Ellipse& e, double margin) {
  for (int i = 0; i < 16; ++i) {
    const double t = 2 * M_PI * i / 16;
    const double x = c.cx + (c.r + margin) * std::cos(t), y = c.cy + (c.r + margin) * std::sin(t);
    if (!e.contains(x, y)) return false;
  }
  return e.contains(c.cx, c.cy);
}

bool overlaps(const Circle& a, const Circle& b, double gap) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy) < a.r + b.r + gap;
}

}  // namespace

PhantomSpec random_phantom_spec(Label label, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  const double s = static_cast<double>(size);
  PhantomSpec spec;
  spec.label = label;
  spec.size = size;
  auto& k = spec.kidney;
  k.cx = s / 2 + rng.uniform(-0.05, 0.05) * s;
  k.cy = s / 2 + rng.uniform(-0.05, 0.05) * s;
  k.rx = rng.uniform(0.30, 0.38) * s;
  k.ry = rng.uniform(0.19, 0.25) * s;
  k.angle = rng.uniform(-0.4, 0.4);
  spec.sinus = k;
  spec.sinus.rx = k.rx * rng.uniform(0.35, 0.5);
  spec.sinus.ry = k.ry * rng.uniform(0.25, 0.4);
  spec.parenchyma = rng.uniform(105, 135);
  spec.sinus_level = rng.uniform(160, 190);

  if (label == Label::utd) {
    auto& p = spec.pelvis;
    p = spec.sinus;
    p.ry = pelvis_threshold(size) / 2 * rng.uniform(1.0, 1.5);
    p.rx = std::min(p.ry * rng.uniform(1.3, 1.8), 0.8 * k.rx);
  } else if (label == Label::mcdk) {
    const std::size_t want = 3 + rng.below(4);
    while (spec.cysts.size() < want) {
      bool placed = false;
      for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
        Circle c;
        c.r = rng.uniform(0.05, 0.08) * s;
        c.cx = k.cx + rng.uniform(-k.rx, k.rx);
        c.cy = k.cy + rng.uniform(-k.rx, k.rx);
        if (!circle_inside(c, k, 1.0)) continue;
        if (std::any_of(spec.cysts.begin(), spec.cysts.end(),
                        [&](const Circle& o) { return overlaps(c, o, 1.5); }))
          continue;
        spec.cysts.push_back(c);
        placed = true;
      }
      // start over when the kidney is too crowded to place the next cyst
      if (!placed) spec.cysts.clear();
    }
  }
  spec.seed = rng.next_u64();
  return spec;
}

Phantom render_phantom(const PhantomSpec& spec) {
  if (spec.size == 0) throw ContractError("phantom size must be positive");
  if (spec.label == Label::utd) {
    if (spec.pelvis_diameter() + 1e-9 < pelvis_threshold(spec.size)) {
      throw ContractError("UTD pelvis diameter below the threshold");
    }
  } else if (spec.pelvis.ry > 0) {
    throw ContractError("only UTD phantoms have a dilated pelvis");
  }
  if (spec.label == Label::mcdk) {
    if (spec.cysts.size() < 3) throw ContractError("MCDK phantoms need at least three cysts");
    for (std::size_t i = 0; i < spec.cysts.size(); ++i)
      for (std::size_t j = i + 1; j < spec.cysts.size(); ++j)
        if (overlaps(spec.cysts[i], spec.cysts[j], 0.0)) {
          throw ContractError("MCDK cysts " + std::to_string(i) + " and " + std::to_string(j) +
                              " overlap");
        }
  } else if (!spec.cysts.empty()) {
    throw ContractError("only MCDK phantoms have cysts");
  }

  const std::size_t n = spec.size;
  auto level_at = [&](double x, double y) {
    bool fluid = spec.pelvis.contains(x, y);
    for (const auto& c : spec.cysts) fluid = fluid || c.contains(x, y);
    if (fluid) return std::pair(spec.fluid, true);
    if (spec.sinus.contains(x, y)) return std::pair(spec.sinus_level, false);
    if (spec.kidney.contains(x, y)) return std::pair(spec.parenchyma, false);
    return std::pair(spec.background, false);
  };

  Phantom out;
  out.image = GrayImage(n, n);
  out.anomaly = GrayImage(n, n);
  Rng speckle(spec.seed);
  const double sigma = spec.speckle_sigma;
  const double lo = std::exp(-3 * sigma), hi = std::exp(3 * sigma);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      // 2x2 supersampling smooths the region boundaries
      double level = 0;
      for (double oy : {0.25, 0.75})
        for (double ox : {0.25, 0.75}) level += level_at(x + ox, y + oy).first / 4;
      if (level_at(x + 0.5, y + 0.5).second) out.anomaly.at(x, y) = 255;
      double factor = 1.0;
      if (sigma > 0) factor = std::clamp(std::exp(sigma * speckle.normal() - sigma * sigma / 2), lo, hi);
      out.image.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(level * factor), 0L, 255L));
    }
  }
  if (spec.annotate) {
    out.annotated = to_rgb(out.image);
    out.overlay = GrayImage(n, n);
    draw_overlays(out.annotated, out.overlay, spec.seed ^ 0xa11070a7eULL);
  }
  return out;
}

namespace {

// 3x5 digit glyphs, one bit per pixel, row-major from the top-left.
constexpr std::uint16_t kGlyphs[10] = {0x7b6f, 0x2c97, 0x73e7, 0x73cf, 0x5bc9,
                                       0x79cf, 0x79ef, 0x7249, 0x7bef, 0x7bcf};

void paint(RgbImage& img, GrayImage& overlay, long x, long y, const std::uint8_t* color) {
  if (x < 0 || y < 0 || x >= static_cast<long>(img.width) || y >= static_cast<long>(img.height)) return;
  std::copy_n(color, 3, img.at(x, y));
  overlay.at(x, y) = 255;
}

}  // namespace

void draw_overlays(RgbImage& img, GrayImage& overlay, std::uint64_t seed) {
  Rng rng(seed);
  const long w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  static const std::uint8_t yellow[3] = {255, 255, 0};
  static const std::uint8_t green[3] = {40, 230, 60};
  static const std::uint8_t cyan[3] = {0, 220, 230};
  for (int c = 0; c < 2; ++c) {
    const long cx = 4 + static_cast<long>(rng.below(static_cast<std::uint64_t>(std::max(1L, w - 8))));
    const long cy = 4 + static_cast<long>(rng.below(static_cast<std::uint64_t>(std::max(1L, h - 8))));
    for (long d = -4; d <= 4; ++d) {
      paint(img, overlay, cx + d, cy, yellow);
      paint(img, overlay, cx, cy + d, yellow);
    }
  }
  const std::uint8_t* text_color = rng.below(2) ? green : cyan;
  const long tx = 2 + static_cast<long>(rng.below(static_cast<std::uint64_t>(std::max(1L, w - 20))));
  const long ty = 2 + static_cast<long>(rng.below(static_cast<std::uint64_t>(std::max(1L, h / 4))));
  for (int g = 0; g < 4; ++g) {
    const auto glyph = kGlyphs[rng.below(10)];
    for (int r = 0; r < 5; ++r)
      for (int col = 0; col < 3; ++col)
        if (glyph >> (14 - (r * 3 + col)) & 1) paint(img, overlay, tx + g * 4 + col, ty + r, text_color);
  }
}

Box bounding_box(const GrayImage& mask) {
  Box b;
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      if (b.empty) {
        b = {x, y, x, y, false};
      } else {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
  return b;
}

fs::path synth_mask_path(const fs::path& image_path) {
  auto name = image_path.filename();
  name.replace_extension(".pgm");
  return image_path.parent_path().parent_path() / "masks" / name;
}

std::vector<SampleRecord> synth_dataset(const fs::path& dir, const SynthOptions& opts) {
  std::vector<Label> labels;
  labels.insert(labels.end(), opts.normal, Label::normal);
  labels.insert(labels.end(), opts.mcdk, Label::mcdk);
  labels.insert(labels.end(), opts.utd, Label::utd);
  if (labels.empty()) throw ContractError("synth: nothing to generate");
  const std::uint64_t base = derive_seed(opts.seed, SeedLabel::synth);
  Rng order(base);
  order.shuffle(std::span(labels));

  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  if (opts.annotate_fraction > 0) fs::create_directories(dir / "clean");
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint64_t sample_seed = base ^ i;
    auto spec = random_phantom_spec(labels[i], opts.size, sample_seed);
    spec.speckle_sigma = opts.speckle_sigma;
    Rng extra(splitmix64(sample_seed));
    spec.annotate = opts.annotate_fraction > 0 && extra.uniform() < opts.annotate_fraction;
    const auto ph = render_phantom(spec);
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu", i);
    SampleRecord r;
    r.label = labels[i];
    r.source = "synth";
    if (spec.annotate) {
      r.path = dir / "images" / (std::string(name) + ".ppm");
      write_ppm(r.path, ph.annotated);
      write_pgm(dir / "clean" / (std::string(name) + ".pgm"), ph.image);
    } else {
      r.path = dir / "images" / (std::string(name) + ".pgm");
      write_pgm(r.path, ph.image);
    }
    write_pgm(synth_mask_path(r.path), ph.anomaly);
    records.push_back(std::move(r));
  }
  write_manifest(dir / "manifest.csv", records);
  return records;
}

}  // namespace usmae::data
