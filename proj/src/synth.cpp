#include "rseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rseg/params.hpp"
#include "rseg/text_encoder.hpp"

namespace rseg {

namespace {

constexpr std::array kKinds{ShapeKind::kSquare, ShapeKind::kCircle, ShapeKind::kTriangle};
constexpr std::array kColors{Color::kRed, Color::kGreen, Color::kBlue, Color::kYellow};
constexpr std::array kSides{Side::kLeft, Side::kRight, Side::kTop, Side::kBottom};
constexpr std::size_t kGap = 2;
constexpr int kPlacementTries = 200;
constexpr int kSceneTries = 100;

bool boxes_clear(const ShapeInstance& a, const ShapeInstance& b) {
  return a.x0 + a.size + kGap <= b.x0 || b.x0 + b.size + kGap <= a.x0 || a.y0 + a.size + kGap <= b.y0 ||
         b.y0 + b.size + kGap <= a.y0;
}

bool inside_triangle(double px, double py, const ShapeInstance& s) {
  const double ax = s.center_x(), ay = static_cast<double>(s.y0);
  const double bx = static_cast<double>(s.x0), by = static_cast<double>(s.y0 + s.size);
  const double cx = static_cast<double>(s.x0 + s.size), cy = by;
  auto edge = [&](double x0, double y0, double x1, double y1) { return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0); };
  const double e0 = edge(ax, ay, bx, by), e1 = edge(bx, by, cx, cy), e2 = edge(cx, cy, ax, ay);
  return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

bool covers(const ShapeInstance& s, std::size_t row, std::size_t col) {
  if (col < s.x0 || col >= s.x0 + s.size || row < s.y0 || row >= s.y0 + s.size) return false;
  const double px = static_cast<double>(col) + 0.5, py = static_cast<double>(row) + 0.5;
  switch (s.kind) {
    case ShapeKind::kSquare:
      return true;
    case ShapeKind::kCircle: {
      const double r = static_cast<double>(s.size) / 2.0;
      const double dx = px - s.center_x(), dy = py - s.center_y();
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeKind::kTriangle:
      return inside_triangle(px, py, s);
  }
  return false;
}

Side opposite(Side side) {
  switch (side) {
    case Side::kLeft: return Side::kRight;
    case Side::kRight: return Side::kLeft;
    case Side::kTop: return Side::kBottom;
    case Side::kBottom: return Side::kTop;
  }
  return side;
}

struct Placer {
  Rng& rng;
  std::size_t width, height;
  std::size_t margin;

  // Inclusive range of box origins along one axis keeping the center at least
  // `margin` inside the requested half (or anywhere when no side applies).
  std::pair<std::int64_t, std::int64_t> range(std::size_t extent, std::size_t size, int half) const {
    const auto lo_all = std::int64_t{0};
    const auto hi_all = static_cast<std::int64_t>(extent - size);
    const double mid = static_cast<double>(extent) / 2.0, half_size = static_cast<double>(size) / 2.0;
    if (half < 0) return {lo_all, std::min(hi_all, static_cast<std::int64_t>(std::floor(mid - margin - half_size)))};
    if (half > 0) return {std::max(lo_all, static_cast<std::int64_t>(std::ceil(mid + margin - half_size))), hi_all};
    return {lo_all, hi_all};
  }

  std::optional<ShapeInstance> place(ShapeKind kind, Color color, std::size_t size, std::optional<Side> side,
                                     const std::vector<ShapeInstance>& placed) {
    if (size > width || size > height) return std::nullopt;
    int hx = 0, hy = 0;
    if (side == Side::kLeft) hx = -1;
    if (side == Side::kRight) hx = 1;
    if (side == Side::kTop) hy = -1;
    if (side == Side::kBottom) hy = 1;
    const auto [xlo, xhi] = range(width, size, hx);
    const auto [ylo, yhi] = range(height, size, hy);
    if (xlo > xhi || ylo > yhi) return std::nullopt;
    for (int t = 0; t < kPlacementTries; ++t) {
      ShapeInstance s{kind, color, static_cast<std::size_t>(rng.uniform_int(xlo, xhi)),
                      static_cast<std::size_t>(rng.uniform_int(ylo, yhi)), size};
      if (std::all_of(placed.begin(), placed.end(), [&](const auto& p) { return boxes_clear(s, p); })) return s;
    }
    return std::nullopt;
  }
};

template <typename T, std::size_t N>
T pick(Rng& rng, const std::array<T, N>& items) {
  return items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(N) - 1))];
}

std::optional<Scene> draw_scene(Rng& rng, const SynthOptions& opt, std::optional<Side> side, std::size_t min_size,
                                std::size_t max_size) {
  Placer placer{rng, opt.width, opt.height, std::max<std::size_t>(2, std::min(opt.width, opt.height) / 16)};
  const auto n = static_cast<std::size_t>(rng.uniform_int(2, 4));
  const auto kind = pick(rng, kKinds);
  const auto color = pick(rng, kColors);
  auto random_size = [&] {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(min_size), static_cast<std::int64_t>(max_size)));
  };
  const auto size = random_size();

  std::vector<ShapeInstance> shapes;
  auto referent = placer.place(kind, color, size, side, shapes);
  if (!referent) return std::nullopt;
  shapes.push_back(*referent);
  if (side) {
    auto twin = placer.place(kind, color, size, opposite(*side), shapes);
    if (!twin) return std::nullopt;
    shapes.push_back(*twin);
  }
  while (shapes.size() < n) {
    ShapeKind k;
    Color c;
    do {
      k = pick(rng, kKinds);
      c = pick(rng, kColors);
    } while (k == kind && c == color);
    auto other = placer.place(k, c, random_size(), std::nullopt, shapes);
    if (!other) return std::nullopt;
    shapes.push_back(*other);
  }

  // Random draw order; the referent moves with the permutation.
  std::vector<std::size_t> order(shapes.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Scene scene{opt.width, opt.height, {}, 0, {}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    scene.shapes.push_back(shapes[order[i]]);
    if (order[i] == 0) scene.referent = i;
  }
  const std::string noun = std::string(name_of(color)) + " " + std::string(name_of(kind));
  scene.expression = "the " + noun;
  if (side.has_value()) scene.expression = noun + " on the " + std::string(name_of(side.value()));
  return scene;
}

}  // namespace

std::string_view name_of(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSquare: return "square";
    case ShapeKind::kCircle: return "circle";
    case ShapeKind::kTriangle: return "triangle";
  }
  return "?";
}

std::string_view name_of(Color color) {
  switch (color) {
    case Color::kRed: return "red";
    case Color::kGreen: return "green";
    case Color::kBlue: return "blue";
    case Color::kYellow: return "yellow";
  }
  return "?";
}

std::string_view name_of(Side side) {
  switch (side) {
    case Side::kLeft: return "left";
    case Side::kRight: return "right";
    case Side::kTop: return "top";
    case Side::kBottom: return "bottom";
  }
  return "?";
}

std::array<std::uint8_t, 3> rgb_of(Color color) {
  switch (color) {
    case Color::kRed: return {220, 50, 50};
    case Color::kGreen: return {50, 200, 60};
    case Color::kBlue: return {50, 80, 230};
    case Color::kYellow: return {230, 210, 40};
  }
  return {0, 0, 0};
}

Mask rasterize(const ShapeInstance& shape, std::size_t height, std::size_t width) {
  Mask mask(height, width);
  for (std::size_t r = shape.y0; r < std::min(height, shape.y0 + shape.size); ++r)
    for (std::size_t c = shape.x0; c < std::min(width, shape.x0 + shape.size); ++c)
      if (covers(shape, r, c)) mask.at(r, c) = 1;
  return mask;
}

RgbImage render(const Scene& scene) {
  RgbImage image{scene.width, scene.height, std::vector<std::uint8_t>(3 * scene.width * scene.height, 0)};
  for (const auto& shape : scene.shapes) {
    const auto rgb = rgb_of(shape.color);
    const auto mask = rasterize(shape, scene.height, scene.width);
    for (std::size_t p = 0; p < mask.size(); ++p)
      if (mask.bits[p])
        for (std::size_t c = 0; c < 3; ++c) image.pixels[3 * p + c] = rgb[c];
  }
  return image;
}

bool on_side(const ShapeInstance& shape, Side side, std::size_t width, std::size_t height) {
  const double mx = static_cast<double>(width) / 2.0, my = static_cast<double>(height) / 2.0;
  switch (side) {
    case Side::kLeft: return shape.center_x() < mx;
    case Side::kRight: return shape.center_x() > mx;
    case Side::kTop: return shape.center_y() < my;
    case Side::kBottom: return shape.center_y() > my;
  }
  return false;
}

std::vector<std::size_t> resolve_expression(const Scene& scene, std::string_view expression) {
  const auto tokens = tokenize(expression);
  std::optional<Color> color;
  std::optional<ShapeKind> kind;
  std::optional<Side> side;
  // "the <color> <shape>" | "<color> <shape> on the <side>"
  std::size_t i = 0;
  if (tokens.size() == 3 && tokens[0] == "the") i = 1;
  else if (tokens.size() != 5 || tokens[2] != "on" || tokens[3] != "the") return {};
  for (auto c : kColors)
    if (tokens[i] == name_of(c)) color = c;
  for (auto k : kKinds)
    if (tokens[i + 1] == name_of(k)) kind = k;
  if (tokens.size() == 5) {
    for (auto s : kSides)
      if (tokens[4] == name_of(s)) side = s;
    if (!side) return {};
  }
  if (!color || !kind) return {};
  std::vector<std::size_t> hits;
  for (std::size_t k = 0; k < scene.shapes.size(); ++k) {
    const auto& s = scene.shapes[k];
    if (s.color == *color && s.kind == *kind && (!side || on_side(s, *side, scene.width, scene.height))) {
      hits.push_back(k);
    }
  }
  return hits;
}

std::array<std::size_t, 3> split_counts(std::size_t count, const std::array<std::size_t, 3>& ratio) {
  const auto total = ratio[0] + ratio[1] + ratio[2];
  if (total == 0) throw ContractError("split ratio must not be all zero");
  const auto train = count * ratio[0] / total;
  const auto val = count * ratio[1] / total;
  return {train, val, count - train - val};
}

std::vector<GeneratedSample> generate(const SynthOptions& opt) {
  if (opt.count == 0) throw ContractError("generate: count must be >= 1");
  if (opt.width < 16 || opt.height < 16) throw ContractError("generate: canvas must be at least 16x16");
  const auto side_len = std::min(opt.width, opt.height);
  const auto min_size = opt.min_size ? opt.min_size : std::max<std::size_t>(4, side_len * 7 / 32);
  const auto max_size = opt.max_size ? opt.max_size : std::max(min_size, side_len * 11 / 32);
  if (min_size > max_size) throw ContractError("generate: min_size exceeds max_size");

  Rng rng(opt.seed);
  const auto counts = split_counts(opt.count, opt.split_ratio);
  std::vector<GeneratedSample> out;
  std::size_t spatial_emitted = 0;
  while (out.size() < opt.count) {
    const bool spatial = rng.uniform() < opt.spatial_fraction;
    std::optional<Side> side;
    if (spatial) side.emplace(kSides[spatial_emitted % kSides.size()]);
    std::optional<Scene> scene;
    for (int t = 0; t < kSceneTries && !scene; ++t) {
      scene = draw_scene(rng, opt, side, min_size, max_size);
      // Never emit an expression that does not single out the referent.
      if (scene) {
        const auto hits = resolve_expression(*scene, scene->expression);
        if (hits.size() != 1 || hits[0] != scene->referent) scene.reset();
      }
    }
    if (!scene) throw DataError("generate: could not place shapes on a " + std::to_string(opt.width) + "x" +
                                std::to_string(opt.height) + " canvas");
    if (spatial) ++spatial_emitted;
    GeneratedSample sample;
    sample.mask = rasterize(scene->shapes[scene->referent], opt.height, opt.width);
    sample.scene = std::move(*scene);
    const auto index = out.size();
    sample.split = std::string(index < counts[0] ? kSplitNames[0] : index < counts[0] + counts[1] ? kSplitNames[1] : kSplitNames[2]);
    out.push_back(std::move(sample));
  }
  return out;
}

std::filesystem::path write_corpus(const std::vector<GeneratedSample>& samples, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw DataError("cannot create corpus directories under " + dir.string() + ": " + ec.message());
  const auto manifest_path = dir / "manifest.tsv";
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest) throw DataError("cannot write " + manifest_path.string());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%06zu", i);
    const fs::path image = fs::path("images") / (std::string(stem) + ".ppm");
    const fs::path mask = fs::path("masks") / (std::string(stem) + ".pgm");
    write_ppm(dir / image, render(samples[i].scene));
    write_pgm(dir / mask, to_gray(samples[i].mask));
    manifest << image.generic_string() << '\t' << mask.generic_string() << '\t' << samples[i].split << '\t'
             << samples[i].scene.expression << '\n';
  }
  if (!manifest) throw DataError("failed writing " + manifest_path.string());
  return manifest_path;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (int f = 0; f < 3; ++f) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) break;
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    fields.push_back(line.substr(start));
    if (std::find(kSplitNames.begin(), kSplitNames.end(), fields[2]) == kSplitNames.end()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown split tag '" + fields[2] + "'");
    }
    records.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  if (records.empty()) throw ContractError("manifest " + path.string() + " has no records");
  return records;
}

Sample to_sample(const GeneratedSample& generated) {
  return {to_tensor(render(generated.scene)), generated.mask, generated.scene.expression,
          tokenize(generated.scene.expression), generated.split};
}

std::vector<Sample> to_samples(const std::vector<GeneratedSample>& generated, std::optional<std::string_view> split) {
  std::vector<Sample> out;
  for (const auto& g : generated)
    if (!split || g.split == *split) out.push_back(to_sample(g));
  return out;
}

std::vector<Sample> load_manifest(const std::filesystem::path& path, std::optional<std::string_view> split) {
  const auto records = read_manifest(path);
  const auto base = path.parent_path();
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (split && r.split != *split) continue;
    const auto where = "manifest record " + std::to_string(i + 1) + " (" + r.image.generic_string() + ")";
    try {
      const auto image = read_ppm(base / r.image);
      const auto mask = to_mask(read_pgm(base / r.mask));
      if (mask.width != image.width || mask.height != image.height) throw DataError("image and mask extents differ");
      samples.push_back({to_tensor(image), mask, r.expression, tokenize(r.expression), r.split});
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return samples;
}

}  // namespace rseg
