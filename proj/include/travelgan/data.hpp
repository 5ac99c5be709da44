#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "travelgan/image.hpp"
#include "travelgan/png_io.hpp"
#include "travelgan/random.hpp"
#include "travelgan/tensor.hpp"

namespace travelgan {

// ---------------------------------------------------------------------------
// Procedural two-domain synthetic data. Both domains render the same latent
// factors (occupied grid cells, palette choices, background); the beads
// domain draws them as colored discs on a ruled dark board, the grid domain
// as light squares in a dark lattice. The beads sampler places cells freely
// while the grid sampler only emits orthogonally connected layouts, so the
// beads domain has the richer configuration space.
// ---------------------------------------------------------------------------

struct Rgb {
  float r, g, b;
};

inline constexpr std::array<Rgb, 6> kPalette = {{{0.85f, 0.20f, 0.20f},
                                                 {0.90f, 0.55f, 0.15f},
                                                 {0.92f, 0.86f, 0.25f},
                                                 {0.20f, 0.75f, 0.30f},
                                                 {0.25f, 0.45f, 0.85f},
                                                 {0.60f, 0.30f, 0.75f}}};

inline constexpr std::array<Rgb, 3> kBackgrounds = {
    {{0.08f, 0.08f, 0.10f}, {0.12f, 0.10f, 0.08f}, {0.06f, 0.10f, 0.09f}}};

inline constexpr Rgb kRodColor = {0.42f, 0.40f, 0.36f};
inline constexpr Rgb kLatticeColor = {0.28f, 0.28f, 0.32f};

// Ground truth for one synthetic image.
struct FactorRecord {
  std::vector<std::pair<int, int>> cells;  // (row, col), unique
  std::vector<int> palette;                // per object, index into kPalette
  int background = 0;
  std::vector<std::pair<double, double>> centroids;  // (x, y) pixel coords
};

struct SyntheticSpec {
  int64_t image_size = 32;
  int grid = 4;
  int min_objects = 3;
  int max_objects = 6;
  int64_t count = 512;
  uint64_t seed = 0;

  int64_t cell_px() const { return image_size / grid; }

  void validate() const {
    if (grid < 2) throw ConfigError("synthetic grid must be >= 2");
    if (image_size % grid != 0) {
      throw ConfigError("image_size " + std::to_string(image_size) +
                        " not divisible by grid " + std::to_string(grid));
    }
    if (min_objects < 0 || max_objects < min_objects) {
      throw ConfigError("invalid object count range");
    }
    if (max_objects > grid * grid) {
      throw ConfigError("object count " + std::to_string(max_objects) +
                        " exceeds grid capacity " + std::to_string(grid * grid));
    }
    if (count < 0) throw ConfigError("synthetic count must be non-negative");
  }
};

namespace detail {

inline void fill_background(Tensor<float>& img, const Rgb& bg) {
  const int64_t plane = img.dim(1) * img.dim(2);
  std::fill_n(img.data.data(), plane, bg.r);
  std::fill_n(img.data.data() + plane, plane, bg.g);
  std::fill_n(img.data.data() + 2 * plane, plane, bg.b);
}

inline void blend_pixel(Tensor<float>& img, int64_t y, int64_t x, const Rgb& color,
                        float coverage) {
  const int64_t d = img.dim(1);
  const int64_t plane = d * d;
  float* px = img.data.data() + y * d + x;
  px[0] = (1.0f - coverage) * px[0] + coverage * color.r;
  px[plane] = (1.0f - coverage) * px[plane] + coverage * color.g;
  px[2 * plane] = (1.0f - coverage) * px[2 * plane] + coverage * color.b;
}

}  // namespace detail

// Colored anti-aliased discs at cell centers over horizontal rods.
inline Tensor<float> render_beads(const FactorRecord& rec, int64_t d, int grid) {
  Tensor<float> img(Shape{3, d, d});
  detail::fill_background(img, kBackgrounds[static_cast<std::size_t>(rec.background)]);
  const int64_t cell = d / grid;
  for (int r = 0; r < grid; ++r) {
    const int64_t y = r * cell + cell / 2;
    for (int64_t x = 0; x < d; ++x) detail::blend_pixel(img, y, x, kRodColor, 1.0f);
  }
  const double radius = 0.36 * static_cast<double>(cell);
  for (std::size_t i = 0; i < rec.cells.size(); ++i) {
    const auto [row, col] = rec.cells[i];
    const Rgb color = kPalette[static_cast<std::size_t>(rec.palette[i]) % kPalette.size()];
    const double cx = (col + 0.5) * static_cast<double>(cell);
    const double cy = (row + 0.5) * static_cast<double>(cell);
    const int64_t y_lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - radius - 1)));
    const int64_t y_hi = std::min<int64_t>(d - 1, static_cast<int64_t>(std::ceil(cy + radius + 1)));
    const int64_t x_lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - radius - 1)));
    const int64_t x_hi = std::min<int64_t>(d - 1, static_cast<int64_t>(std::ceil(cx + radius + 1)));
    for (int64_t y = y_lo; y <= y_hi; ++y) {
      for (int64_t x = x_lo; x <= x_hi; ++x) {
        const double dist = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        const float cov = static_cast<float>(std::clamp(radius - dist + 0.5, 0.0, 1.0));
        if (cov > 0.0f) detail::blend_pixel(img, y, x, color, cov);
      }
    }
  }
  return img;
}

// Light palette-tinted squares in a dark lattice, same factor layout.
inline Tensor<float> render_grid(const FactorRecord& rec, int64_t d, int grid) {
  Tensor<float> img(Shape{3, d, d});
  detail::fill_background(img, kBackgrounds[static_cast<std::size_t>(rec.background)]);
  const int64_t cell = d / grid;
  for (int r = 0; r <= grid; ++r) {
    const int64_t y = std::min<int64_t>(r * cell, d - 1);
    for (int64_t x = 0; x < d; ++x) detail::blend_pixel(img, y, x, kLatticeColor, 1.0f);
    for (int64_t x = 0; x < d; ++x) detail::blend_pixel(img, x, y, kLatticeColor, 1.0f);
  }
  for (std::size_t i = 0; i < rec.cells.size(); ++i) {
    const auto [row, col] = rec.cells[i];
    const Rgb tint = kPalette[static_cast<std::size_t>(rec.palette[i]) % kPalette.size()];
    const Rgb color = {0.78f + 0.22f * tint.r, 0.78f + 0.22f * tint.g, 0.78f + 0.22f * tint.b};
    for (int64_t y = row * cell + 1; y < (row + 1) * cell - 1; ++y) {
      for (int64_t x = col * cell + 1; x < (col + 1) * cell - 1; ++x) {
        detail::blend_pixel(img, y, x, color, 1.0f);
      }
    }
  }
  return img;
}

namespace detail {

inline void finish_record(FactorRecord& rec, Rng& rng, int64_t cell) {
  rec.palette.reserve(rec.cells.size());
  rec.centroids.reserve(rec.cells.size());
  for (const auto& [row, col] : rec.cells) {
    rec.palette.push_back(static_cast<int>(rng.below(static_cast<int64_t>(kPalette.size()))));
    rec.centroids.emplace_back((col + 0.5) * static_cast<double>(cell),
                               (row + 0.5) * static_cast<double>(cell));
  }
  rec.background = static_cast<int>(rng.below(static_cast<int64_t>(kBackgrounds.size())));
}

}  // namespace detail

// Free placement: any distinct set of cells.
inline FactorRecord sample_beads_factors(Rng& rng, const SyntheticSpec& spec) {
  const int total = spec.grid * spec.grid;
  const int k = spec.min_objects +
                static_cast<int>(rng.below(spec.max_objects - spec.min_objects + 1));
  auto perm = rng.permutation(total);
  FactorRecord rec;
  for (int i = 0; i < k; ++i) {
    const int cell = static_cast<int>(perm[static_cast<std::size_t>(i)]);
    rec.cells.emplace_back(cell / spec.grid, cell % spec.grid);
  }
  std::sort(rec.cells.begin(), rec.cells.end());
  detail::finish_record(rec, rng, spec.cell_px());
  return rec;
}

// Constrained placement: cells grow as an orthogonally connected component,
// the analogue of crossword layouts being a strict subset of bead layouts.
inline FactorRecord sample_grid_factors(Rng& rng, const SyntheticSpec& spec) {
  const int g = spec.grid;
  const int k = spec.min_objects +
                static_cast<int>(rng.below(spec.max_objects - spec.min_objects + 1));
  std::vector<std::pair<int, int>> cells;
  std::vector<char> taken(static_cast<std::size_t>(g * g), 0);
  auto occupy = [&](int r, int c) {
    cells.emplace_back(r, c);
    taken[static_cast<std::size_t>(r * g + c)] = 1;
  };
  if (k > 0) {
    const int start = static_cast<int>(rng.below(g * g));
    occupy(start / g, start % g);
  }
  while (static_cast<int>(cells.size()) < k) {
    std::vector<std::pair<int, int>> frontier;
    for (const auto& [r, c] : cells) {
      constexpr int dr[4] = {-1, 1, 0, 0};
      constexpr int dc[4] = {0, 0, -1, 1};
      for (int dir = 0; dir < 4; ++dir) {
        const int nr = r + dr[dir], nc = c + dc[dir];
        if (nr >= 0 && nr < g && nc >= 0 && nc < g && !taken[static_cast<std::size_t>(nr * g + nc)]) {
          frontier.emplace_back(nr, nc);
        }
      }
    }
    std::sort(frontier.begin(), frontier.end());
    frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
    const auto& pick = frontier[static_cast<std::size_t>(rng.below(
        static_cast<int64_t>(frontier.size())))];
    occupy(pick.first, pick.second);
  }
  FactorRecord rec;
  rec.cells = std::move(cells);
  std::sort(rec.cells.begin(), rec.cells.end());
  detail::finish_record(rec, rng, spec.cell_px());
  return rec;
}

struct SyntheticDataset {
  std::vector<Tensor<float>> images;  // (3,d,d), normalized to [-1,1]
  std::vector<FactorRecord> factors;
};

enum class DomainKind { Beads, Grid };

inline Tensor<float> render_domain(DomainKind kind, const FactorRecord& rec, int64_t d, int grid) {
  return kind == DomainKind::Beads ? render_beads(rec, d, grid) : render_grid(rec, d, grid);
}

namespace detail {

inline SyntheticDataset gen_domain(const SyntheticSpec& spec, DomainKind kind) {
  spec.validate();
  SyntheticDataset ds;
  ds.images.reserve(static_cast<std::size_t>(spec.count));
  ds.factors.reserve(static_cast<std::size_t>(spec.count));
  for (int64_t i = 0; i < spec.count; ++i) {
    Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(i) * 2 +
                                     (kind == DomainKind::Beads ? 0 : 1)));
    FactorRecord rec = kind == DomainKind::Beads ? sample_beads_factors(rng, spec)
                                                 : sample_grid_factors(rng, spec);
    ds.images.push_back(normalize_to_signed(render_domain(kind, rec, spec.image_size, spec.grid)));
    ds.factors.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace detail

inline SyntheticDataset gen_beads_domain(const SyntheticSpec& spec) {
  return detail::gen_domain(spec, DomainKind::Beads);
}

inline SyntheticDataset gen_grid_domain(const SyntheticSpec& spec) {
  return detail::gen_domain(spec, DomainKind::Grid);
}

// ---------------------------------------------------------------------------
// Manipulation sequences: one object relocated along a path of cells, every
// other factor frozen. `base` renders the configuration with the mover
// removed, the reference frame for change detection.
// ---------------------------------------------------------------------------

struct ManipulationStudy {
  Tensor<float> base;                        // [-1,1]
  std::vector<Tensor<float>> frames;         // [-1,1], one per path cell
  std::vector<std::pair<int, int>> cells;    // the moved-to cell per frame
};

inline std::vector<Tensor<float>> manipulation_sequence(const FactorRecord& base_factors,
                                                        const std::vector<std::pair<int, int>>& path,
                                                        DomainKind kind, int64_t d, int grid) {
  std::vector<Tensor<float>> frames;
  if (path.empty()) return frames;
  for (const auto& [r, c] : path) {
    if (r < 0 || r >= grid || c < 0 || c >= grid) {
      throw ConfigError("manipulation_sequence: path cell (" + std::to_string(r) + "," +
                        std::to_string(c) + ") outside " + std::to_string(grid) + "x" +
                        std::to_string(grid) + " grid");
    }
  }
  std::size_t mover = base_factors.cells.size();
  for (std::size_t i = 0; i < base_factors.cells.size(); ++i) {
    if (base_factors.cells[i] == path.front()) {
      mover = i;
      break;
    }
  }
  if (mover == base_factors.cells.size()) {
    throw ConfigError("manipulation_sequence: no object occupies the first path cell");
  }
  const int64_t cell = d / grid;
  for (const auto& pos : path) {
    FactorRecord rec = base_factors;
    rec.cells[mover] = pos;
    rec.centroids[mover] = {(pos.second + 0.5) * static_cast<double>(cell),
                            (pos.first + 0.5) * static_cast<double>(cell)};
    frames.push_back(normalize_to_signed(render_domain(kind, rec, d, grid)));
  }
  return frames;
}

inline ManipulationStudy manipulation_study(const FactorRecord& base_factors,
                                            const std::vector<std::pair<int, int>>& path,
                                            DomainKind kind, int64_t d, int grid) {
  ManipulationStudy study;
  study.frames = manipulation_sequence(base_factors, path, kind, d, grid);
  study.cells = path;
  std::size_t mover = base_factors.cells.size();
  for (std::size_t i = 0; i < base_factors.cells.size(); ++i) {
    if (base_factors.cells[i] == path.front()) mover = i;
  }
  FactorRecord without = base_factors;
  without.cells.erase(without.cells.begin() + static_cast<std::ptrdiff_t>(mover));
  without.palette.erase(without.palette.begin() + static_cast<std::ptrdiff_t>(mover));
  without.centroids.erase(without.centroids.begin() + static_cast<std::ptrdiff_t>(mover));
  study.base = normalize_to_signed(render_domain(kind, without, d, grid));
  return study;
}

// The nine-position study: a mover walks every cell of the top-left 3x3
// block; two fixed companions sit outside the block.
inline ManipulationStudy standard_manipulation_study(uint64_t seed, DomainKind kind, int64_t d,
                                                     int grid) {
  if (grid < 4) throw ConfigError("standard_manipulation_study: needs grid >= 4");
  std::vector<std::pair<int, int>> path;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) path.emplace_back(r, c);
  }
  Rng rng(mix_seed(seed, 0x9));
  FactorRecord base;
  base.cells = {path.front(), {0, grid - 1}, {grid - 1, 1}};
  const int64_t cell = d / grid;
  for (const auto& [row, col] : base.cells) {
    base.palette.push_back(static_cast<int>(rng.below(static_cast<int64_t>(kPalette.size()))));
    base.centroids.emplace_back((col + 0.5) * static_cast<double>(cell),
                                (row + 0.5) * static_cast<double>(cell));
  }
  base.background = static_cast<int>(rng.below(static_cast<int64_t>(kBackgrounds.size())));
  return manipulation_study(base, path, kind, d, grid);
}

// ---------------------------------------------------------------------------
// Batch sampling: per-epoch seeded permutation, remainder dropped. The batch
// for a given step is a pure function of (seed, sizes, step), which is what
// makes checkpoint resume bit-exact.
// ---------------------------------------------------------------------------

class BatchSampler {
public:
  BatchSampler(int64_t dataset_size, int64_t batch_size, uint64_t seed)
      : n_(dataset_size), batch_(batch_size), seed_(seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (dataset_size < batch_size) {
      throw ConfigError("dataset of size " + std::to_string(dataset_size) +
                        " smaller than batch_size " + std::to_string(batch_size));
    }
  }

  int64_t batches_per_epoch() const { return n_ / batch_; }

  std::vector<int64_t> batch(int64_t step) const {
    const int64_t epoch = step / batches_per_epoch();
    const int64_t slot = step % batches_per_epoch();
    Rng rng(mix_seed(seed_, static_cast<uint64_t>(epoch)));
    const auto perm = rng.permutation(n_);
    return {perm.begin() + slot * batch_, perm.begin() + (slot + 1) * batch_};
  }

private:
  int64_t n_;
  int64_t batch_;
  uint64_t seed_;
};

template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& images, const std::vector<int64_t>& indices) {
  if (indices.empty()) throw ConfigError("stack_batch: empty index list");
  const Shape& one = images.at(static_cast<std::size_t>(indices[0])).shape;
  Shape batched;
  batched.push_back(static_cast<int64_t>(indices.size()));
  batched.insert(batched.end(), one.begin(), one.end());
  Tensor<T> out(batched);
  const int64_t stride = shape_size(one);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor<T>& img = images.at(static_cast<std::size_t>(indices[i]));
    require_same_shape(img, images.at(static_cast<std::size_t>(indices[0])), "stack_batch");
    std::copy_n(img.data.data(), stride, out.data.data() + static_cast<int64_t>(i) * stride);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folder ingestion and synthetic export
// ---------------------------------------------------------------------------

struct FolderDataset {
  std::vector<Tensor<float>> images;  // (3,d,d) in [-1,1]
  std::vector<std::string> names;     // sorted file names
};

inline FolderDataset load_image_folder(const std::string& path, int64_t d) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) {
    throw ConfigError("load_image_folder: '" + path + "' is not a directory");
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw ConfigError("load_image_folder: no PNG files in '" + path + "'");

  FolderDataset ds;
  ds.names = names;
  ds.images.reserve(names.size());
  for (const std::string& name : names) {
    const ImageU8 raw = read_png((fs::path(path) / name).string());
    Tensor<float> unit = dequantize_image<float>(raw);
    if (raw.width != d || raw.height != d) unit = center_crop_resize(unit, d);
    ds.images.push_back(normalize_to_signed(unit));
  }
  return ds;
}

inline void to_json(nlohmann::json& j, const FactorRecord& rec) {
  j = nlohmann::json{{"cells", rec.cells},
                     {"palette", rec.palette},
                     {"background", rec.background},
                     {"centroids", rec.centroids}};
}

inline void from_json(const nlohmann::json& j, FactorRecord& rec) {
  j.at("cells").get_to(rec.cells);
  j.at("palette").get_to(rec.palette);
  j.at("background").get_to(rec.background);
  j.at("centroids").get_to(rec.centroids);
}

inline void export_synthetic(const SyntheticDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05zu.png", i);
    write_png((fs::path(dir) / name).string(),
              quantize_image(denormalize_to_unit(ds.images[i])));
    manifest.push_back(ds.factors[i]);
  }
  std::ofstream out(fs::path(dir) / "factors.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace travelgan
