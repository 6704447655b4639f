#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pg {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;
};

// Images are stored channel-planar: pixel (c, y, x) lives at
// c*h*w + y*w + x. This matches the CIFAR-10 binary layout directly.
struct Dataset {
  Shape shape;
  std::size_t class_count = 0;
  double pixel_max = 255.0;
  std::vector<double> pixels;  // sample-major, size() * dim() values
  std::vector<std::uint16_t> labels;
  std::vector<std::uint8_t> poisoned_flags;       // ground truth bookkeeping
  std::vector<std::uint16_t> original_labels;     // pre-flip labels

  std::size_t dim() const { return shape.size(); }
  std::size_t size() const { return labels.size(); }

  std::span<double> image(std::size_t i) {
    return {pixels.data() + i * dim(), dim()};
  }
  std::span<const double> image(std::size_t i) const {
    return {pixels.data() + i * dim(), dim()};
  }

  std::vector<std::size_t> indices_of_class(std::uint16_t label) const;
  std::size_t poisoned_count() const;
};

enum class PoisonKind { Overlay, Dot };

struct PoisonSpec {
  std::vector<double> mask;     // per-pixel blend weights in [0, 1]
  std::vector<double> pattern;  // pixel vector, same length as an image
  std::uint16_t target_class = 0;
  std::uint16_t base_class = 0;
  double ratio = 0.0;  // poison ratio epsilon in (0, 1)
  PoisonKind kind = PoisonKind::Dot;
};

// Dot poison: mask is 1 on all channels of the given (y, x) pixel, 0
// elsewhere; pattern carries the color there.
PoisonSpec make_dot_poison(const Shape& shape, std::size_t y, std::size_t x,
                           std::span<const double> color,
                           std::uint16_t target_class,
                           std::uint16_t base_class, double ratio);

// Overlay poison: constant mask == opacity over the whole image.
PoisonSpec make_overlay_poison(const Shape& shape,
                               std::vector<double> pattern, double opacity,
                               std::uint16_t target_class,
                               std::uint16_t base_class, double ratio);

// Deterministic procedural overlay pattern (stripes), stand-in for an
// external poison image.
std::vector<double> procedural_pattern(const Shape& shape, double pixel_max);

// x'_i = (1 - m_i) x_i + m_i p_i, clamped to [0, pixel_max].
std::vector<double> apply_poison(std::span<const double> x,
                                 const PoisonSpec& spec,
                                 double pixel_max = 255.0);

// Poisons exactly round-half-up(ratio * |base class|) base-class samples,
// chosen by a seeded draw without replacement, and relabels them to the
// target class. Throws if the poison set would be empty.
Dataset poison_dataset(const Dataset& d, const PoisonSpec& spec,
                       std::uint64_t seed);

// Synthetic classification task: each class is a distinct deterministic
// stripe template plus Gaussian pixel noise, clamped to the pixel range.
Dataset make_synthetic_image_task(std::size_t classes, const Shape& shape,
                                  std::size_t samples_per_class, double noise,
                                  std::uint64_t seed);

// Class template used by make_synthetic_image_task, exposed for oracles.
std::vector<double> class_template(std::size_t cls, std::size_t classes,
                                   const Shape& shape, double pixel_max);

// Standard CIFAR-10 binary batch (label byte + 3072 pixel bytes per record).
Dataset load_cifar10_binary(const std::filesystem::path& path);

// Versioned binary dataset file ("PGDS") plus a JSON sidecar at
// path.string() + ".json" holding class names and poison ground truth.
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// P6 export; pixel values scaled by pixel_max.
void write_ppm(const std::filesystem::path& path,
               std::span<const double> pixels, const Shape& shape,
               double pixel_max);

}  // namespace pg
