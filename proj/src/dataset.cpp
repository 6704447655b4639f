#include "poisonguard/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "poisonguard/rng.hpp"

namespace pg {

namespace {

using json = nlohmann::json;

double clamp_pixel(double v, double pixel_max) {
  return std::min(std::max(v, 0.0), pixel_max);
}

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated file");
  return v;
}

}  // namespace

std::vector<std::size_t> Dataset::indices_of_class(std::uint16_t label) const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels[i] == label) ids.push_back(i);
  }
  return ids;
}

std::size_t Dataset::poisoned_count() const {
  std::size_t c = 0;
  for (auto f : poisoned_flags) c += (f != 0);
  return c;
}

PoisonSpec make_dot_poison(const Shape& shape, std::size_t y, std::size_t x,
                           std::span<const double> color,
                           std::uint16_t target_class,
                           std::uint16_t base_class, double ratio) {
  if (y >= shape.height || x >= shape.width)
    throw std::invalid_argument("dot position out of range");
  if (color.size() != shape.channels)
    throw std::invalid_argument("dot color must have one value per channel");
  PoisonSpec spec;
  spec.kind = PoisonKind::Dot;
  spec.mask.assign(shape.size(), 0.0);
  spec.pattern.assign(shape.size(), 0.0);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const std::size_t i = c * shape.height * shape.width + y * shape.width + x;
    spec.mask[i] = 1.0;
    spec.pattern[i] = color[c];
  }
  spec.target_class = target_class;
  spec.base_class = base_class;
  spec.ratio = ratio;
  return spec;
}

PoisonSpec make_overlay_poison(const Shape& shape, std::vector<double> pattern,
                               double opacity, std::uint16_t target_class,
                               std::uint16_t base_class, double ratio) {
  if (pattern.size() != shape.size())
    throw std::invalid_argument("pattern size does not match image size");
  PoisonSpec spec;
  spec.kind = PoisonKind::Overlay;
  spec.mask.assign(shape.size(), opacity);
  spec.pattern = std::move(pattern);
  spec.target_class = target_class;
  spec.base_class = base_class;
  spec.ratio = ratio;
  return spec;
}

std::vector<double> procedural_pattern(const Shape& shape, double pixel_max) {
  std::vector<double> p(shape.size());
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t y = 0; y < shape.height; ++y) {
      for (std::size_t x = 0; x < shape.width; ++x) {
        const double t =
            0.5 + 0.5 * std::sin(0.9 * static_cast<double>(x + 2 * y) +
                                 2.1 * static_cast<double>(c));
        p[c * shape.height * shape.width + y * shape.width + x] = t * pixel_max;
      }
    }
  }
  return p;
}

std::vector<double> apply_poison(std::span<const double> x,
                                 const PoisonSpec& spec, double pixel_max) {
  if (x.size() != spec.mask.size() || x.size() != spec.pattern.size())
    throw std::invalid_argument("apply_poison: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = spec.mask[i];
    out[i] = clamp_pixel((1.0 - m) * x[i] + m * spec.pattern[i], pixel_max);
  }
  return out;
}

Dataset poison_dataset(const Dataset& d, const PoisonSpec& spec,
                       std::uint64_t seed) {
  if (spec.base_class == spec.target_class)
    throw std::invalid_argument("base class must differ from target class");
  if (spec.base_class >= d.class_count || spec.target_class >= d.class_count)
    throw std::invalid_argument("poison classes out of range");
  if (spec.ratio <= 0.0 || spec.ratio >= 1.0)
    throw std::invalid_argument("poison ratio must be in (0, 1)");

  auto base_ids = d.indices_of_class(spec.base_class);
  const std::size_t k =
      round_half_up(spec.ratio * static_cast<double>(base_ids.size()));
  if (k == 0) throw std::invalid_argument("empty poison set");

  Rng rng(seed);
  rng.shuffle(base_ids);
  base_ids.resize(k);
  std::sort(base_ids.begin(), base_ids.end());

  Dataset out = d;
  for (std::size_t i : base_ids) {
    const auto x = apply_poison(d.image(i), spec, d.pixel_max);
    std::copy(x.begin(), x.end(), out.image(i).begin());
    out.original_labels[i] = d.labels[i];
    out.labels[i] = spec.target_class;
    out.poisoned_flags[i] = 1;
  }
  return out;
}

std::vector<double> class_template(std::size_t cls, std::size_t classes,
                                   const Shape& shape, double pixel_max) {
  // Classes come in pairs: a strong pair-specific stripe plus a weaker
  // secondary stripe whose phase distinguishes the two pair members. Every
  // class therefore has a single unambiguous nearest neighbor, mirroring
  // natural datasets where each class has one dominant confusion partner.
  // Mutually distinct and linearly separable at zero noise.
  std::vector<double> t(shape.size());
  const std::size_t pairs = (classes + 1) / 2;
  const std::size_t p = cls / 2;
  const double member = cls % 2 ? 1.0 : 0.0;
  const double angle = 3.14159265358979323846 * static_cast<double>(p) /
                       static_cast<double>(pairs);
  const double freq = 2.0 + static_cast<double>(p % 3);
  const double ca = std::cos(angle), sa = std::sin(angle);
  constexpr double kTau = 6.283185307179586;
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t y = 0; y < shape.height; ++y) {
      for (std::size_t x = 0; x < shape.width; ++x) {
        const double u = (ca * static_cast<double>(x) +
                          sa * static_cast<double>(y)) /
                         static_cast<double>(shape.width);
        const double w = (ca * static_cast<double>(y) -
                          sa * static_cast<double>(x)) /
                         static_cast<double>(shape.width);
        const double v =
            0.5 +
            0.38 * std::cos(kTau * freq * u + 0.7 * static_cast<double>(c)) +
            0.07 * std::cos(kTau * 5.0 * w +
                            3.14159265358979323846 * member);
        t[c * shape.height * shape.width + y * shape.width + x] =
            clamp_pixel(v * pixel_max, pixel_max);
      }
    }
  }
  return t;
}

Dataset make_synthetic_image_task(std::size_t classes, const Shape& shape,
                                  std::size_t samples_per_class, double noise,
                                  std::uint64_t seed) {
  if (classes < 3)
    throw std::invalid_argument("synthetic task needs at least 3 classes");
  Dataset d;
  d.shape = shape;
  d.class_count = classes;
  d.pixel_max = 255.0;
  const std::size_t n = classes * samples_per_class;
  d.pixels.resize(n * shape.size());
  d.labels.resize(n);
  d.poisoned_flags.assign(n, 0);
  d.original_labels.resize(n);

  Rng rng(seed);
  std::size_t idx = 0;
  for (std::size_t cls = 0; cls < classes; ++cls) {
    const auto tmpl = class_template(cls, classes, shape, d.pixel_max);
    for (std::size_t s = 0; s < samples_per_class; ++s, ++idx) {
      auto img = d.image(idx);
      for (std::size_t i = 0; i < tmpl.size(); ++i) {
        img[i] = clamp_pixel(tmpl[i] + noise * rng.normal(), d.pixel_max);
      }
      d.labels[idx] = static_cast<std::uint16_t>(cls);
      d.original_labels[idx] = d.labels[idx];
    }
  }
  return d;
}

Dataset load_cifar10_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  is.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(is.tellg());
  is.seekg(0);
  constexpr std::size_t kRecord = 1 + 3072;
  if (size == 0 || size % kRecord != 0)
    throw std::runtime_error("bad CIFAR-10 batch size: " + path.string());
  const std::size_t n = size / kRecord;

  Dataset d;
  d.shape = {32, 32, 3};
  d.class_count = 10;
  d.pixel_max = 255.0;
  d.pixels.resize(n * 3072);
  d.labels.resize(n);
  d.poisoned_flags.assign(n, 0);
  d.original_labels.resize(n);

  std::vector<unsigned char> rec(kRecord);
  for (std::size_t i = 0; i < n; ++i) {
    is.read(reinterpret_cast<char*>(rec.data()), kRecord);
    if (!is) throw std::runtime_error("truncated CIFAR-10 batch");
    if (rec[0] >= 10) throw std::runtime_error("CIFAR-10 label out of range");
    d.labels[i] = rec[0];
    d.original_labels[i] = rec[0];
    auto img = d.image(i);
    for (std::size_t j = 0; j < 3072; ++j)
      img[j] = static_cast<double>(rec[1 + j]);
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("PGDS", 4);
  write_pod<std::uint32_t>(os, 1);  // format version
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.shape.height));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.shape.width));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.shape.channels));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.class_count));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.size()));
  write_pod<float>(os, static_cast<float>(d.pixel_max));
  for (double p : d.pixels) write_pod<float>(os, static_cast<float>(p));
  for (std::uint16_t l : d.labels) write_pod<std::uint16_t>(os, l);
  if (!os) throw std::runtime_error("write failed: " + path.string());

  json side;
  json names = json::array();
  for (std::size_t c = 0; c < d.class_count; ++c)
    names.push_back("class_" + std::to_string(c));
  side["class_names"] = names;
  side["poisoned_flags"] = d.poisoned_flags;
  side["original_labels"] = d.original_labels;
  std::ofstream js(path.string() + ".json");
  js << side.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PGDS", 4) != 0)
    throw std::runtime_error("not a PGDS file: " + path.string());
  const auto version = read_pod<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported PGDS version");

  Dataset d;
  d.shape.height = read_pod<std::uint32_t>(is);
  d.shape.width = read_pod<std::uint32_t>(is);
  d.shape.channels = read_pod<std::uint32_t>(is);
  d.class_count = read_pod<std::uint32_t>(is);
  const auto n = read_pod<std::uint32_t>(is);
  d.pixel_max = read_pod<float>(is);
  d.pixels.resize(static_cast<std::size_t>(n) * d.dim());
  for (double& p : d.pixels) p = read_pod<float>(is);
  d.labels.resize(n);
  for (auto& l : d.labels) l = read_pod<std::uint16_t>(is);
  d.poisoned_flags.assign(n, 0);
  d.original_labels = d.labels;

  const auto side_path = path.string() + ".json";
  if (std::ifstream js(side_path); js) {
    const json side = json::parse(js);
    if (side.contains("poisoned_flags"))
      d.poisoned_flags = side["poisoned_flags"].get<std::vector<std::uint8_t>>();
    if (side.contains("original_labels"))
      d.original_labels =
          side["original_labels"].get<std::vector<std::uint16_t>>();
    if (d.poisoned_flags.size() != d.size() ||
        d.original_labels.size() != d.size())
      throw std::runtime_error("PGDS sidecar does not match dataset");
  }
  return d;
}

void write_ppm(const std::filesystem::path& path,
               std::span<const double> pixels, const Shape& shape,
               double pixel_max) {
  if (pixels.size() != shape.size())
    throw std::invalid_argument("write_ppm: dimension mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P6\n" << shape.width << " " << shape.height << "\n255\n";
  const std::size_t plane = shape.height * shape.width;
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        // Grayscale images replicate channel 0.
        const std::size_t ch = shape.channels == 3 ? c : 0;
        const double v = pixels[ch * plane + y * shape.width + x];
        const double scaled =
            pixel_max > 0.0 ? clamp_pixel(v, pixel_max) / pixel_max * 255.0
                            : 0.0;
        os.put(static_cast<char>(static_cast<unsigned char>(
            std::lround(scaled))));
      }
    }
  }
}

}  // namespace pg
