#include "gabornoise/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gabornoise/error.hpp"
#include "gabornoise/io.hpp"
#include "gabornoise/rng.hpp"

namespace gabornoise {

namespace fs = std::filesystem;

namespace {

bool has_png_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

void check_all_shapes(const Dataset& d, const ImageShape& expected) {
  std::string offenders;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d.images[i].shape == expected)) {
      if (bad < 20) offenders += "\n  " + d.names[i] + " is " + to_string(d.images[i].shape);
      ++bad;
    }
  }
  if (bad > 0) {
    if (bad > 20) offenders += "\n  ... and " + std::to_string(bad - 20) + " more";
    throw Error(Errc::shape_mismatch, std::to_string(bad) + " image(s) do not match " + to_string(expected) + ":" +
                                          offenders);
  }
}

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(Errc::invalid_argument, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

Dataset load_dataset(const fs::path& path, const ImageShape& expected_shape) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(Errc::unreadable_file, "dataset not found: " + path.string());

  Dataset d;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && has_png_extension(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    for (const auto& f : files) {
      d.images.push_back(read_png_rgb(f));
      d.names.push_back(f.filename().string());
    }
  } else {
    d.images = read_tensor_file(path);
    const std::string base = path.filename().string();
    for (std::size_t i = 0; i < d.images.size(); ++i) d.names.push_back(base + "#" + std::to_string(i));
  }
  if (d.empty()) throw Error(Errc::empty_dataset, "no images in " + path.string());
  check_all_shapes(d, expected_shape);
  return d;
}

Dataset synthetic_dataset(std::size_t count, const ImageShape& shape, std::uint64_t seed) {
  if (shape.width < 1 || shape.height < 1 || shape.channels < 1) {
    throw Error(Errc::invalid_argument, "bad synthetic image shape " + to_string(shape));
  }
  Dataset d;
  d.images.reserve(count);
  const double w = shape.width;
  const double h = shape.height;
  const double scale = std::min(w, h);
  for (std::size_t n = 0; n < count; ++n) {
    SplitMix64 rng(mix_seed(seed, n));
    std::vector<double> buf(shape.size());
    std::vector<double> base(static_cast<std::size_t>(shape.channels));
    std::vector<double> gx(base.size());
    std::vector<double> gy(base.size());
    for (std::size_t c = 0; c < base.size(); ++c) {
      base[c] = rng.uniform(60.0, 196.0);
      gx[c] = rng.uniform(-60.0, 60.0);
      gy[c] = rng.uniform(-60.0, 60.0);
    }
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        for (int c = 0; c < shape.channels; ++c) {
          const auto ci = static_cast<std::size_t>(c);
          buf[shape.index(x, y, c)] = base[ci] + gx[ci] * (x / w - 0.5) + gy[ci] * (y / h - 0.5);
        }
      }
    }
    const int blobs = 3 + static_cast<int>(rng.next() % 4);
    for (int b = 0; b < blobs; ++b) {
      const double cx = rng.uniform(0.0, w);
      const double cy = rng.uniform(0.0, h);
      const double radius = rng.uniform(0.08, 0.3) * scale;
      std::vector<double> amp(base.size());
      for (double& a : amp) a = rng.uniform(-90.0, 90.0);
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (radius * radius);
          const double g = std::exp(-0.5 * r2);
          for (int c = 0; c < shape.channels; ++c) buf[shape.index(x, y, c)] += amp[static_cast<std::size_t>(c)] * g;
        }
      }
    }
    const int gratings = 2 + static_cast<int>(rng.next() % 3);
    for (int g = 0; g < gratings; ++g) {
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double period = rng.uniform(3.0, 16.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double amp = rng.uniform(10.0, 40.0);
      const double fx = std::cos(angle) * 2.0 * std::numbers::pi / period;
      const double fy = std::sin(angle) * 2.0 * std::numbers::pi / period;
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          const double v = amp * std::sin(fx * x + fy * y + phase);
          for (int c = 0; c < shape.channels; ++c) buf[shape.index(x, y, c)] += v;
        }
      }
    }
    {
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double offset = rng.uniform(-0.25, 0.25) * scale;
      const double half = rng.uniform(0.05, 0.15) * scale;
      const double amp = rng.uniform(-70.0, 70.0);
      const double nx = std::cos(angle);
      const double ny = std::sin(angle);
      for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
          const double dist = std::abs((x - w / 2) * nx + (y - h / 2) * ny - offset);
          const double g = 1.0 / (1.0 + std::exp((dist - half) / 1.5));
          for (int c = 0; c < shape.channels; ++c) buf[shape.index(x, y, c)] += amp * g;
        }
      }
    }
    std::vector<float> values(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) values[i] = static_cast<float>(std::clamp(std::round(buf[i]), 0.0, 255.0));
    d.images.emplace_back(shape, std::move(values));
    d.names.push_back("synthetic_" + std::to_string(n));
  }
  return d;
}

Dataset resolve_dataset(std::string_view source, const ImageShape& expected_shape) {
  constexpr std::string_view prefix = "synthetic:";
  if (source.substr(0, prefix.size()) == prefix) {
    const std::string_view rest = source.substr(prefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
      throw Error(Errc::invalid_argument, "synthetic dataset must be 'synthetic:<count>:<seed>'");
    }
    const auto count = parse_u64(rest.substr(0, colon), "synthetic image count");
    const auto seed = parse_u64(rest.substr(colon + 1), "synthetic dataset seed");
    if (count == 0) throw Error(Errc::empty_dataset, "synthetic dataset with zero images");
    return synthetic_dataset(count, expected_shape, seed);
  }
  return load_dataset(fs::path(std::string(source)), expected_shape);
}

std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= total) return idx;
  // Partial Fisher-Yates driven by SplitMix64; bounded draws use rejection
  // so the result does not depend on the standard library.
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t range = total - i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t r = rng.next();
    while (r >= limit) r = rng.next();
    std::swap(idx[i], idx[i + static_cast<std::size_t>(r % range)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Dataset subset(const Dataset& d, const std::vector<std::size_t>& indices) {
  Dataset out;
  for (auto i : indices) {
    if (i >= d.size()) {
      throw Error(Errc::out_of_range, "index " + std::to_string(i) + " outside a dataset of " + std::to_string(d.size()));
    }
    out.images.push_back(d.images[i]);
    out.names.push_back(d.names[i]);
  }
  return out;
}

}  // namespace gabornoise
