// Copyright 2026 The Invarilab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ilab/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ilab {

namespace {

constexpr double kPixelMax = 255.0;

const TransformInfo kTable[] = {
    {TransformKind::kIdentity, "identity", TransformFamily::kNone, false, false, false},
    {TransformKind::kGrayscale, "grayscale", TransformFamily::kColor, false, false, true},
    {TransformKind::kHueRotate180, "hue-rotate-180", TransformFamily::kColor, false, false, true},
    {TransformKind::kGaussianBlur, "gaussian-blur", TransformFamily::kConvolutional, true, false, false},
    {TransformKind::kHighPass, "high-pass", TransformFamily::kConvolutional, false, false, false},
    {TransformKind::kHorizontalFilter, "horizontal-filter", TransformFamily::kConvolutional, false, false, false},
    {TransformKind::kVerticalFilter, "vertical-filter", TransformFamily::kConvolutional, false, false, false},
    {TransformKind::kContrastInversion, "contrast-inversion", TransformFamily::kConvolutional, false, false, false},
    {TransformKind::kWhiteNoise, "white-noise", TransformFamily::kNoise, true, true, false},
    {TransformKind::kSaltPepper, "salt-pepper", TransformFamily::kNoise, false, true, false},
    {TransformKind::kRotate90, "rotate-90", TransformFamily::kGeometric, false, false, false},
    {TransformKind::kRotate180, "rotate-180", TransformFamily::kGeometric, false, false, false},
    {TransformKind::kThinning, "thinning", TransformFamily::kGeometric, false, false, false},
};

}  // namespace

const std::vector<TransformInfo>& transform_table() {
  static const std::vector<TransformInfo> table(std::begin(kTable), std::end(kTable));
  return table;
}

const TransformInfo& transform_info(TransformKind kind) {
  for (const auto& info : transform_table())
    if (info.kind == kind) return info;
  throw ConfigError("unknown transform kind");
}

TransformKind transform_kind_from_name(const std::string& name) {
  for (const auto& info : transform_table())
    if (name == info.name) return info.kind;
  throw ParseError("unknown transform kind '" + name + "'", 0);
}

std::string TransformSpec::to_string() const {
  std::string s = transform_info(kind).name;
  if (transform_info(kind).parameterized) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", param);
    s += ":";
    s += buf;
  }
  if (seed.has_value()) {
    if (!transform_info(kind).parameterized) s += ":";
    s += ":" + std::to_string(*seed);
  }
  return s;
}

TransformSpec parse_transform_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string::npos ? colon : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() > 3) throw ParseError("too many ':' fields in transform spec", text.rfind(':'));

  TransformSpec spec;
  spec.kind = transform_kind_from_name(parts[0]);
  const TransformInfo& info = transform_info(spec.kind);

  if (parts.size() >= 2 && !parts[1].empty()) {
    if (!info.parameterized)
      throw ParseError(std::string(info.name) + " takes no param", parts[0].size() + 1);
    std::size_t used = 0;
    try {
      spec.param = std::stod(parts[1], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != parts[1].size())
      throw ParseError("malformed number '" + parts[1] + "'", parts[0].size() + 1);
    if (spec.param <= 0.0)
      throw ParseError(std::string(info.name) + " param must be positive", parts[0].size() + 1);
  } else if (info.parameterized) {
    throw ParseError(std::string(info.name) + " requires param", parts[0].size());
  }

  if (parts.size() == 3) {
    const std::size_t pos = parts[0].size() + parts[1].size() + 2;
    if (parts[2].empty()) throw ParseError("empty seed field", pos);
    std::size_t used = 0;
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(parts[2], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != parts[2].size()) throw ParseError("malformed seed '" + parts[2] + "'", pos);
    spec.seed = seed;
  }
  return spec;
}

namespace {

void require_hwc(const Tensor& img) {
  if (img.rank() != 3)
    throw InputError("transform expects HWC image, got rank " + std::to_string(img.rank()));
}

Tensor grayscale(const Tensor& img) {
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  Tensor out(img.shape);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const double luma = 0.299 * img(y, x, 0) + 0.587 * img(y, x, 1) + 0.114 * img(y, x, 2);
      for (std::int64_t ch = 0; ch < c; ++ch) out(y, x, ch) = static_cast<float>(luma);
    }
  }
  return out;
}

// RGB<->HSV on the [0,1] scale; h in [0,1).
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = (g - b) / d;
  else if (mx == g)
    h = 2.0 + (b - r) / d;
  else
    h = 4.0 + (r - g) / d;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int i = std::min(5, static_cast<int>(hh));
  const double f = hh - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

Tensor hue_rotate_180(const Tensor& img) {
  const std::int64_t h = img.dim(0), w = img.dim(1);
  Tensor out(img.shape);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      double hue, sat, val;
      rgb_to_hsv(img(y, x, 0) / kPixelMax, img(y, x, 1) / kPixelMax, img(y, x, 2) / kPixelMax,
                 hue, sat, val);
      hue += 0.5;
      if (hue >= 1.0) hue -= 1.0;
      double r, g, b;
      hsv_to_rgb(hue, sat, val, r, g, b);
      out(y, x, 0) = static_cast<float>(r * kPixelMax);
      out(y, x, 1) = static_cast<float>(g * kPixelMax);
      out(y, x, 2) = static_cast<float>(b * kPixelMax);
    }
  }
  return out;
}

enum class Pad { kZero, kClamp };

// Separable filtering: the same 1D kernel along x then along y, per channel.
// Accumulation in double; output left unclipped.
Tensor separable_filter(const Tensor& img, const std::vector<double>& k, Pad pad) {
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const std::int64_t r = static_cast<std::int64_t>(k.size()) / 2;
  std::vector<double> tmp(static_cast<std::size_t>(h * w * c));
  const auto at_tmp = [&](std::int64_t y, std::int64_t x, std::int64_t ch) -> double& {
    return tmp[static_cast<std::size_t>((y * w + x) * c + ch)];
  };
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::int64_t t = -r; t <= r; ++t) {
          std::int64_t xi = x + t;
          double v = 0.0;
          if (pad == Pad::kClamp)
            v = img(y, std::clamp<std::int64_t>(xi, 0, w - 1), ch);
          else if (xi >= 0 && xi < w)
            v = img(y, xi, ch);
          acc += k[static_cast<std::size_t>(t + r)] * v;
        }
        at_tmp(y, x, ch) = acc;
      }
    }
  }
  Tensor out(img.shape);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::int64_t t = -r; t <= r; ++t) {
          std::int64_t yi = y + t;
          double v = 0.0;
          if (pad == Pad::kClamp)
            v = at_tmp(std::clamp<std::int64_t>(yi, 0, h - 1), x, ch);
          else if (yi >= 0 && yi < h)
            v = at_tmp(yi, x, ch);
          acc += k[static_cast<std::size_t>(t + r)] * v;
        }
        out(y, x, ch) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
  const std::int64_t r = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (std::int64_t i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;  // truncated tail renormalized to unit sum
  return separable_filter(img, k, Pad::kClamp);
}

// 3x3 kernel with every row [-1, 0, 1] (transpose for the vertical filter),
// zero padding, raw output.
Tensor edge_filter(const Tensor& img, bool horizontal) {
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  Tensor out(img.shape);
  const auto sample = [&](std::int64_t y, std::int64_t x, std::int64_t ch) -> double {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return img(y, x, ch);
  };
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::int64_t t = -1; t <= 1; ++t) {
          if (horizontal)
            acc += sample(y + t, x + 1, ch) - sample(y + t, x - 1, ch);
          else
            acc += sample(y + 1, x + t, ch) - sample(y - 1, x + t, ch);
        }
        out(y, x, ch) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor contrast_inversion(const Tensor& img) {
  Tensor out(img.shape);
  for (std::int64_t i = 0; i < img.numel(); ++i)
    out(i) = static_cast<float>(kPixelMax) - img(i);
  return out;
}

Tensor white_noise(const Tensor& img, double sigma, Rng& rng) {
  Tensor out(img.shape);
  for (std::int64_t i = 0; i < img.numel(); ++i) {
    const double v = img(i) + rng.normal(0.0, sigma);
    out(i) = static_cast<float>(std::clamp(v, 0.0, kPixelMax));
  }
  return out;
}

// Exactly floor(H*W/2) pixel locations, drawn without replacement; each
// chosen pixel goes to 0 or 255 across all channels with equal probability.
Tensor salt_pepper(const Tensor& img, Rng& rng) {
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const std::int64_t total = h * w;
  const std::int64_t npick = total / 2;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  Tensor out = img;
  for (std::int64_t i = 0; i < npick; ++i) {
    const std::int64_t j =
        i + static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(total - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    const float v = rng.bernoulli(0.5) ? 255.0f : 0.0f;
    const std::int64_t p = idx[static_cast<std::size_t>(i)];
    for (std::int64_t ch = 0; ch < c; ++ch) out((p / w), (p % w), ch) = v;
  }
  return out;
}

Tensor rotate90(const Tensor& img) {  // anticlockwise
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  Tensor out({w, h, c});
  for (std::int64_t y = 0; y < w; ++y)
    for (std::int64_t x = 0; x < h; ++x)
      for (std::int64_t ch = 0; ch < c; ++ch) out(y, x, ch) = img(x, w - 1 - y, ch);
  return out;
}

Tensor rotate180(const Tensor& img) {
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  Tensor out(img.shape);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t ch = 0; ch < c; ++ch) out(y, x, ch) = img(h - 1 - y, w - 1 - x, ch);
  return out;
}

// Width halved by averaging horizontal pixel pairs, zero columns padded on
// both sides; total width unchanged. Odd widths drop the last column.
Tensor thinning(const Tensor& img) {
  const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  const std::int64_t half = w / 2;
  const std::int64_t left = (w - half) / 2;
  Tensor out(img.shape);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t i = 0; i < half; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch)
        out(y, left + i, ch) = 0.5f * (img(y, 2 * i, ch) + img(y, 2 * i + 1, ch));
  return out;
}

}  // namespace

Tensor apply_transform(const Tensor& image, const TransformSpec& spec, Rng& rng) {
  require_hwc(image);
  const TransformInfo& info = transform_info(spec.kind);
  if (info.color_only && image.dim(2) != 3)
    throw InputError(std::string(info.name) + " requires a 3-channel image, got " +
                     std::to_string(image.dim(2)));
  if (info.parameterized && spec.param <= 0.0)
    throw ConfigError(std::string(info.name) + " requires param > 0");

  switch (spec.kind) {
    case TransformKind::kIdentity: return image;
    case TransformKind::kGrayscale: return grayscale(image);
    case TransformKind::kHueRotate180: return hue_rotate_180(image);
    case TransformKind::kGaussianBlur: return gaussian_blur(image, spec.param);
    case TransformKind::kHighPass:
      return separable_filter(image, {-1.0, 2.0, 4.0, 2.0, -1.0}, Pad::kZero);
    case TransformKind::kHorizontalFilter: return edge_filter(image, true);
    case TransformKind::kVerticalFilter: return edge_filter(image, false);
    case TransformKind::kContrastInversion: return contrast_inversion(image);
    case TransformKind::kWhiteNoise: return white_noise(image, spec.param, rng);
    case TransformKind::kSaltPepper: return salt_pepper(image, rng);
    case TransformKind::kRotate90: return rotate90(image);
    case TransformKind::kRotate180: return rotate180(image);
    case TransformKind::kThinning: return thinning(image);
  }
  throw ConfigError("unreachable transform kind");
}

Tensor apply_transform(const Tensor& image, const TransformSpec& spec) {
  if (transform_info(spec.kind).stochastic && !spec.seed.has_value())
    throw ConfigError(std::string(transform_info(spec.kind).name) +
                      " is stochastic and needs a seed");
  Rng rng(spec.seed.value_or(0));
  return apply_transform(image, spec, rng);
}

CalibrationResult calibrate_transform(TransformKind kind, double param_step,
                                      const std::function<double(const TransformSpec&)>& accuracy_of,
                                      double threshold_acc) {
  if (!transform_info(kind).parameterized)
    throw ConfigError(std::string(transform_info(kind).name) + " has no parameter to calibrate");
  if (param_step <= 0.0) throw ConfigError("calibration step must be positive");

  CalibrationResult result;
  result.kind = kind;
  result.threshold_acc = threshold_acc;
  for (int i = 1; i <= kCalibrationSweepCap; ++i) {
    TransformSpec spec;
    spec.kind = kind;
    spec.param = param_step * i;
    const double acc = accuracy_of(spec);
    result.sweep.emplace_back(spec.param, acc);
    if (acc < threshold_acc) {
      result.chosen_param = spec.param;
      return result;
    }
  }
  throw CalibrationError("calibration swept " + std::to_string(kCalibrationSweepCap) +
                             " steps without dropping below the accuracy threshold",
                         result.sweep);
}

}  // namespace ilab
