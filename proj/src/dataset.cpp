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

#include "ilab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ilab/rng.hpp"

namespace ilab {

void LabeledDataset::validate(int min_per_category) const {
  if (images.size() != labels.size())
    throw InputError("dataset has " + std::to_string(images.size()) + " images but " +
                     std::to_string(labels.size()) + " labels");
  if (category_count < 1) throw InputError("dataset category count must be positive");
  std::vector<int> per_cat(static_cast<std::size_t>(category_count), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= category_count)
      throw InputError("label " + std::to_string(labels[i]) + " out of range at sample " +
                       std::to_string(i));
    ++per_cat[static_cast<std::size_t>(labels[i])];
    if (!images[i].same_shape(images[0]))
      throw InputError("sample " + std::to_string(i) + " shape " + shape_string(images[i].shape) +
                       " differs from " + shape_string(images[0].shape));
  }
  for (int c = 0; c < category_count; ++c) {
    if (per_cat[static_cast<std::size_t>(c)] < min_per_category)
      throw InputError("category " + std::to_string(c) + " has fewer than " +
                       std::to_string(min_per_category) + " samples");
  }
}

namespace {

struct Pt {
  double x, y;
};

// Distance from a point to a segment, in glyph-local [0,1] coordinates.
double seg_dist(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double vv = vx * vx + vy * vy;
  const double t = vv > 0.0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

struct Glyph {
  std::vector<std::pair<Pt, Pt>> segments;
  std::vector<std::pair<Pt, double>> rings;  // center, radius
};

// Twelve handcrafted high-contrast stroke glyphs; categories beyond 12 reuse
// them rotated in 30-degree steps, which keeps arbitrary category counts
// working at decreasing visual distinctness.
Glyph base_glyph(int id) {
  Glyph g;
  auto seg = [&](double x0, double y0, double x1, double y1) {
    g.segments.push_back({{x0, y0}, {x1, y1}});
  };
  switch (id % 12) {
    case 0:  // circle
      g.rings.push_back({{0.5, 0.5}, 0.32});
      break;
    case 1:  // square
      seg(0.2, 0.2, 0.8, 0.2); seg(0.8, 0.2, 0.8, 0.8);
      seg(0.8, 0.8, 0.2, 0.8); seg(0.2, 0.8, 0.2, 0.2);
      break;
    case 2:  // triangle
      seg(0.5, 0.15, 0.85, 0.8); seg(0.85, 0.8, 0.15, 0.8); seg(0.15, 0.8, 0.5, 0.15);
      break;
    case 3:  // plus
      seg(0.5, 0.15, 0.5, 0.85); seg(0.15, 0.5, 0.85, 0.5);
      break;
    case 4:  // X
      seg(0.18, 0.18, 0.82, 0.82); seg(0.82, 0.18, 0.18, 0.82);
      break;
    case 5:  // T
      seg(0.15, 0.2, 0.85, 0.2); seg(0.5, 0.2, 0.5, 0.85);
      break;
    case 6:  // L
      seg(0.25, 0.15, 0.25, 0.8); seg(0.25, 0.8, 0.8, 0.8);
      break;
    case 7:  // three horizontal bars
      seg(0.2, 0.25, 0.8, 0.25); seg(0.2, 0.5, 0.8, 0.5); seg(0.2, 0.75, 0.8, 0.75);
      break;
    case 8:  // three vertical bars
      seg(0.25, 0.2, 0.25, 0.8); seg(0.5, 0.2, 0.5, 0.8); seg(0.75, 0.2, 0.75, 0.8);
      break;
    case 9:  // diamond
      seg(0.5, 0.12, 0.88, 0.5); seg(0.88, 0.5, 0.5, 0.88);
      seg(0.5, 0.88, 0.12, 0.5); seg(0.12, 0.5, 0.5, 0.12);
      break;
    case 10:  // Z
      seg(0.2, 0.2, 0.8, 0.2); seg(0.8, 0.2, 0.2, 0.8); seg(0.2, 0.8, 0.8, 0.8);
      break;
    default:  // U
      seg(0.22, 0.15, 0.22, 0.75); seg(0.22, 0.75, 0.78, 0.75); seg(0.78, 0.75, 0.78, 0.15);
      break;
  }
  const int variant = id / 12;
  if (variant > 0) {
    const double angle = variant * (3.14159265358979323846 / 6.0);
    const double ca = std::cos(angle), sa = std::sin(angle);
    auto rot = [&](Pt p) -> Pt {
      const double x = p.x - 0.5, y = p.y - 0.5;
      return {0.5 + ca * x - sa * y, 0.5 + sa * x + ca * y};
    };
    for (auto& s : g.segments) {
      s.first = rot(s.first);
      s.second = rot(s.second);
    }
    for (auto& r : g.rings) r.first = rot(r.first);
  }
  return g;
}

double glyph_coverage(const Glyph& g, Pt p, double stroke, double aa) {
  double d = 1e9;
  for (const auto& s : g.segments) d = std::min(d, seg_dist(p, s.first, s.second));
  for (const auto& r : g.rings) {
    const double dc = std::hypot(p.x - r.first.x, p.y - r.first.y);
    d = std::min(d, std::abs(dc - r.second));
  }
  // 1 inside the stroke, 0 outside, linear ramp of width aa.
  return std::clamp((stroke - d) / aa + 0.5, 0.0, 1.0);
}

}  // namespace

LabeledDataset generate_synthetic(int category_count, int samples_per_category,
                                  int image_size, std::uint64_t seed) {
  if (category_count < 2) throw InputError("need at least 2 categories");
  if (samples_per_category < 2) throw InputError("need at least 2 samples per category");
  if (image_size < 16) throw InputError("image size must be >= 16");

  LabeledDataset ds;
  ds.category_count = category_count;
  ds.provenance = "synthetic(categories=" + std::to_string(category_count) +
                  ",samples=" + std::to_string(samples_per_category) +
                  ",size=" + std::to_string(image_size) + ",seed=" + std::to_string(seed) + ")";
  const std::int64_t n = image_size;
  const double aa = 1.5 / static_cast<double>(n);

  for (int c = 0; c < category_count; ++c) {
    const Glyph glyph = base_glyph(c);
    for (int s = 0; s < samples_per_category; ++s) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(s)));
      const double dx = rng.uniform(-0.10, 0.10);
      const double dy = rng.uniform(-0.10, 0.10);
      const double scale = 1.0 + rng.uniform(-0.15, 0.15);
      const double brightness = 1.0 + rng.uniform(-0.20, 0.20);
      const double stroke = 0.055;
      const double fg = 225.0 * brightness;
      const double bg = 28.0;

      Tensor img({n, n, 3});
      for (std::int64_t y = 0; y < n; ++y) {
        for (std::int64_t x = 0; x < n; ++x) {
          // Map the pixel into jittered glyph coordinates.
          const Pt p{0.5 + ((x + 0.5) / n - 0.5 - dx) / scale,
                     0.5 + ((y + 0.5) / n - 0.5 - dy) / scale};
          const double cov = glyph_coverage(glyph, p, stroke, aa);
          for (std::int64_t ch = 0; ch < 3; ++ch) {
            const double noise = rng.normal(0.0, 4.0);
            const double v = bg + (fg - bg) * cov + noise;
            img(y, x, ch) = static_cast<float>(std::clamp(std::round(v), 0.0, 255.0));
          }
        }
      }
      ds.images.push_back(std::move(img));
      ds.labels.push_back(c);
    }
  }
  ds.validate();
  return ds;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw FormatError(std::string("truncated archive: need ") + std::to_string(n) +
                            " more bytes for " + what + ", have " + std::to_string(buf.size() - pos),
                        static_cast<long long>(pos));
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

bool all_u8_valued(const LabeledDataset& ds) {
  for (const Tensor& img : ds.images) {
    for (float v : img.data) {
      if (v < 0.0f || v > 255.0f || v != std::floor(v)) return false;
    }
  }
  return true;
}

}  // namespace

void save_tensor_archive(const LabeledDataset& ds, const std::string& path) {
  ds.validate();
  const bool u8 = all_u8_valued(ds);
  std::string out;
  out += "ILAB";
  put_u16(out, kArchiveVersion);
  out.push_back(static_cast<char>(u8 ? 0 : 1));
  put_u32(out, static_cast<std::uint32_t>(ds.images.size()));
  const Tensor& first = ds.images[0];
  out.push_back(static_cast<char>(first.rank()));
  for (auto e : first.shape) put_u32(out, static_cast<std::uint32_t>(e));
  for (auto l : ds.labels) put_u32(out, static_cast<std::uint32_t>(l));
  for (const Tensor& img : ds.images) {
    if (u8) {
      for (float v : img.data) out.push_back(static_cast<char>(static_cast<std::uint8_t>(v)));
    } else {
      for (float v : img.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
      }
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

LabeledDataset load_tensor_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};
  if (r.bytes(4, "magic") != "ILAB") throw FormatError("bad archive magic, expected ILAB", 0);
  const std::uint16_t version = r.u16("version");
  if (version != kArchiveVersion)
    throw FormatError("unsupported archive version " + std::to_string(version), 4);
  const std::uint8_t dtype = r.u8("dtype");
  if (dtype > 1) throw FormatError("unknown dtype " + std::to_string(dtype), 6);
  const std::uint32_t count = r.u32("sample count");
  if (count == 0) throw FormatError("archive holds no samples", 7);
  const std::uint8_t rank = r.u8("rank");
  std::vector<std::int64_t> shape;
  for (int i = 0; i < rank; ++i) shape.push_back(r.u32("extent"));

  LabeledDataset ds;
  ds.provenance = "ilab:" + path;
  std::int32_t max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto l = static_cast<std::int32_t>(r.u32("label"));
    ds.labels.push_back(l);
    max_label = std::max(max_label, l);
  }
  ds.category_count = max_label + 1;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor img(shape);
    if (dtype == 0) {
      const std::string raw = r.bytes(static_cast<std::size_t>(img.numel()), "sample data");
      for (std::int64_t j = 0; j < img.numel(); ++j)
        img(j) = static_cast<float>(static_cast<std::uint8_t>(raw[static_cast<std::size_t>(j)]));
    } else {
      for (std::int64_t j = 0; j < img.numel(); ++j) {
        const std::uint32_t bits = r.u32("sample data");
        float v;
        std::memcpy(&v, &bits, 4);
        img(j) = v;
      }
    }
    ds.images.push_back(std::move(img));
  }
  if (r.pos != buf.size())
    throw FormatError("trailing bytes: expected length " + std::to_string(r.pos) + ", actual " +
                          std::to_string(buf.size()),
                      static_cast<long long>(r.pos));
  ds.validate();
  return ds;
}

bool CategoryPartition::is_seen(int category) const {
  return std::binary_search(seen.begin(), seen.end(), category);
}

CategoryPartition partition_categories(int category_count, int num_seen, std::uint64_t seed,
                                       const CategoryPartition* previous) {
  if (num_seen < 0 || num_seen > category_count)
    throw InputError("num_seen " + std::to_string(num_seen) + " out of range for " +
                     std::to_string(category_count) + " categories");
  if (previous != nullptr) {
    if (previous->seed != seed || previous->category_count != category_count)
      throw LineageError("partition lineage must keep the same seed and category count");
    if (static_cast<int>(previous->seen.size()) > num_seen)
      throw LineageError("num_seen " + std::to_string(num_seen) +
                         " smaller than previous seen set (" +
                         std::to_string(previous->seen.size()) + ")");
  }

  // One seed-fixed permutation; seen(n) is its n-prefix. Prefixes nest, so
  // chained and direct construction agree and any lineage is consistent.
  std::vector<int> perm(static_cast<std::size_t>(category_count));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(seed, 0x70617274ULL));
  for (int i = category_count - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }

  CategoryPartition out;
  out.seed = seed;
  out.category_count = category_count;
  out.seen.assign(perm.begin(), perm.begin() + num_seen);
  out.unseen.assign(perm.begin() + num_seen, perm.end());
  std::sort(out.seen.begin(), out.seen.end());
  std::sort(out.unseen.begin(), out.unseen.end());
  if (previous != nullptr) out.lineage = previous->lineage;
  out.lineage.push_back(num_seen);
  return out;
}

Split train_test_split(const LabeledDataset& ds, const SplitConfig& cfg) {
  ds.validate();
  if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0)
    throw InputError("test fraction must be in (0,1)");

  std::vector<std::int32_t> test_idx;
  Rng rng(mix_seed(cfg.seed, 0x73706c69ULL));
  if (cfg.stratified) {
    std::vector<std::vector<std::int32_t>> per_cat(static_cast<std::size_t>(ds.category_count));
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
      per_cat[static_cast<std::size_t>(ds.labels[i])].push_back(static_cast<std::int32_t>(i));
    for (int c = 0; c < ds.category_count; ++c) {
      auto& idx = per_cat[static_cast<std::size_t>(c)];
      const auto n = static_cast<std::int64_t>(idx.size());
      std::int64_t ntest = std::llround(static_cast<double>(n) * cfg.test_fraction);
      ntest = std::clamp<std::int64_t>(ntest, 1, n - 1);
      for (std::int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      }
      test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + ntest);
    }
  } else {
    std::vector<std::int32_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto n = static_cast<std::int64_t>(idx.size());
    std::int64_t ntest = std::llround(static_cast<double>(n) * cfg.test_fraction);
    ntest = std::clamp<std::int64_t>(ntest, 1, n - 1);
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    test_idx.assign(idx.begin(), idx.begin() + ntest);
  }
  std::sort(test_idx.begin(), test_idx.end());

  Split split;
  split.train.category_count = split.test.category_count = ds.category_count;
  split.train.provenance = ds.provenance + "/train";
  split.test.provenance = ds.provenance + "/test";
  std::size_t t = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool is_test = t < test_idx.size() && test_idx[t] == static_cast<std::int32_t>(i);
    if (is_test) {
      split.test.images.push_back(ds.images[i]);
      split.test.labels.push_back(ds.labels[i]);
      split.test_indices.push_back(static_cast<std::int32_t>(i));
      ++t;
    } else {
      split.train.images.push_back(ds.images[i]);
      split.train.labels.push_back(ds.labels[i]);
      split.train_indices.push_back(static_cast<std::int32_t>(i));
    }
  }
  split.train.validate(1);
  split.test.validate(1);
  return split;
}

}  // namespace ilab
