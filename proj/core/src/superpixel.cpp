#include "hsidef/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "hsidef/rng.hpp"

namespace hsidef {

namespace {

struct Component {
  int orig_label = 0;
  std::vector<int> pixels;
};

std::vector<Component> find_components(const SuperpixelMap& map) {
  const int h = map.height, w = map.width;
  std::vector<int> comp_of(static_cast<std::size_t>(h * w), -1);
  std::vector<Component> comps;
  for (int start = 0; start < h * w; ++start) {
    if (comp_of[static_cast<std::size_t>(start)] != -1) continue;
    const int label = map.assignment[static_cast<std::size_t>(start)];
    Component comp;
    comp.orig_label = label;
    std::deque<int> queue{start};
    comp_of[static_cast<std::size_t>(start)] = static_cast<int>(comps.size());
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      comp.pixels.push_back(p);
      const int py = p / w, px = p % w;
      const int neighbors[4] = {p - w, p + w, p - 1, p + 1};
      const bool valid[4] = {py > 0, py < h - 1, px > 0, px < w - 1};
      for (int k = 0; k < 4; ++k) {
        if (!valid[k]) continue;
        const int q = neighbors[k];
        if (comp_of[static_cast<std::size_t>(q)] == -1 &&
            map.assignment[static_cast<std::size_t>(q)] == label) {
          comp_of[static_cast<std::size_t>(q)] = static_cast<int>(comps.size());
          queue.push_back(q);
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

}  // namespace

bool connectivity_ok(const SuperpixelMap& map) {
  const auto comps = find_components(map);
  std::map<int, int> per_label;
  for (const auto& c : comps) per_label[c.orig_label]++;
  for (const auto& [label, count] : per_label)
    if (count != 1) return false;
  return true;
}

SuperpixelMap enforce_connectivity(const SuperpixelMap& map) {
  const int h = map.height, w = map.width, hw = h * w;
  auto comps = find_components(map);

  // Largest component of each label keeps its identity; ties break on the
  // earliest-seen component so valid maps pass through unchanged.
  std::map<int, int> keeper;  // orig label -> component id
  for (int ci = 0; ci < static_cast<int>(comps.size()); ++ci) {
    auto it = keeper.find(comps[static_cast<std::size_t>(ci)].orig_label);
    if (it == keeper.end()) {
      keeper[comps[static_cast<std::size_t>(ci)].orig_label] = ci;
    } else if (comps[static_cast<std::size_t>(ci)].pixels.size() >
               comps[static_cast<std::size_t>(it->second)].pixels.size()) {
      it->second = ci;
    }
  }

  std::vector<int> comp_of(static_cast<std::size_t>(hw));
  for (int ci = 0; ci < static_cast<int>(comps.size()); ++ci)
    for (const int p : comps[static_cast<std::size_t>(ci)].pixels)
      comp_of[static_cast<std::size_t>(p)] = ci;

  const int label_count = static_cast<int>(keeper.size());
  const double min_size = hw / (4.0 * std::max(1, label_count));

  std::vector<int> comp_size(comps.size());
  for (std::size_t ci = 0; ci < comps.size(); ++ci)
    comp_size[ci] = static_cast<int>(comps[ci].pixels.size());

  // Absorb small fragments into their largest 4-adjacent component.
  for (int ci = 0; ci < static_cast<int>(comps.size()); ++ci) {
    const bool is_keeper =
        keeper.at(comps[static_cast<std::size_t>(ci)].orig_label) == ci;
    if (is_keeper) continue;
    if (comp_size[static_cast<std::size_t>(ci)] >= min_size) continue;

    int best_target = -1;
    for (const int p : comps[static_cast<std::size_t>(ci)].pixels) {
      const int py = p / w, px = p % w;
      const int neighbors[4] = {p - w, p + w, p - 1, p + 1};
      const bool valid[4] = {py > 0, py < h - 1, px > 0, px < w - 1};
      for (int k = 0; k < 4; ++k) {
        if (!valid[k]) continue;
        const int cj = comp_of[static_cast<std::size_t>(neighbors[k])];
        if (cj == ci) continue;
        if (best_target == -1 ||
            comp_size[static_cast<std::size_t>(cj)] >
                comp_size[static_cast<std::size_t>(best_target)] ||
            (comp_size[static_cast<std::size_t>(cj)] ==
                 comp_size[static_cast<std::size_t>(best_target)] &&
             cj < best_target)) {
          best_target = cj;
        }
      }
    }
    if (best_target == -1) continue;  // isolated raster, nothing adjacent
    for (const int p : comps[static_cast<std::size_t>(ci)].pixels)
      comp_of[static_cast<std::size_t>(p)] = best_target;
    comp_size[static_cast<std::size_t>(best_target)] +=
        comp_size[static_cast<std::size_t>(ci)];
    comps[static_cast<std::size_t>(best_target)]
        .pixels.insert(comps[static_cast<std::size_t>(best_target)].pixels.end(),
                       comps[static_cast<std::size_t>(ci)].pixels.begin(),
                       comps[static_cast<std::size_t>(ci)].pixels.end());
    comps[static_cast<std::size_t>(ci)].pixels.clear();
    comp_size[static_cast<std::size_t>(ci)] = 0;
  }

  // Relabel surviving components 1..H in order of their original label and
  // first pixel, which is the identity on already-valid maps.
  std::vector<int> order;
  for (int ci = 0; ci < static_cast<int>(comps.size()); ++ci)
    if (!comps[static_cast<std::size_t>(ci)].pixels.empty()) order.push_back(ci);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = comps[static_cast<std::size_t>(a)];
    const auto& cb = comps[static_cast<std::size_t>(b)];
    if (ca.orig_label != cb.orig_label) return ca.orig_label < cb.orig_label;
    return *std::min_element(ca.pixels.begin(), ca.pixels.end()) <
           *std::min_element(cb.pixels.begin(), cb.pixels.end());
  });

  SuperpixelMap out;
  out.height = h;
  out.width = w;
  out.count = static_cast<int>(order.size());
  out.assignment.resize(static_cast<std::size_t>(hw));
  out.sizes.assign(static_cast<std::size_t>(out.count), 0);
  for (int newi = 0; newi < static_cast<int>(order.size()); ++newi) {
    const auto& comp = comps[static_cast<std::size_t>(order[static_cast<std::size_t>(newi)])];
    for (const int p : comp.pixels) out.assignment[static_cast<std::size_t>(p)] = newi + 1;
    out.sizes[static_cast<std::size_t>(newi)] = static_cast<int>(comp.pixels.size());
  }
  return out;
}

SuperpixelMap slic(const HsiCube& cube, int target_count, double compactness,
                   int iters, std::uint64_t seed) {
  const int h = cube.height, w = cube.width, hw = h * w;
  if (target_count < 1 || target_count > hw)
    throw ConfigError("slic: target superpixel count out of range");
  if (iters < 1) throw ConfigError("slic: iters must be >= 1");

  const double step = std::sqrt(static_cast<double>(hw) / target_count);

  if (compactness <= 0.0) {
    // 0.1 * mean pairwise spectral distance over a bounded random sample.
    Rng rng(derive_seed(seed, /*tag=*/0x736c6963ULL));
    const int samples = std::min(hw, 256);
    double total = 0.0;
    int pairs = 0;
    std::vector<int> idx(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i)
      idx[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(hw));
    for (int i = 0; i < samples; ++i)
      for (int j = i + 1; j < std::min(samples, i + 17); ++j) {
        total += (cube.values.row(idx[static_cast<std::size_t>(i)]) -
                  cube.values.row(idx[static_cast<std::size_t>(j)]))
                     .norm();
        ++pairs;
      }
    compactness = pairs > 0 ? 0.1 * total / pairs : 0.1;
    if (compactness <= 0.0) compactness = 0.1;
  }

  // Grid seeding.
  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  struct Center {
    double y, x;
    Vector spectrum;
  };
  std::vector<Center> centers;
  for (int gy = 0; gy < ny; ++gy) {
    for (int gx = 0; gx < nx; ++gx) {
      const double cy = (gy + 0.5) * h / ny;
      const double cx = (gx + 0.5) * w / nx;
      const int py = std::min(h - 1, static_cast<int>(cy));
      const int px = std::min(w - 1, static_cast<int>(cx));
      centers.push_back({cy, cx, cube.values.row(py * w + px).transpose()});
    }
  }

  const double spatial_weight = compactness / step;
  const int window = std::max(1, static_cast<int>(std::lround(2.0 * step)));
  std::vector<int> assignment(static_cast<std::size_t>(hw), 0);
  std::vector<double> best_dist(static_cast<std::size_t>(hw));

  for (int it = 0; it < iters; ++it) {
    std::fill(best_dist.begin(), best_dist.end(), 1e300);
    for (int ci = 0; ci < static_cast<int>(centers.size()); ++ci) {
      const auto& c = centers[static_cast<std::size_t>(ci)];
      const int y0 = std::max(0, static_cast<int>(c.y) - window);
      const int y1 = std::min(h - 1, static_cast<int>(c.y) + window);
      const int x0 = std::max(0, static_cast<int>(c.x) - window);
      const int x1 = std::min(w - 1, static_cast<int>(c.x) + window);
      for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
          const int p = py * w + px;
          const double d_spec =
              (cube.values.row(p).transpose() - c.spectrum).norm();
          const double d_spat = std::hypot(py - c.y, px - c.x);
          const double dist = d_spec + spatial_weight * d_spat;
          if (dist < best_dist[static_cast<std::size_t>(p)]) {
            best_dist[static_cast<std::size_t>(p)] = dist;
            assignment[static_cast<std::size_t>(p)] = ci;
          }
        }
      }
    }
    // Pixels outside every window (possible on thin rasters): nearest center.
    for (int p = 0; p < hw; ++p) {
      if (best_dist[static_cast<std::size_t>(p)] < 1e300) continue;
      const int py = p / w, px = p % w;
      double best = 1e300;
      for (int ci = 0; ci < static_cast<int>(centers.size()); ++ci) {
        const double d = std::hypot(py - centers[static_cast<std::size_t>(ci)].y,
                                    px - centers[static_cast<std::size_t>(ci)].x);
        if (d < best) {
          best = d;
          assignment[static_cast<std::size_t>(p)] = ci;
        }
      }
    }
    // Update centers.
    std::vector<int> counts(centers.size(), 0);
    std::vector<double> sum_y(centers.size(), 0.0), sum_x(centers.size(), 0.0);
    Matrix sum_spec = Matrix::Zero(static_cast<Index>(centers.size()), cube.bands);
    for (int p = 0; p < hw; ++p) {
      const int ci = assignment[static_cast<std::size_t>(p)];
      counts[static_cast<std::size_t>(ci)]++;
      sum_y[static_cast<std::size_t>(ci)] += p / w;
      sum_x[static_cast<std::size_t>(ci)] += p % w;
      sum_spec.row(ci) += cube.values.row(p);
    }
    for (int ci = 0; ci < static_cast<int>(centers.size()); ++ci) {
      if (counts[static_cast<std::size_t>(ci)] == 0) continue;
      const double inv = 1.0 / counts[static_cast<std::size_t>(ci)];
      centers[static_cast<std::size_t>(ci)].y = sum_y[static_cast<std::size_t>(ci)] * inv;
      centers[static_cast<std::size_t>(ci)].x = sum_x[static_cast<std::size_t>(ci)] * inv;
      centers[static_cast<std::size_t>(ci)].spectrum = (sum_spec.row(ci) * inv).transpose();
    }
  }

  // Compact labels over non-empty clusters, then enforce connectivity.
  std::vector<int> relabel(centers.size(), 0);
  int next = 0;
  for (int p = 0; p < hw; ++p) {
    const int ci = assignment[static_cast<std::size_t>(p)];
    if (relabel[static_cast<std::size_t>(ci)] == 0) relabel[static_cast<std::size_t>(ci)] = ++next;
  }
  SuperpixelMap raw;
  raw.height = h;
  raw.width = w;
  raw.count = next;
  raw.assignment.resize(static_cast<std::size_t>(hw));
  for (int p = 0; p < hw; ++p)
    raw.assignment[static_cast<std::size_t>(p)] =
        relabel[static_cast<std::size_t>(assignment[static_cast<std::size_t>(p)])];
  raw.sizes.assign(static_cast<std::size_t>(next), 0);
  for (int p = 0; p < hw; ++p)
    raw.sizes[static_cast<std::size_t>(raw.assignment[static_cast<std::size_t>(p)] - 1)]++;

  return enforce_connectivity(raw);
}

void write_superpixel_map(const SuperpixelMap& map,
                          const std::filesystem::path& header_path,
                          const std::string& payload_name) {
  LabelMap lm;
  lm.height = map.height;
  lm.width = map.width;
  lm.classes = map.count;
  lm.labels = map.assignment;
  write_labels(lm, header_path, payload_name);
}

}  // namespace hsidef
