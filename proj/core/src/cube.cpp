#include "hsidef/cube.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "hsidef/rng.hpp"

namespace hsidef {

namespace {
bool g_warnings_enabled = true;
}

void warn(const std::string& msg) {
  if (g_warnings_enabled) std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  k = std::min(k, n);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
  Rng mixer(base ^ (tag * 0x2545f4914f6cdd1dULL) ^ (index * 0x9e3779b97f4a7c15ULL));
  mixer.next_u64();
  return mixer.next_u64();
}

namespace {

namespace fs = std::filesystem;

struct Header {
  int height = 0, width = 0, bands = 0;
  std::string dtype, order, payload;
};

Header parse_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open header: " + path.string());
  Header h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("malformed header line '" + line + "' in " + path.string());
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "height") h.height = std::stoi(value);
    else if (key == "width") h.width = std::stoi(value);
    else if (key == "bands") h.bands = std::stoi(value);
    else if (key == "dtype") h.dtype = value;
    else if (key == "order") h.order = value;
    else if (key == "payload") h.payload = value;
    else throw DataError("unknown header key '" + key + "' in " + path.string());
  }
  if (h.height <= 0 || h.width <= 0 || h.bands <= 0)
    throw DataError("header has non-positive dimensions: " + path.string());
  if (h.order != "bip") throw DataError("unsupported order '" + h.order + "'");
  if (h.payload.empty()) throw DataError("header missing payload: " + path.string());
  return h;
}

std::vector<char> read_payload(const fs::path& header_path, const Header& h,
                               std::size_t elem_size) {
  const fs::path payload = header_path.parent_path() / h.payload;
  std::ifstream in(payload, std::ios::binary);
  if (!in) throw DataError("cannot open payload: " + payload.string());
  in.seekg(0, std::ios::end);
  const auto actual = static_cast<std::size_t>(in.tellg());
  const std::size_t expected =
      static_cast<std::size_t>(h.height) * h.width * h.bands * elem_size;
  if (actual != expected) {
    std::ostringstream msg;
    msg << "payload size mismatch for " << payload.string() << ": expected "
        << expected << " bytes, got " << actual;
    throw DataError(msg.str());
  }
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(expected);
  in.read(bytes.data(), static_cast<std::streamsize>(expected));
  if (!in) throw DataError("short read on payload: " + payload.string());
  return bytes;
}

void write_text_header(const fs::path& path, const Header& h) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write header: " + path.string());
  out << "height=" << h.height << "\n"
      << "width=" << h.width << "\n"
      << "bands=" << h.bands << "\n"
      << "dtype=" << h.dtype << "\n"
      << "order=bip\n"
      << "payload=" << h.payload << "\n";
}

}  // namespace

HsiCube load_cube(const fs::path& header_path) {
  const Header h = parse_header(header_path);
  if (h.dtype != "f32le") throw DataError("cube dtype must be f32le, got " + h.dtype);
  const auto bytes = read_payload(header_path, h, sizeof(float));

  HsiCube cube;
  cube.height = h.height;
  cube.width = h.width;
  cube.bands = h.bands;
  cube.values.resize(cube.pixels(), cube.bands);
  const std::size_t count = bytes.size() / sizeof(float);
  for (std::size_t i = 0; i < count; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + i * sizeof(float), sizeof(float));
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "non-finite value in payload at byte offset " << i * sizeof(float);
      throw DataError(msg.str());
    }
    cube.values(static_cast<Index>(i / h.bands), static_cast<Index>(i % h.bands)) = v;
  }
  return cube;
}

void write_cube(const HsiCube& cube, const fs::path& header_path,
                const std::string& payload_name) {
  Header h{cube.height, cube.width, cube.bands, "f32le", "bip", payload_name};
  write_text_header(header_path, h);
  const fs::path payload = header_path.parent_path() / payload_name;
  std::ofstream out(payload, std::ios::binary);
  if (!out) throw DataError("cannot write payload: " + payload.string());
  for (Index p = 0; p < cube.values.rows(); ++p) {
    for (Index k = 0; k < cube.values.cols(); ++k) {
      const float v = static_cast<float>(cube.values(p, k));
      out.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  }
}

LabelMap load_labels(const fs::path& header_path) {
  const Header h = parse_header(header_path);
  if (h.dtype != "i32le") throw DataError("label dtype must be i32le, got " + h.dtype);
  if (h.bands != 1) throw DataError("label raster must have bands=1");
  const auto bytes = read_payload(header_path, h, sizeof(std::int32_t));

  LabelMap lm;
  lm.height = h.height;
  lm.width = h.width;
  lm.labels.resize(static_cast<std::size_t>(lm.pixels()));
  int max_label = 0;
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    std::int32_t v;
    std::memcpy(&v, bytes.data() + i * sizeof(std::int32_t), sizeof(std::int32_t));
    if (v < 0) throw DataError("negative label in " + header_path.string());
    lm.labels[i] = v;
    max_label = std::max(max_label, static_cast<int>(v));
  }
  lm.classes = max_label;
  return lm;
}

void write_labels(const LabelMap& labels, const fs::path& header_path,
                  const std::string& payload_name) {
  Header h{labels.height, labels.width, 1, "i32le", "bip", payload_name};
  write_text_header(header_path, h);
  const fs::path payload = header_path.parent_path() / payload_name;
  std::ofstream out(payload, std::ios::binary);
  if (!out) throw DataError("cannot write payload: " + payload.string());
  for (const int v : labels.labels) {
    const std::int32_t i32 = v;
    out.write(reinterpret_cast<const char*>(&i32), sizeof(std::int32_t));
  }
}

HsiCube normalize(const HsiCube& cube) {
  const Index n = cube.values.rows();
  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(cube.bands));
  std::vector<double> mins, maxs;
  for (int k = 0; k < cube.bands; ++k) {
    const double lo = cube.values.col(k).minCoeff();
    const double hi = cube.values.col(k).maxCoeff();
    if (lo == hi) {
      warn("normalize: dropping constant band " + std::to_string(k));
      continue;
    }
    kept.push_back(k);
    mins.push_back(lo);
    maxs.push_back(hi);
  }
  if (kept.empty()) throw DataError("normalize: all bands are constant, unusable input");

  HsiCube out;
  out.height = cube.height;
  out.width = cube.width;
  out.bands = static_cast<int>(kept.size());
  out.values.resize(n, out.bands);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const double lo = mins[j], hi = maxs[j];
    out.values.col(static_cast<Index>(j)) =
        (cube.values.col(kept[j]).array() - lo) / (hi - lo);
  }
  out.band_min = std::move(mins);
  out.band_max = std::move(maxs);
  out.normalized = true;
  return out;
}

HsiCube zero_pad_bands(const HsiCube& cube, int patch_len) {
  if (patch_len < 1) throw ConfigError("zero_pad_bands: patch length must be >= 1");
  const int rem = cube.bands % patch_len;
  if (rem == 0) return cube;
  const int extra = patch_len - rem;

  HsiCube out = cube;
  out.bands = cube.bands + extra;
  out.padded = cube.padded + extra;
  out.values.resize(cube.values.rows(), out.bands);
  out.values.leftCols(cube.bands) = cube.values;
  out.values.rightCols(extra).setZero();
  return out;
}

DatasetSplit sample_split(const LabelMap& labels, int per_class, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("sample_split: per_class must be >= 1");
  if (labels.classes < 1) throw DataError("sample_split: label map declares no classes");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(labels.classes));
  for (int p = 0; p < labels.pixels(); ++p) {
    const int c = labels.labels[static_cast<std::size_t>(p)];
    if (c > 0) by_class[static_cast<std::size_t>(c - 1)].push_back(p);
  }

  DatasetSplit split;
  split.per_class_train = per_class;
  split.seed = seed;
  split.train_mask.assign(static_cast<std::size_t>(labels.pixels()), false);
  split.test_mask.assign(static_cast<std::size_t>(labels.pixels()), false);

  for (int c = 0; c < labels.classes; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.size() < 2) {
      throw DataError("sample_split: class " + std::to_string(c + 1) +
                      " has fewer than 2 labeled pixels");
    }
    const int take = std::min<int>(per_class, static_cast<int>(members.size()) - 1);
    Rng rng(derive_seed(seed, /*tag=*/0x73706c6974ULL, static_cast<std::uint64_t>(c)));
    const auto chosen = rng.sample_without_replacement(static_cast<int>(members.size()), take);
    std::vector<bool> is_train(members.size(), false);
    for (const int idx : chosen) is_train[static_cast<std::size_t>(idx)] = true;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (is_train[i]) split.train_mask[static_cast<std::size_t>(members[i])] = true;
      else split.test_mask[static_cast<std::size_t>(members[i])] = true;
    }
  }
  return split;
}

}  // namespace hsidef
