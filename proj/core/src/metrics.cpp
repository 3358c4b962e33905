#include "hsidef/metrics.hpp"

#include <cmath>
#include <fstream>

namespace hsidef {

ConfusionMatrix confusion(const std::vector<int>& pred, const LabelMap& truth,
                          const std::vector<bool>& mask) {
  if (static_cast<int>(pred.size()) != truth.pixels() ||
      static_cast<int>(mask.size()) != truth.pixels())
    throw DataError("confusion: raster shapes disagree");

  ConfusionMatrix cm;
  cm.counts = IntMatrix::Zero(truth.classes, truth.classes);
  for (int p = 0; p < truth.pixels(); ++p) {
    if (!mask[static_cast<std::size_t>(p)]) continue;
    const int t = truth.labels[static_cast<std::size_t>(p)];
    if (t == 0) throw DataError("confusion: mask covers an unlabeled pixel");
    const int y = pred[static_cast<std::size_t>(p)];
    if (y < 1 || y > truth.classes)
      throw DataError("confusion: prediction " + std::to_string(y) +
                      " outside 1.." + std::to_string(truth.classes));
    cm.counts(t - 1, y - 1) += 1;
    cm.total += 1;
  }
  return cm;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total <= 0) throw DataError("metrics: empty confusion matrix");
  const int k = static_cast<int>(cm.counts.rows());

  Metrics result;
  long diag = 0;
  for (int i = 0; i < k; ++i) diag += cm.counts(i, i);
  result.oa = static_cast<double>(diag) / static_cast<double>(cm.total);

  double recall_sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const long row = cm.counts.row(i).cast<long>().sum();
    if (row == 0)
      throw DataError("metrics: class " + std::to_string(i + 1) + " has no pixels");
    recall_sum += static_cast<double>(cm.counts(i, i)) / static_cast<double>(row);
  }
  result.aa = recall_sum / k;

  double pe = 0.0;
  for (int i = 0; i < k; ++i) {
    const double row = cm.counts.row(i).cast<double>().sum();
    const double col = cm.counts.col(i).cast<double>().sum();
    pe += row * col;
  }
  pe /= static_cast<double>(cm.total) * static_cast<double>(cm.total);
  if (pe >= 1.0 - 1e-15) {
    result.kappa = std::numeric_limits<double>::quiet_NaN();
    result.kappa_defined = false;
  } else {
    result.kappa = (result.oa - pe) / (1.0 - pe);
  }
  return result;
}

std::vector<MeanStd> aggregate(const std::vector<std::vector<double>>& runs) {
  if (runs.size() < 2) throw DataError("aggregate: need at least 2 runs");
  const std::size_t cols = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != cols) throw DataError("aggregate: ragged metric rows");

  std::vector<MeanStd> out(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r[c];
    const double mean = sum / static_cast<double>(runs.size());
    double sq = 0.0;
    for (const auto& r : runs) sq += (r[c] - mean) * (r[c] - mean);
    out[c].mean = mean;
    out[c].stddev = std::sqrt(sq / static_cast<double>(runs.size() - 1));
  }
  return out;
}

Image render_map(const std::vector<int>& pred, int height, int width,
                 const Palette& palette) {
  if (static_cast<int>(pred.size()) != height * width)
    throw DataError("render_map: raster size mismatch");
  Image img;
  img.height = height;
  img.width = width;
  img.rgb.assign(static_cast<std::size_t>(height) * width * 3, 0);
  for (int p = 0; p < height * width; ++p) {
    const int cls = pred[static_cast<std::size_t>(p)];
    if (cls == 0) continue;  // unlabeled stays black
    const auto it = palette.find(cls);
    if (it == palette.end())
      throw DataError("render_map: no palette entry for class " + std::to_string(cls));
    img.rgb[static_cast<std::size_t>(p) * 3 + 0] = it->second[0];
    img.rgb[static_cast<std::size_t>(p) * 3 + 1] = it->second[1];
    img.rgb[static_cast<std::size_t>(p) * 3 + 2] = it->second[2];
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read image: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError("not a P6 ppm: " + path.string());
  Image img;
  int maxval = 0;
  in >> img.width >> img.height >> maxval;
  if (maxval != 255) throw DataError("unsupported ppm depth");
  in.get();  // single whitespace after the header
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (!in) throw DataError("short ppm payload: " + path.string());
  return img;
}

Palette default_palette(int classes) {
  // Fixed, well-separated colors; cycles with shading beyond the base set.
  static const Rgb base[] = {
      {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
      {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
      {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
      {170, 110, 40}, {255, 250, 200}, {128, 0, 0},    {170, 255, 195},
  };
  constexpr int base_count = static_cast<int>(sizeof(base) / sizeof(base[0]));
  Palette palette;
  for (int c = 1; c <= classes; ++c) {
    Rgb color = base[(c - 1) % base_count];
    const int round = (c - 1) / base_count;
    for (auto& channel : color)
      channel = static_cast<std::uint8_t>(channel / (1 + round));
    palette[c] = color;
  }
  return palette;
}

}  // namespace hsidef
