#include "nhl/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>

namespace nhl {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr size_t kCifarRecord = 3073;

const std::vector<float> kCifarMean{0.4914f, 0.4822f, 0.4465f};
const std::vector<float> kCifarStd{0.2470f, 0.2435f, 0.2616f};
const std::vector<float> kIdxMean{0.1307f};
const std::vector<float> kIdxStd{0.3081f};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("FileOpenFailed", "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, size_t off, const std::string& what) {
  if (off + 4 > b.size()) {
    throw ValidationError("TruncatedFile", what + ": header cut short");
  }
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

// u8 -> [0,1] -> (x - mean) / std per channel.
void standardize(Dataset& ds, const std::vector<std::uint8_t>& raw, long long n, long long c,
                 long long h, long long w) {
  ds.images = Tensor<float>({n, c, h, w});
  float* out = ds.images.ptr();
  for (long long i = 0; i < ds.images.size(); ++i) {
    const long long channel = (i / (h * w)) % c;
    const float v = static_cast<float>(raw[static_cast<size_t>(i)]) / 255.0f;
    out[i] = (v - ds.norm_mean[static_cast<size_t>(channel)]) / ds.norm_std[static_cast<size_t>(channel)];
  }
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const std::vector<std::uint8_t> img = read_file(images_path);
  const std::vector<std::uint8_t> lab = read_file(labels_path);

  if (read_be32(img, 0, "images") != kIdxImagesMagic) {
    throw ValidationError("BadMagic", images_path.string() + " is not an IDX image file");
  }
  if (read_be32(lab, 0, "labels") != kIdxLabelsMagic) {
    throw ValidationError("BadMagic", labels_path.string() + " is not an IDX label file");
  }
  const std::uint32_t n = read_be32(img, 4, "images");
  const std::uint32_t rows = read_be32(img, 8, "images");
  const std::uint32_t cols = read_be32(img, 12, "images");
  const std::uint32_t n_labels = read_be32(lab, 4, "labels");
  if (n != n_labels) {
    throw ValidationError("CountMismatch", std::to_string(n) + " images vs " + std::to_string(n_labels) +
                                               " labels");
  }
  const size_t want_img = 16 + static_cast<size_t>(n) * rows * cols;
  const size_t want_lab = 8 + n_labels;
  if (img.size() < want_img || lab.size() < want_lab) {
    throw ValidationError("TruncatedFile", "IDX payload shorter than header promises");
  }

  Dataset ds;
  ds.source = "idx";
  ds.norm_mean = kIdxMean;
  ds.norm_std = kIdxStd;
  std::vector<std::uint8_t> pixels(img.begin() + 16, img.begin() + static_cast<long>(want_img));
  standardize(ds, pixels, n, 1, rows, cols);
  ds.labels.assign(lab.begin() + 8, lab.begin() + static_cast<long>(want_lab));
  ds.train_count = n;
  return ds;
}

namespace {

void append_cifar_file(const std::filesystem::path& path, std::vector<std::uint8_t>& pixels,
                       std::vector<int>& labels) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw ValidationError("TruncatedFile", path.string() + ": size " + std::to_string(bytes.size()) +
                                               " is not a multiple of 3073");
  }
  const size_t n = bytes.size() / kCifarRecord;
  for (size_t i = 0; i < n; ++i) {
    const std::uint8_t label = bytes[i * kCifarRecord];
    if (label > 9) {
      throw ValidationError("LabelOutOfRange", path.string() + ": record " + std::to_string(i) +
                                                   " has label " + std::to_string(int(label)));
    }
    labels.push_back(label);
    pixels.insert(pixels.end(), bytes.begin() + static_cast<long>(i * kCifarRecord + 1),
                  bytes.begin() + static_cast<long>((i + 1) * kCifarRecord));
  }
}

}  // namespace

Dataset load_cifar10_binary(const std::filesystem::path& dir_path) {
  std::vector<std::filesystem::path> train_files;
  for (int i = 1; i <= 5; ++i) {
    const auto p = dir_path / ("data_batch_" + std::to_string(i) + ".bin");
    if (std::filesystem::exists(p)) train_files.push_back(p);
  }
  const auto test_file = dir_path / "test_batch.bin";
  if (train_files.empty() && !std::filesystem::exists(test_file)) {
    throw IoError("FileOpenFailed", "no CIFAR-10 batch files under " + dir_path.string());
  }

  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  for (const auto& p : train_files) append_cifar_file(p, pixels, labels);
  const long long train_count = static_cast<long long>(labels.size());
  if (std::filesystem::exists(test_file)) append_cifar_file(test_file, pixels, labels);

  Dataset ds;
  ds.source = "cifar10";
  ds.norm_mean = kCifarMean;
  ds.norm_std = kCifarStd;
  ds.labels = std::move(labels);
  ds.train_count = train_count;
  standardize(ds, pixels, static_cast<long long>(ds.labels.size()), 3, 32, 32);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

// Ten visually distinct base colors; classes beyond 10 rotate hue.
std::array<int, 3> class_color(int c) {
  static const int palette[10][3] = {{230, 60, 50},  {60, 200, 70},   {50, 90, 230},  {240, 200, 40},
                                     {200, 60, 220}, {40, 220, 210},  {245, 140, 30}, {130, 130, 130},
                                     {150, 80, 30},  {240, 240, 240}};
  const int* p = palette[c % 10];
  return {p[0], p[1], p[2]};
}

}  // namespace

std::vector<std::uint8_t> synth_records(const SynthConfig& cfg, bool val_split) {
  const int per_class = val_split ? cfg.val_per_class : cfg.train_per_class;
  const int hw = cfg.hw;
  const size_t record = 1 + 3 * static_cast<size_t>(hw) * hw;
  std::vector<std::uint8_t> out;
  out.reserve(record * static_cast<size_t>(per_class) * cfg.classes);

  std::mt19937_64 rng(cfg.seed + (val_split ? 0x9e3779b97f4a7c15ULL : 0));
  std::normal_distribution<float> noise(0.0f, cfg.noise);
  std::uniform_int_distribution<int> jitter(0, hw - 1);

  // Interleave classes so any prefix of the file is roughly balanced.
  for (int i = 0; i < per_class; ++i) {
    for (int c = 0; c < cfg.classes; ++c) {
      const auto [r, g, b] = class_color(c);
      const int pattern = c % 5;
      const int period = 2 + (c / 5) % 3;
      const int phase = jitter(rng) % std::max(period, 1);
      out.push_back(static_cast<std::uint8_t>(c));
      for (int ch = 0; ch < 3; ++ch) {
        const int base = ch == 0 ? r : (ch == 1 ? g : b);
        for (int y = 0; y < hw; ++y) {
          for (int x = 0; x < hw; ++x) {
            float v = static_cast<float>(base);
            switch (pattern) {
              case 0: break;                                          // solid
              case 1: v *= ((y + phase) / period) % 2 ? 1.0f : 0.45f; break;  // h-stripes
              case 2: v *= ((x + phase) / period) % 2 ? 1.0f : 0.45f; break;  // v-stripes
              case 3: v *= (((x + phase) / period) + ((y + phase) / period)) % 2 ? 1.0f : 0.5f; break;
              case 4: {  // center square
                const int q = hw / 4;
                const bool inside = x >= q && x < hw - q && y >= q && y < hw - q;
                v *= inside ? 1.0f : 0.35f;
                break;
              }
            }
            v += noise(rng);
            out.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f)));
          }
        }
      }
    }
  }
  return out;
}

void write_cifar10_dir(const SynthConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.hw != 32) {
    throw ValidationError("ShapeMismatch", "CIFAR-10 binary records are 32x32");
  }
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()))) {
      throw IoError("WriteFailed", "short write to " + p.string());
    }
  };
  write(dir / "data_batch_1.bin", synth_records(cfg, false));
  write(dir / "test_batch.bin", synth_records(cfg, true));
}

Dataset make_synthetic(const SynthConfig& cfg) {
  const std::vector<std::uint8_t> train = synth_records(cfg, false);
  const std::vector<std::uint8_t> val = synth_records(cfg, true);
  const size_t record = 1 + 3 * static_cast<size_t>(cfg.hw) * cfg.hw;

  Dataset ds;
  ds.source = "synthetic";
  ds.norm_mean = kCifarMean;
  ds.norm_std = kCifarStd;
  std::vector<std::uint8_t> pixels;
  for (const auto* part : {&train, &val}) {
    for (size_t off = 0; off < part->size(); off += record) {
      ds.labels.push_back((*part)[off]);
      pixels.insert(pixels.end(), part->begin() + static_cast<long>(off + 1),
                    part->begin() + static_cast<long>(off + record));
    }
  }
  ds.train_count = static_cast<long long>(train.size() / record);
  standardize(ds, pixels, static_cast<long long>(ds.labels.size()), 3, cfg.hw, cfg.hw);
  return ds;
}

}  // namespace nhl
