// Writes the synthetic 50-image fixture: images, masks, manifest and configs.
#include <cmath>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "medground/core/rng.hpp"
#include "medground/core/text.hpp"
#include "medground/core/triplet.hpp"
#include "medground/mask/png_io.hpp"

using namespace medground;
namespace fs = std::filesystem;

namespace {

struct DatasetSpec {
  const char* name;
  Modality modality;
  const char* mask_mode;
  int min_blobs;
  int max_blobs;
  int min_radius;
  int max_radius;
  double elongation;  // ry / rx upper bound
  bool sixteen_bit;
  const char* category;
};

const DatasetSpec kDatasets[] = {
    {"SynthCT", Modality::kCT, "binary", 1, 3, 4, 18, 1.5, false, "lesion"},
    {"SynthUS", Modality::kUltrasound, "binary", 1, 2, 8, 24, 1.8, false, ""},
    {"SynthDerm", Modality::kDermoscopy, "binary", 1, 1, 14, 34, 1.4, false, ""},
    {"SynthNuclei", Modality::kNuclei, "labeled", 4, 8, 3, 9, 1.6, true, ""},
    {"SynthBact", Modality::kBacteria, "labeled", 3, 6, 2, 4, 4.0, false, ""},
};

constexpr int kPerDataset = 10;
constexpr int kTrainPerDataset = 7;

void write_png(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  write_file(p.string(), std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

int range(SplitMix64& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic fixture corpus"};
  std::string out = "fixtures/synthetic";
  std::uint64_t seed = 20240601;
  app.add_option("-o,--out", out, "output directory");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(out);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  std::string manifest;
  SplitMix64 rng(seed);
  static const int kWidths[] = {96, 128, 160};
  static const int kHeights[] = {96, 128};

  for (const DatasetSpec& ds : kDatasets) {
    for (int i = 0; i < kPerDataset; ++i) {
      const int w = kWidths[rng.below(3)];
      const int h = kHeights[rng.below(2)];
      std::vector<std::uint32_t> labels(static_cast<std::size_t>(w * h), 0);
      std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w * h));
      for (auto& p : pixels) p = static_cast<std::uint8_t>(40 + rng.below(30));

      const int blobs = range(rng, ds.min_blobs, ds.max_blobs);
      for (int b = 1; b <= blobs; ++b) {
        const double rx = range(rng, ds.min_radius, ds.max_radius);
        const double ry = rx * (1.0 + rng.unit() * (ds.elongation - 1.0));
        const bool swap = rng.below(2) == 0;
        const double ax = swap ? ry : rx, ay = swap ? rx : ry;
        const int cx = range(rng, 0, w - 1), cy = range(rng, 0, h - 1);
        const auto tone = static_cast<std::uint8_t>(130 + rng.below(100));
        for (int y = std::max(0, static_cast<int>(cy - ay)); y <= std::min(h - 1, static_cast<int>(cy + ay)); ++y)
          for (int x = std::max(0, static_cast<int>(cx - ax)); x <= std::min(w - 1, static_cast<int>(cx + ax)); ++x) {
            const double dx = (x - cx) / ax, dy = (y - cy) / ay;
            if (dx * dx + dy * dy > 1.0) continue;
            const auto k = static_cast<std::size_t>(y * w + x);
            labels[k] = static_cast<std::uint32_t>(b);
            pixels[k] = tone;
          }
      }
      // A sub-threshold speck on every third image exercises the size filter.
      if (i % 3 == 0) {
        const int x = range(rng, 0, w - 2), y = range(rng, 0, h - 1);
        for (int dx = 0; dx < 2; ++dx) {
          const auto k = static_cast<std::size_t>(y * w + x + dx);
          if (labels[k] == 0) labels[k] = static_cast<std::uint32_t>(blobs + 1);
        }
      }

      std::vector<std::uint8_t> mask_png;
      if (ds.sixteen_bit) {
        std::vector<std::uint16_t> s(labels.begin(), labels.end());
        mask_png = encode_gray16_png(w, h, s);
      } else {
        std::vector<std::uint8_t> s(labels.size());
        const bool binary = std::string_view(ds.mask_mode) == "binary";
        for (std::size_t k = 0; k < labels.size(); ++k)
          s[k] = binary ? (labels[k] ? 255 : 0) : static_cast<std::uint8_t>(labels[k]);
        mask_png = encode_gray8_png(w, h, s);
      }
      const std::string stem = std::string(ds.name) + "_" + (i < 10 ? "0" : "") + std::to_string(i);
      write_png(root / "images" / (stem + ".png"), encode_gray8_png(w, h, pixels));
      write_png(root / "masks" / (stem + ".png"), mask_png);

      Json line;
      line["dataset"] = ds.name;
      line["modality"] = std::string(to_string(ds.modality));
      line["image"] = "images/" + stem + ".png";
      line["mask"] = "masks/" + stem + ".png";
      line["mask_mode"] = ds.mask_mode;
      if (*ds.category != '\0' && i % 2 == 0) line["category"] = ds.category;
      line["split"] = i < kTrainPerDataset ? "train" : "test";
      manifest += dump_compact(line) + "\n";
    }
  }
  write_file((root / "manifest.jsonl").string(), manifest);

  write_file((root / "mock_backend.toml").string(),
             "# Offline backend used by the fixture pipeline.\n"
             "kind = \"mock\"\n"
             "mock_corruption_rate = 0.1\n"
             "mock_rule_violation_rate = 0.1\n"
             "mock_judge_reject_rate = 0.1\n");
  write_file((root / "pipeline.toml").string(),
             "manifest = \"manifest.jsonl\"\n"
             "output_dir = \"out\"\n"
             "backend_config = \"mock_backend.toml\"\n"
             "seed = 7\n"
             "concurrency = 4\n"
             "queries_per_image = 2\n"
             "max_targets = 3\n");
  std::cout << "wrote " << std::size(kDatasets) * kPerDataset << " images to " << root.string() << "\n";
  return 0;
}
