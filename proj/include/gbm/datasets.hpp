#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gbm/distributions.hpp"
#include "gbm/score.hpp"

namespace gbm {

enum class ToyKind { lognormal_1d, lognormal_mixture_2d };

struct ToyDatasetSpec {
  ToyKind kind = ToyKind::lognormal_1d;
  std::vector<MixtureComponent> components{{1.0, LogNormalParams::isotropic(1, 0.0, 0.5)}};
  long n = 10000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Samples from the toy density. A single-component spec takes exactly the
/// lognormal_sample path.
SampleBatch generate_toy(const ToyDatasetSpec& spec);

/// Images with pixels in [1, 2], one image per column (h*w x n, row-major
/// pixels within an image).
struct ImageDataset {
  Eigen::ArrayXXd images;
  std::optional<std::vector<std::uint8_t>> labels;
  long height = 0;
  long width = 0;
  std::string source;
  std::string original_dtype = "uint8";

  long size() const { return static_cast<long>(images.cols()); }
  long pixels() const { return height * width; }
};

inline constexpr std::uint32_t idx_image_magic = 0x00000803;
inline constexpr std::uint32_t idx_label_magic = 0x00000801;

/// Raw IDX unsigned-byte tensor: dims and payload.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Parses an in-memory IDX file whose magic must equal `expected_magic`.
/// Throws ParseError with the byte offset of the first inconsistency.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor, std::uint32_t magic);

/// Reads images (and labels when given), rescaling bytes by v -> 1 + v / 255.
ImageDataset load_idx(const std::filesystem::path& images_path,
                      const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Builds a dataset from raw bytes (n images of h x w).
ImageDataset images_from_bytes(std::span<const std::uint8_t> bytes, long n, long h, long w);

inline double rescale_pixel(std::uint8_t v) { return 1.0 + static_cast<double>(v) / 255.0; }
/// Inverse of rescale_pixel on the byte grid.
std::uint8_t pixel_to_byte(double v);

/// Block-mean pooling by `factor` in both directions.
ImageDataset downsample(const ImageDataset& dataset, long factor);

/// Drops `border` pixels from every edge (28x28 -> 24x24 for border 2).
ImageDataset crop_border(const ImageDataset& dataset, long border);

/// Shuffled-epoch batching. The indices of iteration i depend only on
/// (seed, i); the last partial batch of an epoch is kept.
class EpochBatcher {
 public:
  EpochBatcher(long n, long batch_size, std::uint64_t seed);
  std::vector<long> batch(long iteration) const;
  long batches_per_epoch() const { return per_epoch_; }

 private:
  long n_;
  long batch_size_;
  long per_epoch_;
  std::uint64_t seed_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace gbm
