#include "gbm/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace gbm {

void ToyDatasetSpec::validate() const {
  validate_mixture(components);
  if (n < 1) throw DomainError("toy dataset: n must be >= 1");
  const Eigen::Index d = components.front().params.dim();
  if (kind == ToyKind::lognormal_1d && (d != 1 || components.size() != 1))
    throw DomainError("toy dataset: lognormal-1d needs one 1-D component");
  if (kind == ToyKind::lognormal_mixture_2d && d != 2)
    throw DomainError("toy dataset: lognormal-mixture-2d needs 2-D components");
}

SampleBatch generate_toy(const ToyDatasetSpec& spec) {
  spec.validate();
  if (spec.components.size() == 1) return lognormal_sample(spec.components[0].params, spec.n, spec.seed);

  Rng rng(spec.seed);
  const Eigen::Index d = spec.components.front().params.dim();
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : spec.components) cumulative.push_back(acc += c.weight);
  SampleBatch out;
  out.values.resize(d, spec.n);
  out.seed = spec.seed;
  for (long i = 0; i < spec.n; ++i) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto j = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                         spec.components.size() - 1);
    const auto& p = spec.components[j].params;
    for (Eigen::Index r = 0; r < d; ++r) out.values(r, i) = std::exp(p.mu(r) + p.sigma * rng.normal());
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::string hex_magic(std::uint32_t m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", m);
  return buf;
}

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
  if (bytes.size() < 4) throw ParseError("IDX: file shorter than the 4-byte magic", bytes.size());
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic)
    throw ParseError("IDX: bad magic " + hex_magic(magic) + ", expected " + hex_magic(expected_magic), 0);
  const std::size_t ndims = magic & 0xffu;
  if (ndims == 0) throw ParseError("IDX: zero dimensions", 3);

  IdxTensor t;
  std::size_t off = 4;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    if (bytes.size() < off + 4) throw ParseError("IDX: truncated dimension header", bytes.size());
    const std::uint32_t dim = read_be32(bytes, off);
    t.dims.push_back(dim);
    count *= dim;
    if (count > (std::uint64_t{1} << 40)) throw ParseError("IDX: dimension product is implausibly large", off);
    off += 4;
  }
  const std::uint64_t available = bytes.size() - off;
  if (available < count)
    throw ParseError("IDX: truncated payload, expected " + std::to_string(count) + " bytes, found " +
                         std::to_string(available),
                     bytes.size());
  if (available > count)
    throw ParseError("IDX: dimension/payload mismatch, " + std::to_string(available - count) +
                         " trailing bytes",
                     off + count);
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  return t;
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor, std::uint32_t magic) {
  std::vector<std::uint8_t> out;
  write_be32(out, magic);
  for (auto d : tensor.dims) write_be32(out, d);
  out.insert(out.end(), tensor.data.begin(), tensor.data.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageDataset images_from_bytes(std::span<const std::uint8_t> bytes, long n, long h, long w) {
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(h * w) != bytes.size())
    throw StructuralError("images_from_bytes: byte count does not match n*h*w");
  ImageDataset ds;
  ds.height = h;
  ds.width = w;
  ds.images.resize(h * w, n);
  for (long i = 0; i < n; ++i)
    for (long p = 0; p < h * w; ++p)
      ds.images(p, i) = rescale_pixel(bytes[static_cast<std::size_t>(i * h * w + p)]);
  return ds;
}

ImageDataset load_idx(const std::filesystem::path& images_path,
                      const std::optional<std::filesystem::path>& labels_path) {
  const auto bytes = read_file_bytes(images_path);
  const IdxTensor t = parse_idx(bytes, idx_image_magic);
  ImageDataset ds = images_from_bytes(t.data, t.dims[0], t.dims[1], t.dims[2]);
  ds.source = images_path.string();
  if (labels_path) {
    const auto lbytes = read_file_bytes(*labels_path);
    IdxTensor l = parse_idx(lbytes, idx_label_magic);
    if (l.dims[0] != t.dims[0])
      throw ParseError("IDX: label count " + std::to_string(l.dims[0]) + " differs from image count " +
                           std::to_string(t.dims[0]),
                       4);
    ds.labels = std::move(l.data);
  }
  return ds;
}

std::uint8_t pixel_to_byte(double v) {
  const double b = std::round((v - 1.0) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(b, 0.0, 255.0));
}

ImageDataset downsample(const ImageDataset& dataset, long factor) {
  if (factor < 1 || dataset.height % factor != 0 || dataset.width % factor != 0)
    throw DomainError("downsample: image size " + std::to_string(dataset.height) + "x" +
                      std::to_string(dataset.width) + " not divisible by factor " + std::to_string(factor));
  if (factor == 1) return dataset;
  ImageDataset out = dataset;
  out.height = dataset.height / factor;
  out.width = dataset.width / factor;
  out.images.resize(out.height * out.width, dataset.images.cols());
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (Eigen::Index i = 0; i < dataset.images.cols(); ++i)
    for (long r = 0; r < out.height; ++r)
      for (long c = 0; c < out.width; ++c) {
        double s = 0.0;
        for (long dr = 0; dr < factor; ++dr)
          for (long dc = 0; dc < factor; ++dc)
            s += dataset.images((r * factor + dr) * dataset.width + (c * factor + dc), i);
        out.images(r * out.width + c, i) = s * inv;
      }
  return out;
}

ImageDataset crop_border(const ImageDataset& dataset, long border) {
  if (border < 0 || 2 * border >= dataset.height || 2 * border >= dataset.width)
    throw DomainError("crop_border: border " + std::to_string(border) + " too large for " +
                      std::to_string(dataset.height) + "x" + std::to_string(dataset.width));
  if (border == 0) return dataset;
  ImageDataset out = dataset;
  out.height = dataset.height - 2 * border;
  out.width = dataset.width - 2 * border;
  out.images.resize(out.height * out.width, dataset.images.cols());
  for (Eigen::Index i = 0; i < dataset.images.cols(); ++i)
    for (long r = 0; r < out.height; ++r)
      for (long c = 0; c < out.width; ++c)
        out.images(r * out.width + c, i) = dataset.images((r + border) * dataset.width + c + border, i);
  return out;
}

EpochBatcher::EpochBatcher(long n, long batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), seed_(seed) {
  if (n < 1 || batch_size < 1) throw DomainError("EpochBatcher: n and batch_size must be >= 1");
  per_epoch_ = (n + batch_size - 1) / batch_size;
}

std::vector<long> EpochBatcher::batch(long iteration) const {
  const long epoch = iteration / per_epoch_;
  const long b = iteration % per_epoch_;
  std::vector<long> perm(static_cast<std::size_t>(n_));
  std::iota(perm.begin(), perm.end(), 0L);
  Rng rng = Rng(seed_).split(static_cast<std::uint64_t>(epoch));
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const long lo = b * batch_size_;
  const long hi = std::min(n_, lo + batch_size_);
  return {perm.begin() + lo, perm.begin() + hi};
}

}  // namespace gbm
