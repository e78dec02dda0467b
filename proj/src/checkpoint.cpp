#include "gbm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace gbm {

using nlohmann::json;

nlohmann::json architecture_to_json(const ScoreNetArchitecture& arch) {
  return json{{"input_dim", arch.input_dim},
              {"time_frequencies", arch.time_frequencies},
              {"n_steps", arch.n_steps},
              {"hidden", arch.hidden},
              {"activation", "silu"},
              {"input_transform", "log"},
              {"output", "scaled_score"}};
}

ScoreNetArchitecture architecture_from_json(const nlohmann::json& j) {
  ScoreNetArchitecture a;
  a.input_dim = j.at("input_dim").get<Eigen::Index>();
  a.time_frequencies = j.at("time_frequencies").get<int>();
  a.n_steps = j.at("n_steps").get<long>();
  a.hidden = j.at("hidden").get<std::vector<Eigen::Index>>();
  if (j.value("activation", "silu") != "silu") throw StructuralError("checkpoint: unsupported activation");
  a.validate();
  return a;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

json block_table(const ScoreNetArchitecture& arch) {
  json blocks = json::array();
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    blocks.push_back({{"name", "layer" + std::to_string(l) + ".weight"},
                      {"rows", arch.layer_out(l)},
                      {"cols", arch.layer_in(l)}});
    blocks.push_back(
        {{"name", "layer" + std::to_string(l) + ".bias"}, {"rows", arch.layer_out(l)}, {"cols", 1}});
  }
  return blocks;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const ScoreNet<Scalar>& net, const std::filesystem::path& path,
                     const nlohmann::json& metadata) {
  const auto& theta = net.parameters();
  std::vector<unsigned char> payload(static_cast<std::size_t>(theta.size()) * 4);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(theta(i)));
    for (int b = 0; b < 4; ++b)
      payload[static_cast<std::size_t>(i) * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  const json header{{"format", "gbm-scorenet"},
                    {"version", checkpoint_version},
                    {"endianness", "little"},
                    {"dtype", "float32"},
                    {"layout", "column-major"},
                    {"architecture", architecture_to_json(net.architecture())},
                    {"parameter_count", theta.size()},
                    {"blocks", block_table(net.architecture())},
                    {"payload_bytes", payload.size()},
                    {"checksum", "fnv1a64:" + hex64(fnv1a64(payload.data(), payload.size()))},
                    {"metadata", metadata}};

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const auto nl = std::find(bytes.begin(), bytes.end(), static_cast<unsigned char>('\n'));
  if (nl == bytes.end()) throw LoadError("checkpoint " + path.string() + ": missing header terminator");

  json header;
  try {
    header = json::parse(bytes.begin(), nl);
  } catch (const json::exception& e) {
    throw LoadError("checkpoint " + path.string() + ": malformed header: " + e.what());
  }

  ScoreNetArchitecture arch;
  std::size_t payload_bytes = 0;
  std::string checksum;
  json blocks;
  try {
    if (header.at("format") != "gbm-scorenet") throw LoadError("checkpoint: unknown format tag");
    if (header.at("version").get<int>() != checkpoint_version)
      throw LoadError("checkpoint: version " + header.at("version").dump() + " not supported (expected " +
                      std::to_string(checkpoint_version) + ")");
    if (header.at("endianness") != "little" || header.at("dtype") != "float32")
      throw LoadError("checkpoint: only little-endian float32 payloads are supported");
    arch = architecture_from_json(header.at("architecture"));
    payload_bytes = header.at("payload_bytes").get<std::size_t>();
    checksum = header.at("checksum").get<std::string>();
    blocks = header.at("blocks");
  } catch (const json::exception& e) {
    throw LoadError("checkpoint " + path.string() + ": incomplete header: " + e.what());
  }

  if (blocks != block_table(arch))
    throw StructuralError("checkpoint " + path.string() + ": block table does not match architecture");
  const auto expected_bytes = static_cast<std::size_t>(arch.parameter_count()) * 4;
  if (payload_bytes != expected_bytes)
    throw StructuralError("checkpoint " + path.string() + ": payload size " + std::to_string(payload_bytes) +
                          " does not match architecture (" + std::to_string(expected_bytes) + ")");

  const std::size_t start = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  const std::size_t available = bytes.size() - start;
  if (available < payload_bytes)
    throw LoadError("checkpoint " + path.string() + ": truncated payload (" + std::to_string(available) +
                    " of " + std::to_string(payload_bytes) + " bytes)");
  if (available > payload_bytes) throw LoadError("checkpoint " + path.string() + ": trailing bytes");
  const unsigned char* payload = bytes.data() + start;
  if (checksum != "fnv1a64:" + hex64(fnv1a64(payload, payload_bytes)))
    throw LoadError("checkpoint " + path.string() + ": checksum mismatch");

  ScoreNet<Scalar> net(arch);
  typename ScoreNet<Scalar>::Vector theta(arch.parameter_count());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(payload[static_cast<std::size_t>(i) * 4 + b]) << (8 * b);
    theta(i) = static_cast<Scalar>(std::bit_cast<float>(bits));
  }
  net.set_parameters(theta);
  return {std::move(net), header.value("metadata", json::object())};
}

template void save_checkpoint<float>(const ScoreNet<float>&, const std::filesystem::path&, const json&);
template void save_checkpoint<double>(const ScoreNet<double>&, const std::filesystem::path&, const json&);
template LoadedCheckpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace gbm
