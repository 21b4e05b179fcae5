#include "isilab/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "isilab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

namespace isilab {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "isilab-checkpoint-v1";

std::string kind_name(EncoderKind kind) {
  return kind == EncoderKind::conv3d_small ? "conv3d_small" : "mlp";
}

EncoderKind kind_from_name(const std::string& name) {
  if (name == "conv3d_small") return EncoderKind::conv3d_small;
  if (name == "mlp") return EncoderKind::mlp;
  throw FormatError("unknown encoder kind '" + name + "' in checkpoint manifest");
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string());

  json manifest;
  manifest["format"] = kFormatTag;
  manifest["dtype"] = "f32le";
  manifest["encoder"] = {{"kind", kind_name(model.config.kind)},
                         {"input_patch", model.config.input_patch},
                         {"backbone_dim", model.config.backbone_dim},
                         {"head_isimed_dim", model.config.head_isimed_dim},
                         {"head_barlow_dim", model.config.head_barlow_dim},
                         {"conv_channels", model.config.conv_channels},
                         {"seed", model.config.seed}};
  manifest["tensors"] = json::array();
  for (const auto& p : model.params)
    manifest["tensors"].push_back({{"name", p.name}, {"shape", p.value.shape()}});

  for (const auto& p : model.params) {
    std::vector<float> buf(p.value.values().size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<float>(p.value.values()[i]);
    const auto path = dir / (p.name + ".bin");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + path.string());
  }

  const auto manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + manifest_path.string() + " for writing");
  out << manifest.dump() << '\n';
  if (!out) throw IoError("failed writing " + manifest_path.string());
}

Model load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("unparsable checkpoint manifest: " + std::string(e.what()));
  }

  try {
    if (manifest.at("format").get<std::string>() != kFormatTag)
      throw FormatError("not an isilab checkpoint manifest");
    if (manifest.at("dtype").get<std::string>() != "f32le")
      throw FormatError("unsupported checkpoint dtype");

    const auto& enc = manifest.at("encoder");
    EncoderConfig config;
    config.kind = kind_from_name(enc.at("kind").get<std::string>());
    config.input_patch = enc.at("input_patch").get<std::int64_t>();
    config.backbone_dim = enc.at("backbone_dim").get<std::int64_t>();
    config.head_isimed_dim = enc.at("head_isimed_dim").get<std::int64_t>();
    config.head_barlow_dim = enc.at("head_barlow_dim").get<std::int64_t>();
    config.conv_channels = enc.at("conv_channels").get<std::vector<std::int64_t>>();
    config.seed = enc.at("seed").get<std::uint64_t>();

    const auto& tensors = manifest.at("tensors");
    bool with_heads = false;
    for (const auto& t : tensors)
      if (t.at("name").get<std::string>() == "head_isimed.weight") with_heads = true;

    Model model = init_model(config, with_heads);
    if (tensors.size() != model.params.size())
      throw ConfigMismatch("checkpoint holds " + std::to_string(tensors.size()) +
                           " tensors where the encoder config implies " +
                           std::to_string(model.params.size()));
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      auto& p = model.params[i];
      const auto& t = tensors.at(i);
      if (t.at("name").get<std::string>() != p.name)
        throw ConfigMismatch("checkpoint tensor '" + t.at("name").get<std::string>() +
                             "' does not match expected parameter '" + p.name + "'");
      if (t.at("shape").get<std::vector<std::int64_t>>() != p.value.shape())
        throw ConfigMismatch("checkpoint tensor '" + p.name + "' has an unexpected shape");

      const auto path = dir / (p.name + ".bin");
      std::ifstream bin(path, std::ios::binary);
      if (!bin) throw IoError("cannot open " + path.string());
      std::vector<float> buf(p.value.values().size());
      bin.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (static_cast<std::size_t>(bin.gcount()) != buf.size() * sizeof(float))
        throw TruncatedData(path.string() + " ends before all tensor values");
      bin.peek();
      if (!bin.eof()) throw FormatError(path.string() + " has trailing bytes");
      for (std::size_t j = 0; j < buf.size(); ++j)
        p.value.values()[j] = static_cast<double>(buf[j]);
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace isilab
