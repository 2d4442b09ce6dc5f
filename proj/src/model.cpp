#include "kcs/model.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace kcs {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'K', 'C', 'S', 'T', 'N', 'S', 'R', '1'};

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"input_resolution", cfg.input_resolution},
              {"width_base", cfg.width_base},
              {"blocks", cfg.blocks},
              {"dropout_p", cfg.dropout_p},
              {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.input_resolution = j.at("input_resolution").get<int>();
  cfg.width_base = j.at("width_base").get<int>();
  cfg.blocks = j.at("blocks").get<std::vector<int>>();
  cfg.dropout_p = j.at("dropout_p").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

json stats_to_json(const ChannelStats& s) {
  return json{{"mu", s.mu}, {"sigma", s.sigma}, {"n_samples", s.n_samples}};
}

ChannelStats stats_from_json(const json& j) {
  ChannelStats s;
  s.mu = j.at("mu").get<std::array<double, 3>>();
  s.sigma = j.at("sigma").get<std::array<double, 3>>();
  s.n_samples = j.at("n_samples").get<std::int64_t>();
  return s;
}

void write_archive(const std::filesystem::path& path, json header,
                   const std::vector<std::pair<std::string, nn::Tensor<float>*>>& tensors) {
  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    index.push_back({{"name", name}, {"shape", t->shape}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t->numel()) * sizeof(float);
  }
  header["tensors"] = std::move(index);
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write archive: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->numel() * sizeof(float)));
  if (!out) throw std::runtime_error("archive write failed: " + path.string());
}

struct Archive {
  json header;
  std::map<std::string, nn::Tensor<float>> tensors;
};

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open archive: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a tensor archive: " + path.string());
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("truncated archive header: " + path.string());

  Archive a;
  a.header = json::parse(htext);
  const std::streampos data_start = in.tellg();
  for (const auto& entry : a.header.at("tensors")) {
    nn::Tensor<float> t(entry.at("shape").get<std::vector<int>>());
    in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated tensor data in " + path.string());
    a.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return a;
}

}  // namespace

void save_checkpoint(DualHeadModelF& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  json header{{"format", 1},
              {"dtype", "f32"},
              {"kind", "checkpoint"},
              {"model", model_config_to_json(model.config())},
              {"stage", meta.stage},
              {"stats", stats_to_json(meta.stats)},
              {"random_init_backbone", meta.random_init_backbone},
              {"crop", meta.disc_crop ? "disc" : "center"}};
  write_archive(path, std::move(header), model.named_state());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  Archive a = read_archive(path);
  if (a.header.value("kind", "") != "checkpoint")
    throw std::runtime_error("archive is not a checkpoint: " + path.string());
  LoadedCheckpoint lc{DualHeadModelF::build(model_config_from_json(a.header.at("model"))), {}};
  lc.meta.stage = a.header.value("stage", 0);
  lc.meta.stats = stats_from_json(a.header.at("stats"));
  lc.meta.random_init_backbone = a.header.value("random_init_backbone", false);
  lc.meta.disc_crop = a.header.value("crop", "disc") == std::string("disc");
  for (auto& [name, dst] : lc.model.named_state()) {
    auto it = a.tensors.find(name);
    if (it == a.tensors.end())
      throw std::runtime_error("checkpoint missing tensor '" + name + "': " + path.string());
    if (it->second.shape != dst->shape)
      throw std::runtime_error("checkpoint tensor shape mismatch for '" + name + "'");
    *dst = std::move(it->second);
  }
  return lc;
}

void save_backbone_archive(DualHeadModelF& model, const std::filesystem::path& path) {
  json header{{"format", 1},
              {"dtype", "f32"},
              {"kind", "backbone"},
              {"model", model_config_to_json(model.config())}};
  write_archive(path, std::move(header), model.backbone_state());
}

void load_backbone_weights(DualHeadModelF& model, const std::filesystem::path& archive) {
  Archive a = read_archive(archive);
  std::vector<std::string> missing, mismatched;
  auto state = model.backbone_state();
  for (auto& [name, dst] : state) {
    auto it = a.tensors.find(name);
    if (it == a.tensors.end()) {
      missing.push_back(name);
    } else if (it->second.shape != dst->shape) {
      mismatched.push_back(name);
    }
  }
  if (!missing.empty() || !mismatched.empty()) {
    std::string msg = "backbone archive " + archive.string() + " does not match the model.";
    if (!missing.empty()) {
      msg += " missing:";
      for (const auto& n : missing) msg += " " + n;
    }
    if (!mismatched.empty()) {
      msg += " shape mismatch:";
      for (const auto& n : mismatched) msg += " " + n;
    }
    throw std::runtime_error(msg);
  }
  for (auto& [name, dst] : state) *dst = std::move(a.tensors.at(name));
}

}  // namespace kcs
