#include "cluekit/bundle_io.hpp"

#include <cstdio>

namespace cluekit {
namespace {

struct Entry {
  std::string name;
  Tensor* tensor;
};

std::vector<Entry> entries(ModelBundle& b) {
  std::vector<Entry> out;
  auto add_mlp = [&](const std::string& prefix, Mlp& m) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", &m.layers[l].weight});
      out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", &m.layers[l].bias});
    }
  };
  add_mlp("encoder.trunk", b.encoder.trunk);
  out.push_back({"encoder.mean.weight", &b.encoder.mean.weight});
  out.push_back({"encoder.mean.bias", &b.encoder.mean.bias});
  out.push_back({"encoder.logvar.weight", &b.encoder.logvar.weight});
  out.push_back({"encoder.logvar.bias", &b.encoder.logvar.bias});
  add_mlp("decoder", b.decoder);
  for (std::size_t e = 0; e < b.ensemble.size(); ++e) add_mlp("ensemble" + std::to_string(e), b.ensemble[e]);
  return out;
}

nlohmann::json mlp_arch(const Mlp& m) {
  std::vector<std::size_t> sizes{m.layers.empty() ? 0 : m.input_dim()};
  for (const auto& l : m.layers) sizes.push_back(l.out_dim());
  return {{"sizes", sizes}, {"hidden", activation_name(m.hidden)}, {"output", activation_name(m.output)}};
}

Mlp mlp_from_arch(const nlohmann::json& j) {
  const auto sizes = j.at("sizes").get<std::vector<std::size_t>>();
  return Mlp::zeros(sizes, activation_from_name(j.at("hidden").get<std::string>()),
                    activation_from_name(j.at("output").get<std::string>()));
}

std::string file_name(std::size_t i, const std::string& name) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu_", i);
  return "tensors/" + std::string(buf) + name + ".f64";
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const fs::path& dir, const nlohmann::json& meta) {
  bundle.validate();
  ModelBundle copy = bundle;
  nlohmann::json tensors = nlohmann::json::array();
  auto list = entries(copy);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto file = file_name(i, list[i].name);
    const auto bytes = encode_f64(list[i].tensor->data());
    write_atomic(dir / file, bytes);
    tensors.push_back(
        {{"name", list[i].name}, {"shape", list[i].tensor->shape()}, {"file", file}, {"sha256", sha256_hex(bytes)}});
  }
  nlohmann::json ens = nlohmann::json::array();
  for (const auto& m : bundle.ensemble) ens.push_back(mlp_arch(m));
  nlohmann::json manifest = {
      {"format", "cluekit-bundle-1"},
      {"dims",
       {{"input", bundle.dims.input},
        {"latent", bundle.dims.latent},
        {"classes", bundle.dims.classes},
        {"members", bundle.dims.members}}},
      {"architecture", {{"encoder_trunk", mlp_arch(bundle.encoder.trunk)}, {"decoder", mlp_arch(bundle.decoder)}, {"ensemble", ens}}},
      {"tensors", tensors},
      {"report", bundle.report},
      {"meta", meta},
  };
  write_atomic(dir / "manifest.json", dump_json(manifest));
}

nlohmann::json load_bundle_meta(const fs::path& dir) {
  return nlohmann::json::parse(read_file(dir / "manifest.json")).value("meta", nlohmann::json::object());
}

ModelBundle load_bundle(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw ConfigError("no bundle at '" + dir.string() + "'");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bundle manifest '" + (dir / "manifest.json").string() + "' is malformed: " + e.what());
  }
  ModelBundle b;
  const auto& d = manifest.at("dims");
  b.dims = {d.at("input"), d.at("latent"), d.at("classes"), d.at("members")};
  const auto& arch = manifest.at("architecture");
  b.encoder.trunk = mlp_from_arch(arch.at("encoder_trunk"));
  b.decoder = mlp_from_arch(arch.at("decoder"));
  for (const auto& m : arch.at("ensemble")) b.ensemble.push_back(mlp_from_arch(m));
  b.report = manifest.value("report", nlohmann::json::object());
  auto list = entries(b);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != list.size()) throw ShapeError("bundle: manifest lists an unexpected number of tensors");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != list[i].name) throw ShapeError("bundle: unexpected tensor " + t.at("name").dump());
    const auto shape = t.at("shape").get<Shape>();
    const auto file = t.at("file").get<std::string>();
    const auto bytes = read_file(dir / file);
    if (t.contains("sha256") && sha256_hex(bytes) != t.at("sha256").get<std::string>())
      throw ConfigError("bundle: " + file + " does not match its recorded hash");
    *list[i].tensor = Tensor(shape, decode_f64(bytes));
  }
  b.validate();
  return b;
}

std::vector<std::string> bundle_files(const fs::path& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  std::vector<std::string> out;
  for (const auto& t : manifest.at("tensors")) out.push_back(t.at("file"));
  out.push_back("manifest.json");
  return out;
}

}  // namespace cluekit
