#include "motionlm/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

namespace motionlm {

namespace fs = std::filesystem;

void atomic_write_text(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for write: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

void save_tensor_blob(const std::string& base_path,
                      const std::vector<const nn::Parameter*>& params,
                      const nlohmann::json& extra) {
  fs::path base(base_path);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());

  nlohmann::ordered_json manifest;
  manifest["format"] = "f32-le";
  auto& entries = manifest["tensors"];
  entries = nlohmann::ordered_json::object();
  std::string blob;
  for (const auto* p : params) {
    if (entries.contains(p->name)) throw ConfigError("duplicate tensor name: " + p->name);
    entries[p->name] = {{"shape", p->value.shape}, {"offset", blob.size()}};
    blob.append(reinterpret_cast<const char*>(p->value.data.data()),
                p->value.data.size() * sizeof(float));
  }
  manifest["extra"] = extra;

  atomic_write_text(base_path + ".bin", blob);
  atomic_write_text(base_path + ".json", manifest.dump(2));
}

TensorBlob load_tensor_blob(const std::string& base_path) {
  auto manifest = nlohmann::json::parse(read_text_file(base_path + ".json"));
  std::string blob = read_text_file(base_path + ".bin");
  TensorBlob out;
  out.extra = manifest.value("extra", nlohmann::json::object());
  for (const auto& [name, entry] : manifest.at("tensors").items()) {
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    size_t offset = entry.at("offset").get<size_t>();
    nn::Tensor t(shape);
    size_t bytes = t.data.size() * sizeof(float);
    if (offset + bytes > blob.size()) throw DataError("blob truncated at tensor " + name);
    std::memcpy(t.data.data(), blob.data() + offset, bytes);
    out.tensors.emplace(name, std::move(t));
  }
  return out;
}

const nn::Tensor& TensorBlob::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint missing tensor: " + name);
  return it->second;
}

void load_parameters(const TensorBlob& blob, const std::vector<nn::Parameter*>& params) {
  for (auto* p : params) {
    const nn::Tensor& t = blob.get(p->name);
    if (!t.same_shape(p->value))
      throw DataError("checkpoint shape mismatch for " + p->name);
    p->value = t;
  }
}

}  // namespace motionlm
