// Checkpoint primitives: atomic text/file writes and the f32 tensor blob
// (<base>.bin little-endian data + <base>.json manifest of name -> shape,
// offset, plus a free-form "extra" section for module configs).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "motionlm/nn/graph.hpp"

namespace motionlm {

void atomic_write_text(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // DataError if missing

void save_tensor_blob(const std::string& base_path,
                      const std::vector<const nn::Parameter*>& params,
                      const nlohmann::json& extra = nlohmann::json::object());

struct TensorBlob {
  std::map<std::string, nn::Tensor> tensors;
  nlohmann::json extra;

  const nn::Tensor& get(const std::string& name) const;  // DataError if absent
};

TensorBlob load_tensor_blob(const std::string& base_path);

// Copy blob tensors into parameters by name with shape checks.
void load_parameters(const TensorBlob& blob, const std::vector<nn::Parameter*>& params);

}  // namespace motionlm
