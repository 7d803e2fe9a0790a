// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mrfrecon/tensor.hpp"

namespace mrf::io {

// One tensor = one little-endian raw buffer (<name>.bin) plus a JSON sidecar
// (<name>.json) holding shape, dtype and name.
void save_tensor(const std::filesystem::path& dir, const std::string& name, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& dir, const std::string& name);
bool tensor_exists(const std::filesystem::path& dir, const std::string& name);

void save_bundle(const std::filesystem::path& dir, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_bundle(const std::filesystem::path& dir);

// tiny helpers shared across the pipeline
void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

}  // namespace mrf::io
