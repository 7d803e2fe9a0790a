// SPDX-License-Identifier: Apache-2.0
#include "mrfrecon/tensor_io.hpp"

#include <bit>
#include <fstream>

#include "json.hpp"

namespace mrf::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian raw buffers");

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  require(os.good(), "cannot open " + file.string() + " for writing");
  os << text;
}

std::string read_text(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  require(is.good(), "cannot open " + file.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void save_tensor(const fs::path& dir, const std::string& name, const Tensor& t) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / (name + ".bin"), std::ios::binary | std::ios::trunc);
    require(os.good(), "cannot write " + (dir / (name + ".bin")).string());
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * t.buffer_len()));
  }
  json meta;
  meta["name"] = name;
  meta["shape"] = t.shape();
  meta["dtype"] = t.is_complex() ? "complex128" : "real64";
  write_text(dir / (name + ".json"), meta.dump(2) + "\n");
}

bool tensor_exists(const fs::path& dir, const std::string& name) {
  return fs::exists(dir / (name + ".bin")) && fs::exists(dir / (name + ".json"));
}

Tensor load_tensor(const fs::path& dir, const std::string& name) {
  json meta = json::parse(read_text(dir / (name + ".json")));
  Shape shape = meta.at("shape").get<Shape>();
  std::string dt = meta.at("dtype").get<std::string>();
  DType dtype = dt == "complex128" ? DType::Complex128 : DType::Real64;
  Tensor t = Tensor::zeros(shape, dtype);
  std::ifstream is(dir / (name + ".bin"), std::ios::binary);
  require(is.good(), "cannot read " + (dir / (name + ".bin")).string());
  is.read(reinterpret_cast<char*>(t.mutable_data()),
          static_cast<std::streamsize>(sizeof(double) * t.buffer_len()));
  require(is.gcount() == static_cast<std::streamsize>(sizeof(double) * t.buffer_len()),
          "short read on " + (dir / (name + ".bin")).string());
  return t;
}

void save_bundle(const fs::path& dir, const std::map<std::string, Tensor>& tensors) {
  for (const auto& [name, t] : tensors) save_tensor(dir, name, t);
}

std::map<std::string, Tensor> load_bundle(const fs::path& dir) {
  std::map<std::string, Tensor> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") {
      std::string name = e.path().stem().string();
      if (fs::exists(dir / (name + ".bin"))) out[name] = load_tensor(dir, name);
    }
  }
  return out;
}

}  // namespace mrf::io
