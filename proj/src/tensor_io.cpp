// Copyright 2026 The NCFL Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ncfl/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ncfl {
namespace {

constexpr char kMagic[4] = {'N', 'C', 'F', 'L'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

uint32_t get_u32(const std::string& in, size_t offset) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_tensor(const torch::Tensor& t) {
  if (!t.defined()) throw TensorFormatError("cannot encode an undefined tensor");
  if (t.dim() == 0) throw TensorFormatError("cannot encode a 0-d tensor; reshape to [1]");
  for (int64_t d : t.sizes()) {
    if (d <= 0) throw TensorFormatError("zero-length dimension");
    if (d > static_cast<int64_t>(UINT32_MAX)) throw TensorFormatError("dimension exceeds u32");
  }
  auto data = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (!torch::isfinite(data).all().item<bool>()) throw TensorFormatError("non-finite values in payload");

  std::string out(kMagic, 4);
  put_u32(out, static_cast<uint32_t>(t.dim()));
  for (int64_t d : t.sizes()) put_u32(out, static_cast<uint32_t>(d));
  const size_t header = out.size();
  const size_t n = static_cast<size_t>(data.numel());
  out.resize(header + 4 * n);
  const float* src = data.data_ptr<float>();
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + header, src, 4 * n);
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint32_t bits;
      std::memcpy(&bits, src + i, 4);
      for (int b = 0; b < 4; ++b) out[header + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
  return out;
}

torch::Tensor decode_tensor(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw TensorFormatError("bad magic");
  const uint32_t ndim = get_u32(bytes, 4);
  if (ndim == 0) throw TensorFormatError("ndim must be positive");
  if (bytes.size() < 8 + 4ull * ndim) throw TensorFormatError("truncated header");
  std::vector<int64_t> dims(ndim);
  uint64_t count = 1;
  for (uint32_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes, 8 + 4 * i);
    if (dims[i] == 0) throw TensorFormatError("zero-length dimension");
    count *= static_cast<uint64_t>(dims[i]);
  }
  const size_t header = 8 + 4ull * ndim;
  const uint64_t expected = header + 4 * count;
  if (bytes.size() < expected) {
    std::ostringstream os;
    os << "truncated payload: header declares " << count << " floats, file holds " << (bytes.size() - header) / 4;
    throw TensorFormatError(os.str());
  }
  if (bytes.size() > expected) throw TensorFormatError("trailing bytes after payload");

  auto t = torch::empty(dims, torch::kFloat32);
  float* dst = t.data_ptr<float>();
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, bytes.data() + header, 4 * count);
  } else {
    for (uint64_t i = 0; i < count; ++i) {
      const uint32_t bits = get_u32(bytes, header + 4 * i);
      std::memcpy(dst + i, &bits, 4);
    }
  }
  return t;
}

void write_tensor(const torch::Tensor& t, const std::filesystem::path& path) {
  const std::string bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

torch::Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return decode_tensor(buf.str());
  } catch (const TensorFormatError& e) {
    throw TensorFormatError(path.string() + ": " + e.what());
  }
}

void write_tensor_dir(const std::map<std::string, torch::Tensor>& tensors, const std::filesystem::path& dir,
                      const std::string& extra_json) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "ncfl-tensor-dir";
  manifest["meta"] = nlohmann::json::parse(extra_json);
  manifest["tensors"] = nlohmann::json::object();
  for (const auto& [name, t] : tensors) {
    const std::string file = name + ".ncfl";
    write_tensor(t, dir / file);
    manifest["tensors"][name] = file;
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

std::map<std::string, torch::Tensor> read_tensor_dir(const std::filesystem::path& dir, std::string* extra_json) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  in >> manifest;
  if (manifest.value("format", "") != "ncfl-tensor-dir") {
    throw TensorFormatError(dir.string() + ": unrecognized manifest format");
  }
  std::map<std::string, torch::Tensor> out;
  for (const auto& item : manifest["tensors"].items()) {
    out[item.key()] = read_tensor(dir / item.value().get<std::string>());
  }
  if (extra_json) *extra_json = manifest["meta"].dump();
  return out;
}

}  // namespace ncfl
