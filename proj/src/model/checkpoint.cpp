#include "fedmm/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedmm/error.hpp"

namespace fedmm::model {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in host order and assumes little endian");

namespace {

constexpr char kMagic[8] = {'F', 'E', 'D', 'M', 'M', 'C', 'K', '1'};

NamedTensor from_matrix(std::string name, std::size_t depth, const Matrix& m) {
  NamedTensor t;
  t.name = std::move(name);
  t.rows = static_cast<std::size_t>(m.rows());
  t.cols = static_cast<std::size_t>(m.cols());
  t.depth = depth;
  t.values.reserve(t.rows * t.cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.values.push_back(m(r, c));
  return t;
}

Matrix to_matrix(const NamedTensor& t) {
  Matrix m(static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[i++];
  return m;
}

}  // namespace

double TensorFile::attr(const std::string& key) const {
  for (const auto& [k, v] : attrs) {
    if (k == key) return v;
  }
  throw ParseError("checkpoint: missing attribute '" + key + "'");
}

std::string encode_tensor_file(const TensorFile& file) {
  nlohmann::ordered_json index;
  index["kind"] = file.kind;
  nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
  for (const auto& [k, v] : file.attrs) attrs[k] = v;
  index["attrs"] = std::move(attrs);
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& t : file.tensors) {
    if (t.values.size() != t.rows * t.cols) throw ValidationError("checkpoint: tensor " + t.name + " size mismatch");
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"depth", t.depth}});
  }
  index["tensors"] = std::move(tensors);
  const std::string text = index.dump();

  std::string out(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += text;
  for (const auto& t : file.tensors) {
    out.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(double));
  }
  return out;
}

TensorFile decode_tensor_file(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint: bad magic");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  if (16 + len > bytes.size()) throw ParseError("checkpoint: truncated index");
  TensorFile file;
  std::size_t offset = 16 + len;
  try {
    const auto index = nlohmann::json::parse(bytes.substr(16, len));
    file.kind = index.at("kind").get<std::string>();
    const auto& attrs = index.at("attrs");
    for (auto it = attrs.begin(); it != attrs.end(); ++it) {
      file.attrs.emplace_back(it.key(), it.value().get<double>());
    }
    for (const auto& entry : index.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.rows = entry.at("rows").get<std::size_t>();
      t.cols = entry.at("cols").get<std::size_t>();
      t.depth = entry.at("depth").get<std::size_t>();
      const std::size_t count = t.rows * t.cols;
      if (offset + count * sizeof(double) > bytes.size()) throw ParseError("checkpoint: truncated payload");
      t.values.resize(count);
      std::memcpy(t.values.data(), bytes.data() + offset, count * sizeof(double));
      offset += count * sizeof(double);
      file.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (offset != bytes.size()) throw ParseError("checkpoint: trailing bytes");
  return file;
}

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const auto bytes = encode_tensor_file(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_tensor_file(buf.str());
}

TensorFile adapter_to_tensors(const AdapterDelta& delta) {
  TensorFile file;
  file.kind = "adapter";
  file.attrs.emplace_back("scale", delta.scale);
  for (const auto& l : delta.layers) {
    file.tensors.push_back(from_matrix(l.name + ".B", l.depth, l.B));
    file.tensors.push_back(from_matrix(l.name + ".A", l.depth, l.A));
  }
  return file;
}

AdapterDelta adapter_from_tensors(const TensorFile& file) {
  if (file.kind != "adapter") throw ParseError("checkpoint: expected an adapter file, got " + file.kind);
  if (file.tensors.size() % 2 != 0) throw ParseError("checkpoint: unpaired adapter tensors");
  AdapterDelta delta;
  delta.scale = file.attr("scale");
  for (std::size_t i = 0; i < file.tensors.size(); i += 2) {
    const auto& b = file.tensors[i];
    const auto& a = file.tensors[i + 1];
    if (b.name.size() < 2 || b.name.substr(b.name.size() - 2) != ".B" ||
        a.name != b.name.substr(0, b.name.size() - 2) + ".A") {
      throw ParseError("checkpoint: malformed adapter pair " + b.name);
    }
    delta.layers.push_back({b.name.substr(0, b.name.size() - 2), b.depth, to_matrix(b), to_matrix(a)});
  }
  return delta;
}

TensorFile base_to_tensors(const BaseWeights& base) {
  TensorFile file;
  file.kind = "base";
  for (std::size_t i = 0; i < base.layers.size(); ++i) {
    const auto& l = base.layers[i];
    file.tensors.push_back(from_matrix(l.name + ".W", l.depth, base.weight[i]));
    file.tensors.push_back(from_matrix(l.name + ".b", l.depth, base.bias[i]));
  }
  return file;
}

void save_adapter(const std::filesystem::path& path, const AdapterDelta& delta) {
  save_tensor_file(path, adapter_to_tensors(delta));
}

AdapterDelta load_adapter(const std::filesystem::path& path) {
  return adapter_from_tensors(load_tensor_file(path));
}

}  // namespace fedmm::model
