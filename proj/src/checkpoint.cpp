#include "neurofuse/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "neurofuse/io.hpp"

namespace neurofuse::io {

namespace {

constexpr char kMagic[8] = {'N', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos, const std::string& origin) {
  if (pos + sizeof(T) > in.size()) throw IoError(origin + ": truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

struct TensorSlot {
  std::string name;
  std::vector<Index> shape;  // logical shape written to the header
  std::vector<double>* values;
};

// Conv weights are held as (out, k*in) with column j*in + c; the file order
// is (out, in, k).
std::vector<double> conv_to_file(const nn::Conv1d<double>& conv) {
  const Index out = conv.weight.rows(), in = conv.in_channels, k = conv.kernel;
  std::vector<double> v(static_cast<std::size_t>(out * in * k));
  for (Index o = 0; o < out; ++o)
    for (Index c = 0; c < in; ++c)
      for (Index j = 0; j < k; ++j) v[static_cast<std::size_t>((o * in + c) * k + j)] = conv.weight(o, j * in + c);
  return v;
}

void conv_from_file(const std::vector<double>& v, nn::Conv1d<double>& conv) {
  const Index out = conv.weight.rows(), in = conv.in_channels, k = conv.kernel;
  for (Index o = 0; o < out; ++o)
    for (Index c = 0; c < in; ++c)
      for (Index j = 0; j < k; ++j) conv.weight(o, j * in + c) = v[static_cast<std::size_t>((o * in + c) * k + j)];
}

std::vector<double> flat(const RowMatrixXd& m) { return {m.data(), m.data() + m.size()}; }

std::vector<double> flat(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::vector<Index>> logical_shapes(const nn::Architecture& a, Index scaler_width) {
  return {{a.conv1_filters, 1, a.conv1_kernel},
          {a.conv1_filters},
          {a.conv2_filters, a.conv1_filters, a.conv2_kernel},
          {a.conv2_filters},
          {a.dense_units, a.flat_len()},
          {a.dense_units},
          {a.classes, a.dense_units},
          {a.classes},
          {scaler_width},
          {scaler_width}};
}

std::vector<std::string> tensor_names() {
  std::vector<std::string> names(nn::kTensorNames.begin(), nn::kTensorNames.end());
  names.emplace_back("scaler.mean");
  names.emplace_back("scaler.std");
  return names;
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  const auto& m = ckpt.model;
  if (ckpt.scaler.mean.size() != ckpt.scaler.std.size()) {
    throw ValidationError("scaler mean and std differ in length");
  }
  std::vector<std::vector<double>> data = {conv_to_file(m.conv1), flat(m.conv1.bias), conv_to_file(m.conv2),
                                           flat(m.conv2.bias),    flat(m.dense.weight), flat(m.dense.bias),
                                           flat(m.output.weight), flat(m.output.bias),  flat(ckpt.scaler.mean),
                                           flat(ckpt.scaler.std)};
  const auto names = tensor_names();
  const auto shapes = logical_shapes(m.arch, ckpt.scaler.mean.size());
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"shape", shapes[i]}, {"dtype", "<f8"}});
  }
  nlohmann::json header{{"architecture", m.arch},
                        {"tensors", tensors},
                        {"scaler_floored_columns", ckpt.scaler.floored_columns},
                        {"metadata", ckpt.metadata}};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& t : data)
    for (double v : t) put_le<double>(out, v);
  return out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(origin + ": not a checkpoint file");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos, origin);
  if (version != Checkpoint::kFormatVersion) {
    throw ValidationError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos, origin);
  if (pos + header_len > bytes.size()) throw IoError(origin + ": truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(origin + ": corrupt checkpoint header: " + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  try {
    const nn::Architecture arch = header.at("architecture").get<nn::Architecture>();
    arch.validate();
    ckpt.model = nn::ModelParams<double>::zeros(arch);
    ckpt.metadata = header.value("metadata", nlohmann::json::object());
    ckpt.scaler.floored_columns = header.value("scaler_floored_columns", std::vector<Index>{});

    const auto& tensors = header.at("tensors");
    const auto names = tensor_names();
    if (tensors.size() != names.size()) throw ValidationError(origin + ": unexpected tensor count");
    const Index scaler_width = tensors.at(8).at("shape").at(0).get<Index>();
    const auto expected = logical_shapes(arch, scaler_width);
    std::vector<std::vector<double>> values(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& t = tensors.at(i);
      if (t.at("name").get<std::string>() != names[i]) {
        throw ValidationError(origin + ": expected tensor " + names[i]);
      }
      if (t.at("shape").get<std::vector<Index>>() != expected[i]) {
        throw ValidationError(origin + ": shape mismatch for " + names[i]);
      }
      if (t.value("dtype", "<f8") != "<f8") throw ValidationError(origin + ": unsupported dtype for " + names[i]);
      Index count = 1;
      for (Index d : expected[i]) count *= d;
      values[i].resize(static_cast<std::size_t>(count));
      for (auto& v : values[i]) v = get_le<double>(bytes, pos, origin);
    }
    if (pos != bytes.size()) throw ValidationError(origin + ": trailing bytes after tensors");

    auto& m = ckpt.model;
    conv_from_file(values[0], m.conv1);
    conv_from_file(values[2], m.conv2);
    auto assign = [](RowMatrixXd& dst, const std::vector<double>& src) {
      std::copy(src.begin(), src.end(), dst.data());
    };
    assign(m.conv1.bias, values[1]);
    assign(m.conv2.bias, values[3]);
    assign(m.dense.weight, values[4]);
    assign(m.dense.bias, values[5]);
    assign(m.output.weight, values[6]);
    assign(m.output.bias, values[7]);
    ckpt.scaler.mean = Eigen::Map<const Eigen::VectorXd>(values[8].data(), scaler_width);
    ckpt.scaler.std = Eigen::Map<const Eigen::VectorXd>(values[9].data(), scaler_width);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": malformed checkpoint header: " + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text(path, checkpoint_bytes(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_text(path), path.string());
}

}  // namespace neurofuse::io
