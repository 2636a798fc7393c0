#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "neurofuse/io.hpp"

namespace neurofuse::io {

static_assert(std::endian::native == std::endian::little, "NPY writer assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_literal(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

NpyHeader parse_header(std::istream& in, const fs::path& path) {
  char magic[6];
  unsigned char version[2];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) {
    throw IoError(path.string() + ": not an NPY file");
  }
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = static_cast<std::uint32_t>(b[0] | (b[1] << 8));
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = static_cast<std::uint32_t>(b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24));
  } else {
    throw IoError(path.string() + ": unsupported NPY version " + std::to_string(version[0]));
  }
  std::string dict(header_len, '\0');
  if (!in.read(dict.data(), header_len)) throw IoError(path.string() + ": truncated NPY header");

  NpyHeader h;
  std::smatch m;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  if (!std::regex_search(dict, m, descr_re)) throw IoError(path.string() + ": NPY header lacks descr");
  h.descr = m[1];
  if (!std::regex_search(dict, m, order_re)) throw IoError(path.string() + ": NPY header lacks fortran_order");
  h.fortran_order = m[1] == "True";
  if (!std::regex_search(dict, m, shape_re)) throw IoError(path.string() + ": NPY header lacks shape");
  std::stringstream dims(m[1].str());
  std::string token;
  while (std::getline(dims, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    h.shape.push_back(static_cast<std::size_t>(std::stoull(token.substr(first))));
  }
  return h;
}

template <typename T>
void read_values(std::istream& in, std::size_t count, double* out, const fs::path& path) {
  std::vector<T> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(T)))) {
    throw IoError(path.string() + ": truncated NPY data");
  }
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(buf[i]);
}

}  // namespace

std::size_t NpyHeader::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string npy_preamble(const std::string& descr, const std::vector<std::size_t>& shape) {
  std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape_literal(shape) + ", }";
  const std::size_t fixed = 10;  // magic(6) + version(2) + length(2)
  std::size_t total = fixed + dict.size() + 1;
  const std::size_t padded = (total + 63) / 64 * 64;
  dict.append(padded - total, ' ');
  dict.push_back('\n');
  const auto len = static_cast<std::uint16_t>(dict.size());
  std::string out(kMagic, 6);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  return out + dict;
}

void write_npy(const fs::path& path, const RowMatrixXd& m) {
  std::ofstream out = open_out(path);
  const std::string pre = npy_preamble("<f8", {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  out.write(pre.data(), static_cast<std::streamsize>(pre.size()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  finish(out, path);
}

void write_npy(const fs::path& path, std::span<const std::int64_t> v) {
  std::ofstream out = open_out(path);
  const std::string pre = npy_preamble("<i8", {v.size()});
  out.write(pre.data(), static_cast<std::streamsize>(pre.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(std::int64_t)));
  finish(out, path);
}

NpyWriter::NpyWriter(const fs::path& path, Index rows, Index cols)
    : path_(path), out_(open_out(path)), rows_(rows), cols_(cols) {
  const std::string pre = npy_preamble("<f8", {static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  out_.write(pre.data(), static_cast<std::streamsize>(pre.size()));
}

void NpyWriter::append(const RowMatrixXd& block) {
  if (block.cols() != cols_) throw ValidationError(path_.string() + ": block width mismatch");
  if (written_ + block.rows() > rows_) throw ValidationError(path_.string() + ": more rows than declared");
  out_.write(reinterpret_cast<const char*>(block.data()), static_cast<std::streamsize>(block.size() * sizeof(double)));
  written_ += block.rows();
}

void NpyWriter::close() {
  if (written_ != rows_) {
    throw ValidationError(path_.string() + ": wrote " + std::to_string(written_) + " of " + std::to_string(rows_) +
                          " rows");
  }
  finish(out_, path_);
  out_.close();
}

NpyHeader read_npy_header(const fs::path& path) {
  std::ifstream in = open_in(path);
  return parse_header(in, path);
}

RowMatrixXd read_npy_matrix(const fs::path& path) {
  std::ifstream in = open_in(path);
  const NpyHeader h = parse_header(in, path);
  if (h.fortran_order) throw IoError(path.string() + ": Fortran-ordered arrays are not supported");
  if (h.shape.empty() || h.shape.size() > 2) {
    throw IoError(path.string() + ": expected a 1-D or 2-D array");
  }
  const Index rows = static_cast<Index>(h.shape[0]);
  const Index cols = h.shape.size() == 2 ? static_cast<Index>(h.shape[1]) : 1;
  RowMatrixXd m(rows, cols);
  const std::size_t n = h.element_count();
  if (h.descr == "<f8") read_values<double>(in, n, m.data(), path);
  else if (h.descr == "<f4") read_values<float>(in, n, m.data(), path);
  else if (h.descr == "<i8") read_values<std::int64_t>(in, n, m.data(), path);
  else if (h.descr == "<i4") read_values<std::int32_t>(in, n, m.data(), path);
  else throw IoError(path.string() + ": unsupported dtype " + h.descr);
  return m;
}

std::vector<std::int64_t> read_npy_int64(const fs::path& path) {
  std::ifstream in = open_in(path);
  const NpyHeader h = parse_header(in, path);
  if ((h.descr != "<i8" && h.descr != "<i4") || h.shape.size() != 1) {
    throw IoError(path.string() + ": expected a 1-D <i8 or <i4 array");
  }
  std::vector<std::int64_t> v(h.shape[0]);
  if (h.descr == "<i4") {
    std::vector<std::int32_t> narrow(v.size());
    if (!in.read(reinterpret_cast<char*>(narrow.data()), static_cast<std::streamsize>(narrow.size() * 4))) {
      throw IoError(path.string() + ": truncated NPY data");
    }
    std::copy(narrow.begin(), narrow.end(), v.begin());
  } else if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8))) {
    throw IoError(path.string() + ": truncated NPY data");
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  finish(out, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace neurofuse::io
