#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "neurofuse/core.hpp"

namespace neurofuse::io {

namespace fs = std::filesystem;

// NPY v1.0 container: "\x93NUMPY", version 1.0, little-endian u16 header
// length, a Python dict literal padded with spaces and a trailing newline so
// the data starts on a 64-byte boundary, then the raw C-order array.

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;

  std::size_t element_count() const;
};

/// Magic, version, length field and padded dict; data follows directly.
std::string npy_preamble(const std::string& descr, const std::vector<std::size_t>& shape);

void write_npy(const fs::path& path, const RowMatrixXd& m);  // '<f8', 2-D
void write_npy(const fs::path& path, std::span<const std::int64_t> v);  // '<i8', 1-D

/// Streams a 2-D '<f8' array row block by row block; the shape is fixed up
/// front and close() checks that exactly that many values arrived.
class NpyWriter {
 public:
  NpyWriter(const fs::path& path, Index rows, Index cols);
  void append(const RowMatrixXd& block);
  void close();

 private:
  fs::path path_;
  std::ofstream out_;
  Index rows_, cols_, written_ = 0;
};

NpyHeader read_npy_header(const fs::path& path);
/// 2-D arrays load as-is, 1-D arrays as a column. Accepts <f8, <f4, <i8, <i4.
RowMatrixXd read_npy_matrix(const fs::path& path);
std::vector<std::int64_t> read_npy_int64(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

/// Trial id stem "<participant>_<session>_<trial>".
std::string trial_stem(int participant, int session, int trial);

struct ManifestEntry {
  int participant = 0;
  int session = 0;
  int trial = 0;
  EmotionLabel label = EmotionLabel::from_code(0);
  double sampling_rate = 1000.0;
  std::string raw_path;  // relative to the corpus root
  std::string eye_path;
};

struct Manifest {
  static constexpr int kFormatVersion = 1;
  static constexpr const char* kFileName = "manifest.json";

  int format_version = kFormatVersion;
  fs::path root;  // directory holding manifest.json; never serialized
  std::vector<ManifestEntry> trials;
  nlohmann::json provenance = nlohmann::json::object();

  fs::path raw_file(const ManifestEntry& e) const { return root / e.raw_path; }
  fs::path eye_file(const ManifestEntry& e) const { return root / e.eye_path; }

  /// Labels valid and (participant, session, trial) unique; with
  /// check_files, every referenced file exists.
  void validate(bool check_files) const;
  void save() const;
  /// Accepts the corpus directory or the manifest file itself.
  static Manifest load(const fs::path& path, bool check_files = true);
};

}  // namespace neurofuse::io
