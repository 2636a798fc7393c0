#include <doctest.h>

#include <cstring>
#include <fstream>

#include "neurofuse/checkpoint.hpp"
#include "neurofuse/io.hpp"
#include "temp_dir.hpp"

using namespace neurofuse;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
std::string raw_bytes(const std::vector<T>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

nn::Architecture small_arch() {
  nn::Architecture a;
  a.input_len = 32;
  a.conv1_filters = 2;
  a.conv1_kernel = 3;
  a.conv2_filters = 2;
  a.conv2_kernel = 3;
  a.dense_units = 4;
  return a;
}

io::Checkpoint sample_checkpoint() {
  io::Checkpoint c;
  c.model = nn::init_params<double>(small_arch(), 3);
  c.model.conv1.bias << 0.25, -0.5;
  c.scaler.mean = Eigen::VectorXd::LinSpaced(32, -1.0, 1.0);
  c.scaler.std = Eigen::VectorXd::Constant(32, 2.0);
  c.scaler.std[5] = nn::kStdFloor;
  c.scaler.floored_columns = {5};
  c.metadata = {{"seed", 3}, {"note", "unit"}};
  return c;
}

}  // namespace

TEST_CASE("npy preamble matches the reference layout") {
  // byte-for-byte what numpy 2.x writes for these arrays
  const std::string f8 = io::npy_preamble("<f8", {2, 3});
  CHECK(f8.size() == 128);
  CHECK(f8.substr(0, 10) == std::string("\x93NUMPY\x01\x00\x76\x00", 10));
  CHECK(f8.substr(10, 59) == "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }");
  CHECK(f8.back() == '\n');
  CHECK(f8.find_first_not_of(' ', 69) == 127);

  const std::string i8 = io::npy_preamble("<i8", {4});
  CHECK(i8.size() == 128);
  CHECK(i8.substr(10, 57) == "{'descr': '<i8', 'fortran_order': False, 'shape': (4,), }");

  for (std::size_t rows : {1u, 10u, 1437u, 258660u}) CHECK(io::npy_preamble("<f8", {rows, 739}).size() % 64 == 0);
}

TEST_CASE("npy round trips") {
  TempDir dir("npy");
  Rng rng(1);
  RowMatrixXd m(7, 3);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  io::write_npy(dir / "m.npy", m);
  CHECK(io::read_npy_matrix(dir / "m.npy") == m);
  const auto h = io::read_npy_header(dir / "m.npy");
  CHECK(h.descr == "<f8");
  CHECK(h.shape == std::vector<std::size_t>{7, 3});
  CHECK(std::filesystem::file_size(dir / "m.npy") == 128 + 7 * 3 * 8);

  const std::vector<std::int64_t> v = {-1, 0, 5, 1LL << 40};
  io::write_npy(dir / "v.npy", v);
  CHECK(io::read_npy_int64(dir / "v.npy") == v);
  const auto col = io::read_npy_matrix(dir / "v.npy");
  CHECK(col.rows() == 4);
  CHECK(col.cols() == 1);
  CHECK(col(3, 0) == double(1LL << 40));

  io::NpyWriter w(dir / "s.npy", 7, 3);
  w.append(m.topRows(4));
  w.append(m.bottomRows(3));
  w.close();
  CHECK(io::read_text(dir / "s.npy") == io::read_text(dir / "m.npy"));

  io::NpyWriter short_writer(dir / "t.npy", 7, 3);
  short_writer.append(m.topRows(2));
  CHECK_THROWS_AS(short_writer.close(), ValidationError);
}

TEST_CASE("npy reader accepts f4 and i4 and rejects Fortran order") {
  TempDir dir("npy_types");
  write_bytes(dir / "f4.npy", io::npy_preamble("<f4", {2, 2}) + raw_bytes(std::vector<float>{1.5f, -2.f, 0.25f, 8.f}));
  RowMatrixXd expect(2, 2);
  expect << 1.5, -2, 0.25, 8;
  CHECK(io::read_npy_matrix(dir / "f4.npy") == expect);

  write_bytes(dir / "i4.npy", io::npy_preamble("<i4", {3}) + raw_bytes(std::vector<std::int32_t>{7, -3, 0}));
  CHECK(io::read_npy_int64(dir / "i4.npy") == std::vector<std::int64_t>{7, -3, 0});

  std::string fortran = io::npy_preamble("<f8", {2, 2});
  fortran.replace(fortran.find("False"), 5, "True ");
  write_bytes(dir / "fortran.npy", fortran + raw_bytes(std::vector<double>{1, 2, 3, 4}));
  CHECK_THROWS_WITH_AS(io::read_npy_matrix(dir / "fortran.npy"), doctest::Contains("Fortran"), IoError);

  write_bytes(dir / "big.npy", io::npy_preamble(">f8", {1, 1}) + raw_bytes(std::vector<double>{1}));
  CHECK_THROWS(io::read_npy_matrix(dir / "big.npy"));
}

TEST_CASE("npy reader errors") {
  TempDir dir("npy_bad");
  write_bytes(dir / "short.npy", io::npy_preamble("<f8", {4, 4}) + raw_bytes(std::vector<double>{1, 2, 3}));
  CHECK_THROWS_WITH_AS(io::read_npy_matrix(dir / "short.npy"), doctest::Contains("short.npy"), IoError);
  write_bytes(dir / "junk.npy", "not an array at all");
  CHECK_THROWS_AS(io::read_npy_matrix(dir / "junk.npy"), IoError);
  CHECK_THROWS_AS(io::read_npy_matrix(dir / "missing.npy"), IoError);
}

TEST_CASE("json helpers") {
  TempDir dir("json");
  io::write_json(dir / "a.json", {{"x", 1}});
  CHECK(io::read_json(dir / "a.json") == nlohmann::json{{"x", 1}});
  CHECK(io::read_text(dir / "a.json").back() == '\n');
  io::write_text(dir / "b.json", "{ broken");
  CHECK_THROWS_AS(io::read_json(dir / "b.json"), ValidationError);
  CHECK(io::trial_stem(3, 2, 15) == "3_2_15");
}

TEST_CASE("checkpoint round trip is byte-identical") {
  const auto c = sample_checkpoint();
  const std::string bytes = io::checkpoint_bytes(c);
  CHECK(bytes.substr(0, 8) == std::string("NFCKPT\0\0", 8));
  const auto back = io::checkpoint_from_bytes(bytes);
  for (std::size_t t = 0; t < 8; ++t) CHECK(*back.model.tensors()[t] == *c.model.tensors()[t]);
  CHECK(back.model.arch == c.model.arch);
  CHECK(back.scaler.mean == c.scaler.mean);
  CHECK(back.scaler.std == c.scaler.std);
  CHECK(back.scaler.floored_columns == c.scaler.floored_columns);
  CHECK(back.metadata == c.metadata);
  CHECK(io::checkpoint_bytes(back) == bytes);

  TempDir dir("ckpt");
  io::save_checkpoint(dir / "m.ckpt", c);
  CHECK(io::read_text(dir / "m.ckpt") == bytes);
  CHECK(io::checkpoint_bytes(io::load_checkpoint(dir / "m.ckpt")) == bytes);
}

TEST_CASE("checkpoint conv weights are stored out, in, kernel") {
  auto c = sample_checkpoint();
  c.model.conv2.weight.setZero();
  // tap 1 of input channel 0 feeding output filter 1: in-memory column j*in + c
  c.model.conv2.weight(1, 1 * 2 + 0) = 42.0;
  const std::string bytes = io::checkpoint_bytes(c);
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 12, 8);
  std::size_t pos = 20 + header_len;
  pos += 8 * (2 * 1 * 3 + 2);  // conv1.weight, conv1.bias
  std::vector<double> conv2(2 * 2 * 3);
  std::memcpy(conv2.data(), bytes.data() + pos, conv2.size() * 8);
  // logical index ((out * in) + in_c) * k + tap = (1 * 2 + 0) * 3 + 1
  for (std::size_t i = 0; i < conv2.size(); ++i) CHECK(conv2[i] == (i == 7 ? 42.0 : 0.0));
}

TEST_CASE("checkpoint corruption is detected") {
  const std::string bytes = io::checkpoint_bytes(sample_checkpoint());

  std::string version = bytes;
  version[8] = 2;
  CHECK_THROWS_WITH_AS(io::checkpoint_from_bytes(version), doctest::Contains("version"), ValidationError);

  std::string shape = bytes;
  const auto at = shape.find("[4,12]");
  REQUIRE(at != std::string::npos);
  shape.replace(at, 6, "[4,13]");
  CHECK_THROWS_WITH_AS(io::checkpoint_from_bytes(shape), doctest::Contains("shape mismatch"), ValidationError);

  CHECK_THROWS_AS(io::checkpoint_from_bytes(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(io::checkpoint_from_bytes(bytes + "x"), ValidationError);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(io::checkpoint_from_bytes(magic), IoError);

  TempDir dir("ckpt_missing");
  CHECK_THROWS_AS(io::load_checkpoint(dir / "nope.ckpt"), IoError);
}

TEST_CASE("manifest save, load and validation") {
  TempDir dir("manifest");
  io::Manifest m;
  m.root = dir.path();
  for (int t = 1; t <= 2; ++t) {
    io::ManifestEntry e;
    e.participant = 1;
    e.session = 1;
    e.trial = t;
    e.label = EmotionLabel::from_code(t);
    e.raw_path = io::trial_stem(1, 1, t) + "_raw.npy";
    e.eye_path = io::trial_stem(1, 1, t) + "_EYE.npy";
    m.trials.push_back(e);
  }
  m.provenance = {{"source", "test"}};
  CHECK_THROWS_WITH_AS(m.validate(true), doctest::Contains("missing file"), IoError);  // files not written yet
  CHECK_NOTHROW(m.validate(false));
  m.save();
  CHECK_THROWS_AS(io::Manifest::load(dir.path()), IoError);
  const auto loaded = io::Manifest::load(dir / "manifest.json", false);
  REQUIRE(loaded.trials.size() == 2);
  CHECK(loaded.trials[1].label.code() == 2);
  CHECK(loaded.trials[1].eye_path == "1_1_2_EYE.npy");
  CHECK(loaded.provenance == m.provenance);
  CHECK(loaded.raw_file(loaded.trials[0]) == dir.path() / "1_1_1_raw.npy");

  auto dup = m;
  dup.trials[1].trial = 1;
  CHECK_THROWS_WITH_AS(dup.validate(false), doctest::Contains("duplicate"), ValidationError);

  auto j = io::read_json(dir / "manifest.json");
  j["format_version"] = 9;
  io::write_json(dir / "manifest.json", j);
  CHECK_THROWS_AS(io::Manifest::load(dir.path(), false), ValidationError);
}
