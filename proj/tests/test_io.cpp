#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "rodrecon/io.hpp"

using namespace rodrecon;
using namespace rodrecon::io;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

Archive sample_archive() {
  Archive ar;
  ar.kind = "sample";
  ar.set_meta("note", "hello");
  ar.set_meta_double("value_m", 0.25);
  ar.set_meta_u64("count", 1234567890123456789ull);
  Eigen::MatrixXd a(3, 2);
  a << 1, 2, 3, 4, 5, 6.5;
  ar.add_array("a", a);
  ar.add_array("b", Eigen::MatrixXd::Identity(4, 4));
  return ar;
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::string& path, const std::vector<char>& bytes, size_t count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(count));
}

reduction::BasisSet make_basis() {
  reduction::StrainDataset data;
  data.grid = rod::uniform_grid(0.2, 25);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> unit;
  for (int k = 0; k < 20; ++k) {
    rod::StrainMatrix s(6, 25);
    for (int i = 0; i < 6; ++i) {
      for (int c = 0; c < 25; ++c) s(i, c) = (i == 5 ? 1.0 : 0.0) + 0.1 * unit(rng);
    }
    data.samples.push_back(s);
  }
  return reduction::fit_pca(data, 3);
}

}  // namespace

TEST_CASE("archive round trip") {
  TempFile tmp("io_archive.rodrecon");
  const Archive ar = sample_archive();
  write_archive(ar, tmp.path);
  const Archive back = read_archive(tmp.path, "sample");

  CHECK(back.kind == "sample");
  CHECK(back.get_meta("note") == "hello");
  CHECK(back.get_meta_double("value_m") == 0.25);
  CHECK(back.get_meta_u64("count") == 1234567890123456789ull);
  REQUIRE(back.arrays.size() == 2);
  CHECK(back.arrays[0].first == "a");
  CHECK((back.array("a") - ar.array("a")).norm() == 0.0);
  CHECK((back.array("b") - ar.array("b")).norm() == 0.0);
  CHECK_THROWS_AS(back.array("missing"), FormatVersionMismatch);
}

TEST_CASE("archive kind and integrity checks") {
  TempFile tmp("io_checks.rodrecon");
  write_archive(sample_archive(), tmp.path);
  const std::vector<char> bytes = read_bytes(tmp.path);

  SUBCASE("wrong expected kind") {
    CHECK_THROWS_AS(read_archive(tmp.path, "other"), FormatVersionMismatch);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_archive("does_not_exist.rodrecon", "sample"), IoError);
  }
  SUBCASE("bad magic") {
    std::vector<char> mutated = bytes;
    mutated[0] = 'X';
    write_bytes(tmp.path, mutated, mutated.size());
    CHECK_THROWS_AS(read_archive(tmp.path, "sample"), FormatVersionMismatch);
  }
  SUBCASE("truncated header") {
    write_bytes(tmp.path, bytes, 10);
    CHECK_THROWS_AS(read_archive(tmp.path, "sample"), FormatVersionMismatch);
  }
  SUBCASE("truncated payload") {
    write_bytes(tmp.path, bytes, bytes.size() - 12);
    CHECK_THROWS_AS(read_archive(tmp.path, "sample"), FormatVersionMismatch);
  }
  SUBCASE("corrupted payload byte") {
    std::vector<char> mutated = bytes;
    mutated[mutated.size() - 5] ^= 0x40;
    write_bytes(tmp.path, mutated, mutated.size());
    CHECK_THROWS_AS(read_archive(tmp.path, "sample"), ChecksumMismatch);
  }
}

TEST_CASE("file_checksum reflects content") {
  TempFile a("io_sum_a.bin"), b("io_sum_b.bin");
  write_bytes(a.path, {'a', 'b', 'c'}, 3);
  write_bytes(b.path, {'a', 'b', 'd'}, 3);
  CHECK(file_checksum(a.path) != file_checksum(b.path));
  CHECK(file_checksum(a.path) == file_checksum(a.path));
  CHECK_THROWS_AS(file_checksum("does_not_exist.bin"), IoError);
}

TEST_CASE("dataset round trip") {
  TempFile tmp("io_dataset.rodrecon");
  reduction::StrainDataset data;
  data.grid = rod::uniform_grid(0.2, 12);
  for (int k = 0; k < 5; ++k) {
    data.samples.push_back(rod::StrainMatrix::Random(6, 12));
  }
  save_dataset(data, tmp.path, {{"origin", "test"}});
  const reduction::StrainDataset back = load_dataset(tmp.path);
  CHECK((back.grid - data.grid).norm() == 0.0);
  REQUIRE(back.samples.size() == data.samples.size());
  for (size_t k = 0; k < data.samples.size(); ++k) {
    CHECK((back.samples[k] - data.samples[k]).norm() == 0.0);
  }
}

TEST_CASE("basis round trip preserves the checksum") {
  TempFile tmp("io_basis.rodrecon");
  const reduction::BasisSet basis = make_basis();
  save_basis(basis, tmp.path);
  const reduction::BasisSet back = load_basis(tmp.path);
  CHECK(back.checksum() == basis.checksum());
  CHECK(back.n_basis == basis.n_basis);
  CHECK(back.inextensible == basis.inextensible);
  for (int i = 0; i < 6; ++i) {
    CHECK((back.strains[i].mean_fn - basis.strains[i].mean_fn).norm() == 0.0);
    CHECK((back.strains[i].std_fn - basis.strains[i].std_fn).norm() == 0.0);
    CHECK((back.strains[i].basis_fns - basis.strains[i].basis_fns).norm() == 0.0);
    CHECK((back.strains[i].eigvecs_std - basis.strains[i].eigvecs_std).norm() == 0.0);
    CHECK((back.strains[i].eigenvalues - basis.strains[i].eigenvalues).norm() == 0.0);
    CHECK((back.strains[i].coeff_mean - basis.strains[i].coeff_mean).norm() == 0.0);
    CHECK((back.strains[i].coeff_std - basis.strains[i].coeff_std).norm() == 0.0);
    CHECK(back.strains[i].retained_variance_fraction ==
          basis.strains[i].retained_variance_fraction);
    CHECK(back.strains[i].frozen == basis.strains[i].frozen);
  }
}

TEST_CASE("training set round trip carries the basis linkage") {
  TempFile tmp("io_trainset.rodrecon");
  datagen::TrainingSet set;
  set.marker_s = Eigen::VectorXd::LinSpaced(4, 0.05, 0.2);
  set.features = Eigen::MatrixXd::Random(36, 7);
  set.truth_coeffs = Eigen::MatrixXd::Random(9, 7);
  save_training_set(set, 0xdeadbeefull, tmp.path);
  std::uint64_t checksum = 0;
  const datagen::TrainingSet back = load_training_set(tmp.path, &checksum);
  CHECK(checksum == 0xdeadbeefull);
  CHECK((back.marker_s - set.marker_s).norm() == 0.0);
  CHECK((back.features - set.features).norm() == 0.0);
  CHECK((back.truth_coeffs - set.truth_coeffs).norm() == 0.0);
}

TEST_CASE("frame log round trip and validation") {
  TempFile tmp("io_framelog.rodrecon");
  FrameLog log;
  log.marker_s = Eigen::VectorXd::LinSpaced(3, 0.1, 0.2);
  log.timestamps = Eigen::VectorXd::LinSpaced(5, 0.0, 0.04);
  log.features = Eigen::MatrixXd::Random(27, 5);
  save_frame_log(log, tmp.path);
  const FrameLog back = load_frame_log(tmp.path);
  CHECK((back.marker_s - log.marker_s).norm() == 0.0);
  CHECK((back.timestamps - log.timestamps).norm() == 0.0);
  CHECK((back.features - log.features).norm() == 0.0);
  CHECK_NOTHROW(back.validate());

  FrameLog bad = log;
  bad.timestamps(3) = bad.timestamps(2);  // not strictly increasing
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = log;
  bad.features.conservativeResize(26, 5);  // not a multiple of 9
  CHECK_THROWS_AS(bad.validate(), LengthMismatch);
}
