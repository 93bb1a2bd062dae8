#include "rodrecon/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rodrecon/errors.hpp"
#include "rodrecon/hash.hpp"

namespace rodrecon::io {

namespace {

constexpr const char* kMagic = "#RODRECON";
constexpr int kFormatVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Archive::set_meta_double(const std::string& key, double value) {
  meta[key] = format_double(value);
}

void Archive::set_meta_u64(const std::string& key, std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, value);
  meta[key] = buf;
}

const std::string& Archive::get_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatVersionMismatch("missing metadata key: " + key);
  return it->second;
}

double Archive::get_meta_double(const std::string& key) const {
  return std::stod(get_meta(key));
}

std::uint64_t Archive::get_meta_u64(const std::string& key) const {
  return std::stoull(get_meta(key), nullptr, 16);
}

const Eigen::MatrixXd& Archive::array(const std::string& name) const {
  for (const auto& [n, m] : arrays) {
    if (n == name) return m;
  }
  throw FormatVersionMismatch("missing array: " + name);
}

void write_archive(const Archive& ar, const std::string& path) {
  Fnv1a payload_hash;
  for (const auto& [name, m] : ar.arrays) {
    payload_hash.update_doubles(m.data(), static_cast<std::size_t>(m.size()));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kMagic << ' ' << ar.kind << " v" << kFormatVersion << '\n';
  for (const auto& [k, v] : ar.meta) {
    out << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& [name, m] : ar.arrays) {
    out << "array " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  }
  char csum[24];
  std::snprintf(csum, sizeof(csum), "%016" PRIx64, payload_hash.digest());
  out << "payload_checksum " << csum << '\n';
  out << "BINARY\n";
  for (const auto& [name, m] : ar.arrays) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  }
  if (!out) throw IoError("write failed: " + path);
}

Archive read_archive(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw FormatVersionMismatch("empty file: " + path);
  {
    std::istringstream head(line);
    std::string magic, kind, version;
    head >> magic >> kind >> version;
    if (magic != kMagic) throw FormatVersionMismatch("not a rodrecon file: " + path);
    if (kind != expected_kind) {
      throw FormatVersionMismatch("expected kind '" + expected_kind + "', found '" + kind + "'");
    }
    if (version != "v" + std::to_string(kFormatVersion)) {
      throw FormatVersionMismatch("unsupported format version '" + version + "'");
    }
  }

  Archive ar;
  ar.kind = expected_kind;
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> directory;
  std::string stored_checksum;
  bool binary_marker = false;
  while (std::getline(in, line)) {
    if (line == "BINARY") {
      binary_marker = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ar.meta[key] = value;
    } else if (tag == "array") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      ls >> name >> rows >> cols;
      if (!ls || rows < 0 || cols < 0) throw FormatVersionMismatch("bad array directory line");
      directory.emplace_back(name, std::make_pair(rows, cols));
    } else if (tag == "payload_checksum") {
      ls >> stored_checksum;
    } else {
      throw FormatVersionMismatch("unrecognized header line: " + line);
    }
  }
  if (!binary_marker) throw FormatVersionMismatch("truncated header (no BINARY marker): " + path);

  Fnv1a payload_hash;
  for (const auto& [name, shape] : directory) {
    Eigen::MatrixXd m(shape.first, shape.second);
    const std::streamsize bytes =
        static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size()));
    in.read(reinterpret_cast<char*>(m.data()), bytes);
    if (in.gcount() != bytes) throw FormatVersionMismatch("truncated payload: " + path);
    payload_hash.update_doubles(m.data(), static_cast<std::size_t>(m.size()));
    ar.arrays.emplace_back(name, std::move(m));
  }
  char csum[24];
  std::snprintf(csum, sizeof(csum), "%016" PRIx64, payload_hash.digest());
  if (!stored_checksum.empty() && stored_checksum != csum) {
    throw ChecksumMismatch("payload checksum mismatch in " + path);
  }
  return ar;
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  Fnv1a h;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

void FrameLog::validate() const {
  if (features.rows() != 9 * marker_s.size()) {
    throw LengthMismatch("frame log feature rows must be 9 * N_m");
  }
  if (features.cols() != timestamps.size()) {
    throw LengthMismatch("frame log timestamp count must match frame count");
  }
  for (Eigen::Index i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps(i) > timestamps(i - 1))) {
      throw ConfigError("frame log timestamps must be strictly increasing");
    }
  }
}

void save_dataset(const reduction::StrainDataset& data, const std::string& path,
                  const std::map<std::string, std::string>& extra_meta) {
  Archive ar;
  ar.kind = "dataset";
  ar.meta = extra_meta;
  ar.set_meta("n_samples", std::to_string(data.samples.size()));
  ar.add_array("grid", data.grid);
  Eigen::MatrixXd stacked(6 * static_cast<Eigen::Index>(data.samples.size()), data.grid.size());
  for (std::size_t t = 0; t < data.samples.size(); ++t) {
    stacked.middleRows(6 * static_cast<Eigen::Index>(t), 6) = data.samples[t];
  }
  ar.add_array("samples", stacked);
  write_archive(ar, path);
}

reduction::StrainDataset load_dataset(const std::string& path) {
  Archive ar = read_archive(path, "dataset");
  reduction::StrainDataset data;
  data.grid = ar.array("grid");
  const Eigen::MatrixXd& stacked = ar.array("samples");
  const Eigen::Index count = stacked.rows() / 6;
  data.samples.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index t = 0; t < count; ++t) {
    data.samples.push_back(stacked.middleRows(6 * t, 6));
  }
  return data;
}

void save_basis(const reduction::BasisSet& basis, const std::string& path,
                const std::map<std::string, std::string>& extra_meta) {
  Archive ar;
  ar.kind = "basis";
  ar.meta = extra_meta;
  ar.set_meta("n_basis", std::to_string(basis.n_basis));
  ar.set_meta("inextensible", basis.inextensible ? "1" : "0");
  ar.set_meta_u64("basis_checksum", basis.checksum());
  ar.add_array("grid", basis.grid);
  for (int i = 0; i < 6; ++i) {
    const auto& sb = basis.strains[static_cast<std::size_t>(i)];
    const std::string p = "strain" + std::to_string(i + 1) + "_";
    ar.add_array(p + "mean_fn", sb.mean_fn);
    ar.add_array(p + "std_fn", sb.std_fn);
    ar.add_array(p + "basis_fns", sb.basis_fns);
    ar.add_array(p + "eigvecs_std", sb.eigvecs_std);
    ar.add_array(p + "eigenvalues", sb.eigenvalues);
    ar.add_array(p + "coeff_mean", sb.coeff_mean);
    ar.add_array(p + "coeff_std", sb.coeff_std);
    Eigen::MatrixXd flags(2, 1);
    flags << sb.retained_variance_fraction, (sb.frozen ? 1.0 : 0.0);
    ar.add_array(p + "stats", flags);
  }
  write_archive(ar, path);
}

reduction::BasisSet load_basis(const std::string& path) {
  Archive ar = read_archive(path, "basis");
  reduction::BasisSet basis;
  basis.grid = ar.array("grid");
  basis.n_basis = std::stoi(ar.get_meta("n_basis"));
  basis.inextensible = ar.get_meta("inextensible") == "1";
  for (int i = 0; i < 6; ++i) {
    auto& sb = basis.strains[static_cast<std::size_t>(i)];
    const std::string p = "strain" + std::to_string(i + 1) + "_";
    sb.mean_fn = ar.array(p + "mean_fn");
    sb.std_fn = ar.array(p + "std_fn");
    sb.basis_fns = ar.array(p + "basis_fns");
    sb.eigvecs_std = ar.array(p + "eigvecs_std");
    sb.eigenvalues = ar.array(p + "eigenvalues");
    sb.coeff_mean = ar.array(p + "coeff_mean");
    sb.coeff_std = ar.array(p + "coeff_std");
    const Eigen::MatrixXd& stats = ar.array(p + "stats");
    sb.retained_variance_fraction = stats(0, 0);
    sb.frozen = stats(1, 0) != 0.0;
  }
  if (ar.get_meta_u64("basis_checksum") != basis.checksum()) {
    throw ChecksumMismatch("basis checksum does not match stored arrays: " + path);
  }
  return basis;
}

void save_training_set(const datagen::TrainingSet& set, std::uint64_t basis_checksum,
                       const std::string& path,
                       const std::map<std::string, std::string>& extra_meta) {
  Archive ar;
  ar.kind = "trainingset";
  ar.meta = extra_meta;
  ar.set_meta_u64("basis_checksum", basis_checksum);
  ar.add_array("marker_s", set.marker_s);
  ar.add_array("features", set.features);
  ar.add_array("truth_coeffs", set.truth_coeffs);
  write_archive(ar, path);
}

datagen::TrainingSet load_training_set(const std::string& path, std::uint64_t* basis_checksum) {
  Archive ar = read_archive(path, "trainingset");
  datagen::TrainingSet set;
  set.marker_s = ar.array("marker_s");
  set.features = ar.array("features");
  set.truth_coeffs = ar.array("truth_coeffs");
  if (basis_checksum) *basis_checksum = ar.get_meta_u64("basis_checksum");
  return set;
}

void save_frame_log(const FrameLog& log, const std::string& path,
                    const std::map<std::string, std::string>& extra_meta) {
  log.validate();
  Archive ar;
  ar.kind = "framelog";
  ar.meta = extra_meta;
  ar.add_array("marker_s", log.marker_s);
  ar.add_array("timestamps", log.timestamps);
  ar.add_array("features", log.features);
  write_archive(ar, path);
}

FrameLog load_frame_log(const std::string& path) {
  Archive ar = read_archive(path, "framelog");
  FrameLog log;
  log.marker_s = ar.array("marker_s");
  log.timestamps = ar.array("timestamps");
  log.features = ar.array("features");
  log.validate();
  return log;
}

}  // namespace rodrecon::io
