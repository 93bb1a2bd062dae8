#ifndef RODRECON_IO_HPP
#define RODRECON_IO_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rodrecon/datagen.hpp"
#include "rodrecon/reduction.hpp"

namespace rodrecon::io {

/// One on-disk artifact: text header (kind, version, key-value metadata,
/// array directory, payload checksum) followed by column-major little-endian
/// float64 array payloads.
struct Archive {
  std::string kind;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> arrays;

  void set_meta(const std::string& key, const std::string& value) { meta[key] = value; }
  void set_meta_double(const std::string& key, double value);
  void set_meta_u64(const std::string& key, std::uint64_t value);

  const std::string& get_meta(const std::string& key) const;
  double get_meta_double(const std::string& key) const;
  std::uint64_t get_meta_u64(const std::string& key) const;
  bool has_meta(const std::string& key) const { return meta.count(key) != 0; }

  void add_array(const std::string& name, const Eigen::MatrixXd& m) {
    arrays.emplace_back(name, m);
  }
  const Eigen::MatrixXd& array(const std::string& name) const;
};

void write_archive(const Archive& ar, const std::string& path);
Archive read_archive(const std::string& path, const std::string& expected_kind);

/// FNV-1a over a file's bytes; used to stamp stage outputs with the hash of
/// their inputs.
std::uint64_t file_checksum(const std::string& path);

// Timestamped marker-feature frames replayed in place of a live capture feed.
struct FrameLog {
  Eigen::VectorXd marker_s;
  Eigen::VectorXd timestamps;  // seconds, strictly increasing
  Eigen::MatrixXd features;    // (9*N_m) x n_frames

  void validate() const;
};

void save_dataset(const reduction::StrainDataset& data, const std::string& path,
                  const std::map<std::string, std::string>& extra_meta = {});
reduction::StrainDataset load_dataset(const std::string& path);

void save_basis(const reduction::BasisSet& basis, const std::string& path,
                const std::map<std::string, std::string>& extra_meta = {});
reduction::BasisSet load_basis(const std::string& path);

void save_training_set(const datagen::TrainingSet& set, std::uint64_t basis_checksum,
                       const std::string& path,
                       const std::map<std::string, std::string>& extra_meta = {});
datagen::TrainingSet load_training_set(const std::string& path,
                                       std::uint64_t* basis_checksum = nullptr);

void save_frame_log(const FrameLog& log, const std::string& path,
                    const std::map<std::string, std::string>& extra_meta = {});
FrameLog load_frame_log(const std::string& path);

}  // namespace rodrecon::io

#endif
