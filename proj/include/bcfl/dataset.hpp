#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcfl/record.hpp"

namespace bcfl {

/// Column names of the 18 chiller sensor channels, in record order.
extern const std::array<std::string_view, kFeatureCount> kSensorNames;

struct ClientDataset {
  std::string client_id;
  std::vector<Record> train;
  std::vector<Record> test;

  bool operator==(const ClientDataset&) const = default;
};

/// Parameters of one client's synthetic two-cluster dataset.
struct ClientDataGenSpec {
  std::string client_id;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double positive_fraction = 0.5;
  /// Target Euclidean distance between the class means.
  double centroid_separation = 1.0;
  /// Per-class covariance is covariance_scale * I.
  double covariance_scale = 1.0;
  /// Drives the per-record noise.
  std::uint64_t seed = 0;
  /// Picks the unit direction separating the classes. Clients sharing a
  /// direction seed share a failure signature.
  std::uint64_t direction_seed = 0;
};

/// Two Gaussian clusters placed symmetrically about the origin along a
/// seeded unit direction. Each class of each split is recentered so its
/// sample mean equals the target mean, which makes the measured centroid
/// distance equal `centroid_separation` up to rounding.
ClientDataset generate(const ClientDataGenSpec& spec);

/// Four-client preset: clients 1, 2, 4 with separation 1.0, client 3 with 4.0;
/// 1000 train and 1000 test records each; all seeds derived from `seed`.
std::vector<ClientDataGenSpec> paper_scenario(std::uint64_t seed = 2021);

/// CSV: header of sensor names plus "label", then one canonical row per record.
void save_csv(std::span<const Record> records, const std::filesystem::path& path);
std::vector<Record> load_csv(const std::filesystem::path& path);

/// Text forms used by the file functions; exposed for tests and bindings.
std::string records_to_csv(std::span<const Record> records);
std::vector<Record> records_from_csv(std::string_view text);

/// A dataset is stored as <dir>/<client_id>_train.csv and _test.csv.
void save_dataset(const ClientDataset& dataset, const std::filesystem::path& dir);
ClientDataset load_dataset(const std::string& client_id, const std::filesystem::path& train_csv,
                           const std::filesystem::path& test_csv);

/// Raw upload size of a record set: 18 little-endian f64 plus one label byte
/// per record. Used for the centralized communication accounting.
inline constexpr std::size_t kRecordWireBytes = kFeatureCount * 8 + 1;
std::vector<std::uint8_t> serialize_records(std::span<const Record> records);

}  // namespace bcfl
