#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dfl {

class RngStream;

/// n labelled samples with d_in features each, stored row-major.
struct LabeledDataset {
  std::string name;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  /// Throws DataError if the invariants (sizes, label range, finiteness) fail.
  void check() const;
  /// Samples [first, first + count) as a new dataset.
  LabeledDataset slice(std::size_t first, std::size_t count) const;
  std::vector<std::size_t> class_counts() const;
};

enum class PartitionKind { kDirichlet, kPathological, kIid };

std::string to_string(PartitionKind kind);
PartitionKind partition_kind_from_string(const std::string& name);

/// Per-client lists of sample indices into one dataset.
struct Partition {
  PartitionKind kind = PartitionKind::kIid;
  std::vector<std::vector<std::size_t>> assignments;
  double parameter = 0.0;  // alpha or classes_per_client
  std::uint64_t seed = 0;

  std::size_t clients() const noexcept { return assignments.size(); }
  /// Per-client label histogram, clients x classes.
  std::vector<std::vector<std::size_t>> label_histograms(const LabeledDataset& ds) const;
};

Partition partition_dirichlet(const LabeledDataset& ds, std::size_t m, double alpha,
                              std::uint64_t seed);
Partition partition_pathological(const LabeledDataset& ds, std::size_t m,
                                 std::size_t classes_per_client, std::uint64_t seed);
Partition partition_iid(const LabeledDataset& ds, std::size_t m, std::uint64_t seed);

/// Gaussian blobs with unit covariance. Class means sit on a scaled simplex
/// (d_in >= C) or a circle (d_in < C) so that neighbouring means are
/// `separation` apart. Labels cycle 0..C-1 so class counts differ by at most 1.
LabeledDataset make_synthetic_blobs(std::size_t classes, std::size_t dim, std::size_t n,
                                    double separation, std::uint64_t seed);

/// CSV with header `f0,...,f{d-1},label`. Throws DataError on malformed input.
LabeledDataset read_dataset_csv(std::istream& in, const std::string& name = "csv");
LabeledDataset load_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const LabeledDataset& ds);

}  // namespace dfl
