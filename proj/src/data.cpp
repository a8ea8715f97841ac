#include "dfl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dfl/error.hpp"
#include "dfl/rng.hpp"

namespace dfl {

void LabeledDataset::check() const {
  if (labels.size() != n) throw DataError(name + ": label count does not match n");
  if (features.size() != n * dim) throw DataError(name + ": feature matrix has wrong size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError(name + ": label " + std::to_string(y) + " out of range");
    }
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError(name + ": non-finite feature value");
  }
}

LabeledDataset LabeledDataset::slice(std::size_t first, std::size_t count) const {
  if (first + count > n) throw DataError(name + ": slice out of range");
  LabeledDataset out;
  out.name = name;
  out.n = count;
  out.dim = dim;
  out.classes = classes;
  out.features.assign(features.begin() + static_cast<std::ptrdiff_t>(first * dim),
                      features.begin() + static_cast<std::ptrdiff_t>((first + count) * dim));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                    labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::string to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::kDirichlet: return "dirichlet";
    case PartitionKind::kPathological: return "pathological";
    case PartitionKind::kIid: return "iid";
  }
  return "unknown";
}

PartitionKind partition_kind_from_string(const std::string& name) {
  if (name == "dirichlet") return PartitionKind::kDirichlet;
  if (name == "pathological") return PartitionKind::kPathological;
  if (name == "iid") return PartitionKind::kIid;
  throw ConfigError("unknown partition kind '" + name + "'");
}

std::vector<std::vector<std::size_t>> Partition::label_histograms(const LabeledDataset& ds) const {
  std::vector<std::vector<std::size_t>> h(assignments.size(), std::vector<std::size_t>(ds.classes, 0));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    for (std::size_t idx : assignments[i]) ++h[i][static_cast<std::size_t>(ds.labels[idx])];
  }
  return h;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.n; ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return by_class;
}

void require_clients(const LabeledDataset& ds, std::size_t m) {
  if (m == 0) throw ConfigError("partition: need at least one client");
  if (m > ds.n) {
    throw ConfigError("partition: " + std::to_string(m) + " clients but only " +
                      std::to_string(ds.n) + " samples");
  }
}

void sort_lists(Partition& p) {
  for (auto& list : p.assignments) std::sort(list.begin(), list.end());
}

// Largest-remainder apportionment of `total` units by proportions p. Leftover
// units go to the largest fractional parts; ties go to the client that
// currently holds the fewest samples.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& p,
                                   const std::vector<std::size_t>& current_sizes) {
  const std::size_t m = p.size();
  std::vector<std::size_t> counts(m);
  std::vector<double> frac(m);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double raw = p[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(raw));
    frac[i] = raw - std::floor(raw);
    assigned += counts[i];
  }
  // Rounding in p can push the floor sum past total; trim from the largest.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return current_sizes[a] < current_sizes[b];
  });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++counts[order[r % m]];
  return counts;
}

constexpr int kMaxDirichletRedraws = 100;

}  // namespace

Partition partition_dirichlet(const LabeledDataset& ds, std::size_t m, double alpha,
                              std::uint64_t seed) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("partition: alpha must be > 0");
  require_clients(ds, m);
  const auto by_class = indices_by_class(ds);

  Partition out;
  out.kind = PartitionKind::kDirichlet;
  out.parameter = alpha;
  out.seed = seed;
  for (int attempt = 0; attempt <= kMaxDirichletRedraws; ++attempt) {
    RngStream rng(seed, 0, Purpose::kPartition, static_cast<std::uint64_t>(attempt));
    std::vector<std::vector<std::size_t>> lists(m);
    std::vector<std::size_t> sizes(m, 0);
    for (const auto& members : by_class) {
      if (members.empty()) continue;
      auto shuffled = members;
      rng.shuffle(shuffled);
      const auto p = rng.dirichlet(alpha, m);
      const auto counts = apportion(shuffled.size(), p, sizes);
      std::size_t pos = 0;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < counts[i]; ++c) lists[i].push_back(shuffled[pos++]);
        sizes[i] += counts[i];
      }
    }
    out.assignments = std::move(lists);
    const bool all_nonempty = std::all_of(out.assignments.begin(), out.assignments.end(),
                                          [](const auto& l) { return !l.empty(); });
    if (all_nonempty) {
      sort_lists(out);
      return out;
    }
  }
  // Redraws exhausted: move single samples from the largest clients.
  for (auto& list : out.assignments) {
    if (!list.empty()) continue;
    auto donor = std::max_element(out.assignments.begin(), out.assignments.end(),
                                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
    list.push_back(donor->back());
    donor->pop_back();
  }
  sort_lists(out);
  return out;
}

Partition partition_pathological(const LabeledDataset& ds, std::size_t m,
                                 std::size_t classes_per_client, std::uint64_t seed) {
  require_clients(ds, m);
  const std::size_t c = ds.classes;
  if (classes_per_client == 0 || classes_per_client > c) {
    throw ConfigError("partition: classes_per_client must be in [1, C]");
  }
  const std::size_t shards = m * classes_per_client;
  if (shards % c != 0) {
    throw ConfigError("partition: m * classes_per_client (" + std::to_string(shards) +
                      ") is not a multiple of the class count " + std::to_string(c));
  }
  const std::size_t per_class = shards / c;
  const auto by_class = indices_by_class(ds);
  for (std::size_t k = 0; k < c; ++k) {
    if (by_class[k].size() < per_class) {
      throw ConfigError("partition: class " + std::to_string(k) + " has " +
                        std::to_string(by_class[k].size()) + " samples for " +
                        std::to_string(per_class) + " shards");
    }
  }

  RngStream rng(seed, 0, Purpose::kPartition, 0);
  std::vector<std::size_t> class_order(c);
  std::iota(class_order.begin(), class_order.end(), 0);
  rng.shuffle(class_order);

  // Shard s covers class class_order[s / per_class]; client i takes shards
  // i, i + m, i + 2m, ... which land in distinct classes because per_class <= m.
  Partition out;
  out.kind = PartitionKind::kPathological;
  out.parameter = static_cast<double>(classes_per_client);
  out.seed = seed;
  out.assignments.resize(m);
  std::vector<std::vector<std::vector<std::size_t>>> pieces(c);
  for (std::size_t k = 0; k < c; ++k) {
    auto members = by_class[k];
    rng.shuffle(members);
    pieces[k].resize(per_class);
    const std::size_t base = members.size() / per_class;
    const std::size_t extra = members.size() % per_class;
    std::size_t pos = 0;
    for (std::size_t q = 0; q < per_class; ++q) {
      const std::size_t len = base + (q < extra ? 1 : 0);
      pieces[k][q].assign(members.begin() + static_cast<std::ptrdiff_t>(pos),
                          members.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < classes_per_client; ++j) {
      const std::size_t shard = i + j * m;
      const std::size_t cls = class_order[shard / per_class];
      const auto& piece = pieces[cls][shard % per_class];
      out.assignments[i].insert(out.assignments[i].end(), piece.begin(), piece.end());
    }
  }
  sort_lists(out);
  return out;
}

Partition partition_iid(const LabeledDataset& ds, std::size_t m, std::uint64_t seed) {
  require_clients(ds, m);
  RngStream rng(seed, 0, Purpose::kPartition, 0);
  std::vector<std::size_t> idx(ds.n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  Partition out;
  out.kind = PartitionKind::kIid;
  out.seed = seed;
  out.assignments.resize(m);
  const std::size_t base = ds.n / m;
  const std::size_t extra = ds.n % m;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out.assignments[i].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                              idx.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  sort_lists(out);
  return out;
}

LabeledDataset make_synthetic_blobs(std::size_t classes, std::size_t dim, std::size_t n,
                                    double separation, std::uint64_t seed) {
  if (classes == 0 || dim == 0 || n == 0) throw ConfigError("blobs: sizes must be positive");
  if (!(separation >= 0.0)) throw ConfigError("blobs: separation must be >= 0");
  std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
  if (dim >= classes) {
    const double scale = separation / std::numbers::sqrt2;
    for (std::size_t c = 0; c < classes; ++c) means[c][c] = scale;
  } else if (dim >= 2) {
    const double radius = separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
    for (std::size_t c = 0; c < classes; ++c) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
      means[c][0] = radius * std::cos(angle);
      means[c][1] = radius * std::sin(angle);
    }
  } else {
    for (std::size_t c = 0; c < classes; ++c) means[c][0] = separation * static_cast<double>(c);
  }

  LabeledDataset ds;
  ds.name = "blobs";
  ds.n = n;
  ds.dim = dim;
  ds.classes = classes;
  ds.features.resize(n * dim);
  ds.labels.resize(n);
  RngStream rng(seed, 0, Purpose::kData, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j) ds.features[i * dim + j] = means[c][j] + rng.normal();
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

LabeledDataset read_dataset_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw DataError(name + ": header must be f0,...,f{d-1},label");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw DataError(name + ": header column " + std::to_string(j) + " must be f" + std::to_string(j));
    }
  }
  LabeledDataset ds;
  ds.name = name;
  ds.dim = dim;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != dim + 1) {
      throw DataError(name + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, expected " + std::to_string(dim + 1));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      const auto& c = cells[j];
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw DataError(name + ": bad float '" + c + "' on line " + std::to_string(line_no));
      }
      ds.features.push_back(v);
    }
    int y = -1;
    const auto& c = cells[dim];
    auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), y);
    if (ec != std::errc() || ptr != c.data() + c.size() || y < 0) {
      throw DataError(name + ": bad label '" + c + "' on line " + std::to_string(line_no));
    }
    ds.labels.push_back(y);
    max_label = std::max(max_label, y);
  }
  ds.n = ds.labels.size();
  ds.classes = static_cast<std::size_t>(max_label + 1);
  ds.check();
  return ds;
}

LabeledDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset CSV '" + path + "'");
  return read_dataset_csv(in, path);
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& ds) {
  for (std::size_t j = 0; j < ds.dim; ++j) out << 'f' << j << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.dim; ++j) out << ds.features[i * ds.dim + j] << ',';
    out << ds.labels[i] << '\n';
  }
}

}  // namespace dfl
