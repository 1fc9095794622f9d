#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedsandbox/schema.hpp"

namespace fedsandbox {

// Cleaned, typed, bounded dataset. Immutable after construction: every
// operation below returns new tables, so tables can be shared freely across
// parallel trial workers.
struct Table {
  std::vector<ColumnSpec> columns;
  int target_idx = -1;
  std::size_t rows = 0;
  std::vector<double> data;  // row-major, rows x columns.size()

  std::size_t dropped_missing = 0;
  std::size_t dropped_duplicates = 0;
  std::size_t clamped_values = 0;

  double operator()(std::size_t r, std::size_t c) const {
    return data[r * columns.size() + c];
  }
  int target_class(std::size_t r) const {
    return int((*this)(r, std::size_t(target_idx)));
  }
  std::size_t class_count(int cls) const;
  int column_index(const std::string& name) const;
  Table subset(const std::vector<std::uint32_t>& row_ids) const;
};

struct SplitSpec {
  Table train;
  Table test;
  std::uint64_t seed = 0;
};

struct Shards {
  std::vector<Table> node_tables;
  std::uint64_t seed = 0;
  std::size_t total_rows() const;
};

// Loading options; max_rows > 0 keeps a seeded subsample of the clean rows
// (used for desk-scale runs on brfss).
struct LoadOptions {
  std::size_t max_rows = 0;
  std::uint64_t subsample_seed = 0;
};

Table load_csv(const std::string& path, const DatasetSchema& schema,
               const LoadOptions& opts = {});
Table load_csv_stream(std::istream& in, const DatasetSchema& schema,
                      const std::string& origin, const LoadOptions& opts = {});

SplitSpec balanced_split(const Table& t, std::uint64_t seed);

Shards shard(const Table& t, int k, std::uint64_t seed);

struct FeatureEffect {
  std::string column;
  double effect = 0.0;  // |standardized mean difference| between classes
};

// Numeric columns ranked by absolute standardized mean difference, largest
// first; ties keep column order.
std::vector<FeatureEffect> rank_features(const Table& t);

// Resolves the t-test column: schema's `selected` if set, otherwise the
// top-ranked numeric column.
int selected_column(const Table& t, const DatasetSchema& schema);

// Design matrix for learning: numerics min-max scaled to [0,1] with the
// public codebook bounds, categoricals one-hot with the first category
// dropped.
struct EncodedMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> x;  // row-major rows x dim
  std::vector<int> y;
  std::vector<std::string> feature_names;

  const double* row(std::size_t r) const { return x.data() + r * dim; }
};

EncodedMatrix encode_features(const Table& t);

}  // namespace fedsandbox
