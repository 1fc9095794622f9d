#include "fedsandbox/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "fedsandbox/error.hpp"
#include "fedsandbox/rng.hpp"

namespace fedsandbox {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

int DatasetSchema::column_index(const std::string& col) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == col) return int(i);
  return -1;
}

DatasetSchema DatasetSchema::parse(std::istream& in, const std::string& origin) {
  DatasetSchema schema;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected `key = value`");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "dataset") {
      schema.name = value;
    } else if (key == "target") {
      schema.target = value;
    } else if (key == "selected") {
      schema.selected = value;
    } else if (key == "delta") {
      schema.delta = std::stod(value);
    } else if (key == "column") {
      const auto fields = split_on(value, ':');
      if (fields.size() < 2)
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": column needs `name : kind : ...`");
      ColumnSpec col;
      col.name = fields[0];
      if (fields[1] == "numeric") {
        if (fields.size() < 4)
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": numeric column needs `name : numeric : lo : hi`");
        col.kind = ColumnKind::numeric;
        col.lo = std::stod(fields[2]);
        col.hi = std::stod(fields[3]);
        if (fields.size() > 4) col.v_floor = std::stod(fields[4]);
        if (!(col.lo < col.hi))
          throw SchemaError(origin + ": column " + col.name +
                            ": bounds need lo < hi");
      } else if (fields[1] == "categorical") {
        if (fields.size() < 3)
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": categorical column needs a category list");
        col.kind = ColumnKind::categorical;
        col.categories = split_on(fields[2], '|');
        if (col.categories.size() < 2)
          throw SchemaError(origin + ": column " + col.name +
                            ": needs at least 2 categories");
      } else {
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": unknown column kind `" + fields[1] + "`");
      }
      schema.columns.push_back(std::move(col));
    } else {
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": unknown key `" + key + "`");
    }
  }
  if (schema.columns.empty())
    throw SchemaError(origin + ": schema declares no columns");
  const int t = schema.column_index(schema.target);
  if (t < 0)
    throw SchemaError(origin + ": target column `" + schema.target +
                      "` not declared");
  const auto& tc = schema.columns[std::size_t(t)];
  if (tc.kind != ColumnKind::categorical || tc.categories.size() != 2)
    throw SchemaError(origin + ": target must be categorical with 2 classes");
  return schema;
}

DatasetSchema DatasetSchema::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file " + path);
  return parse(in, path);
}

std::size_t Table::class_count(int cls) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r)
    if (target_class(r) == cls) ++n;
  return n;
}

int Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return int(i);
  return -1;
}

Table Table::subset(const std::vector<std::uint32_t>& row_ids) const {
  Table out;
  out.columns = columns;
  out.target_idx = target_idx;
  out.rows = row_ids.size();
  out.data.reserve(row_ids.size() * columns.size());
  for (const auto r : row_ids)
    for (std::size_t c = 0; c < columns.size(); ++c)
      out.data.push_back((*this)(r, c));
  return out;
}

std::size_t Shards::total_rows() const {
  std::size_t n = 0;
  for (const auto& t : node_tables) n += t.rows;
  return n;
}

namespace {

// RFC 4180 record reader: quoted fields, doubled-quote escapes, embedded
// separators and line breaks inside quotes, CRLF or LF endings.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Returns false at end of input. `line_no` is the physical line where the
  // record started (1-based).
  bool next(std::vector<std::string>& fields, int& line_no) {
    fields.clear();
    int c = in_.get();
    while (c == '\n') {  // tolerate blank lines between records
      ++line_;
      c = in_.get();
    }
    if (c == std::istream::traits_type::eof()) return false;
    line_no = line_;
    std::string cur;
    bool quoted = false;
    for (;; c = in_.get()) {
      if (c == std::istream::traits_type::eof()) {
        fields.push_back(cur);
        return true;
      }
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            cur += '"';
            in_.get();
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          cur += char(c);
        }
        continue;
      }
      switch (c) {
        case '"':
          quoted = true;
          break;
        case ',':
          fields.push_back(cur);
          cur.clear();
          break;
        case '\r':
          break;
        case '\n':
          ++line_;
          fields.push_back(cur);
          return true;
        default:
          cur += char(c);
      }
    }
  }

 private:
  std::istream& in_;
  int line_ = 1;
};

bool is_missing(const std::string& field) {
  return field.empty() || field == "?";
}

std::string row_key(const double* row, std::size_t m) {
  std::string key(m * sizeof(double), '\0');
  std::memcpy(key.data(), row, m * sizeof(double));
  return key;
}

}  // namespace

Table load_csv_stream(std::istream& in, const DatasetSchema& schema,
                      const std::string& origin, const LoadOptions& opts) {
  const std::size_t m = schema.columns.size();
  CsvReader reader(in);
  std::vector<std::string> fields;
  int line_no = 0;

  if (!reader.next(fields, line_no))
    throw ParseError(origin + ": empty file");
  if (fields.size() != m)
    throw SchemaError(origin + ": header has " + std::to_string(fields.size()) +
                      " columns, schema declares " + std::to_string(m));
  for (std::size_t i = 0; i < m; ++i)
    if (trim(fields[i]) != schema.columns[i].name)
      throw SchemaError(origin + ": header column " + std::to_string(i + 1) +
                        " is `" + fields[i] + "`, schema expects `" +
                        schema.columns[i].name + "`");

  Table t;
  t.columns = schema.columns;
  t.target_idx = schema.column_index(schema.target);

  std::unordered_set<std::string> seen;
  std::vector<double> row(m);
  while (reader.next(fields, line_no)) {
    if (fields.size() != m)
      throw ParseError(origin + ":" + std::to_string(line_no) + ": got " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(m));
    bool missing = false;
    for (std::size_t i = 0; i < m && !missing; ++i)
      if (is_missing(trim(fields[i]))) missing = true;
    if (missing) {
      ++t.dropped_missing;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const std::string field = trim(fields[i]);
      const auto& col = schema.columns[i];
      if (col.kind == ColumnKind::numeric) {
        std::size_t used = 0;
        double v;
        try {
          v = std::stod(field, &used);
        } catch (const std::exception&) {
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": column `" + col.name + "`: not a number: `" +
                           field + "`");
        }
        if (used != field.size())
          throw ParseError(origin + ":" + std::to_string(line_no) +
                           ": column `" + col.name + "`: not a number: `" +
                           field + "`");
        if (v < col.lo) {
          v = col.lo;
          ++t.clamped_values;
        } else if (v > col.hi) {
          v = col.hi;
          ++t.clamped_values;
        }
        row[i] = v;
      } else {
        const auto it = std::find(col.categories.begin(), col.categories.end(),
                                  field);
        if (it == col.categories.end())
          throw SchemaError(origin + ":" + std::to_string(line_no) +
                            ": column `" + col.name +
                            "`: unknown category label `" + field + "`");
        row[i] = double(it - col.categories.begin());
      }
    }
    if (!seen.insert(row_key(row.data(), m)).second) {
      ++t.dropped_duplicates;
      continue;
    }
    t.data.insert(t.data.end(), row.begin(), row.end());
    ++t.rows;
  }

  if (opts.max_rows > 0 && t.rows > opts.max_rows) {
    std::vector<std::uint32_t> ids(t.rows);
    for (std::size_t i = 0; i < t.rows; ++i) ids[i] = std::uint32_t(i);
    Rng rng(derive_seed(opts.subsample_seed, 0x5AB5A17ull));
    shuffle(ids, rng);
    ids.resize(opts.max_rows);
    std::sort(ids.begin(), ids.end());
    Table cut = t.subset(ids);
    cut.dropped_missing = t.dropped_missing;
    cut.dropped_duplicates = t.dropped_duplicates;
    cut.clamped_values = t.clamped_values;
    return cut;
  }
  return t;
}

Table load_csv(const std::string& path, const DatasetSchema& schema,
               const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open CSV file " + path);
  return load_csv_stream(in, schema, path, opts);
}

SplitSpec balanced_split(const Table& t, std::uint64_t seed) {
  std::vector<std::uint32_t> by_class[2];
  for (std::size_t r = 0; r < t.rows; ++r)
    by_class[t.target_class(r)].push_back(std::uint32_t(r));
  const std::size_t minority = std::min(by_class[0].size(), by_class[1].size());
  if (by_class[0].size() < 10 || by_class[1].size() < 10)
    throw InsufficientDataError("balanced_split: a target class has fewer than 10 rows");

  // Test gets 1/5 of the minority count per class, train the remaining 4/5;
  // the majority class is subsampled to the same counts so both splits are
  // balanced.
  const auto test_per_class = std::size_t(std::llround(double(minority) / 5.0));
  const std::size_t train_per_class = minority - test_per_class;

  SplitSpec out;
  out.seed = seed;
  std::vector<std::uint32_t> train_ids, test_ids;
  for (int cls = 0; cls < 2; ++cls) {
    Rng rng(derive_seed(seed, 0x59117ull, std::uint64_t(cls)));
    auto ids = by_class[cls];
    shuffle(ids, rng);
    test_ids.insert(test_ids.end(), ids.begin(), ids.begin() + test_per_class);
    train_ids.insert(train_ids.end(), ids.begin() + test_per_class,
                     ids.begin() + test_per_class + train_per_class);
  }
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  out.train = t.subset(train_ids);
  out.test = t.subset(test_ids);
  return out;
}

Shards shard(const Table& t, int k, std::uint64_t seed) {
  if (k < 1 || std::size_t(k) > t.rows)
    throw ConfigError("shard: need 1 <= k <= rows, got k=" + std::to_string(k) +
                      " for " + std::to_string(t.rows) + " rows");
  Shards out;
  out.seed = seed;
  if (k == 1) {
    out.node_tables.push_back(t);
    return out;
  }
  std::vector<std::uint32_t> ids(t.rows);
  for (std::size_t i = 0; i < t.rows; ++i) ids[i] = std::uint32_t(i);
  Rng rng(derive_seed(seed, 0x54A4Dull));
  shuffle(ids, rng);
  const std::size_t base = t.rows / std::size_t(k);
  const std::size_t extra = t.rows % std::size_t(k);
  std::size_t pos = 0;
  for (int node = 0; node < k; ++node) {
    const std::size_t len = base + (std::size_t(node) < extra ? 1 : 0);
    std::vector<std::uint32_t> node_ids(ids.begin() + pos,
                                        ids.begin() + pos + len);
    pos += len;
    out.node_tables.push_back(t.subset(node_ids));
  }
  return out;
}

std::vector<FeatureEffect> rank_features(const Table& t) {
  std::vector<FeatureEffect> out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (int(c) == t.target_idx || t.columns[c].kind != ColumnKind::numeric)
      continue;
    double n[2] = {0, 0}, sum[2] = {0, 0}, sumsq[2] = {0, 0};
    for (std::size_t r = 0; r < t.rows; ++r) {
      const int cls = t.target_class(r);
      const double v = t(r, c);
      n[cls] += 1;
      sum[cls] += v;
      sumsq[cls] += v * v;
    }
    double effect = 0.0;
    if (n[0] > 0 && n[1] > 0) {
      const double m0 = sum[0] / n[0], m1 = sum[1] / n[1];
      const double ss0 = sumsq[0] - n[0] * m0 * m0;
      const double ss1 = sumsq[1] - n[1] * m1 * m1;
      const double denom = n[0] + n[1] - 2.0;
      const double pooled = denom > 0 ? std::max(0.0, (ss0 + ss1) / denom) : 0.0;
      const double diff = std::abs(m0 - m1);
      if (pooled > 0)
        effect = diff / std::sqrt(pooled);
      else
        effect = diff > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    out.push_back({t.columns[c].name, effect});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureEffect& a, const FeatureEffect& b) {
                     return a.effect > b.effect;
                   });
  return out;
}

int selected_column(const Table& t, const DatasetSchema& schema) {
  if (!schema.selected.empty()) {
    const int idx = t.column_index(schema.selected);
    if (idx < 0)
      throw SchemaError("selected column `" + schema.selected +
                        "` not in table");
    return idx;
  }
  const auto ranked = rank_features(t);
  if (ranked.empty())
    throw SchemaError("dataset has no numeric column to select");
  return t.column_index(ranked.front().column);
}

EncodedMatrix encode_features(const Table& t) {
  EncodedMatrix out;
  out.rows = t.rows;
  std::vector<std::pair<std::size_t, int>> layout;  // column, category (-1 = numeric)
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (int(c) == t.target_idx) continue;
    const auto& col = t.columns[c];
    if (col.kind == ColumnKind::numeric) {
      layout.emplace_back(c, -1);
      out.feature_names.push_back(col.name);
    } else {
      // one-hot, first category dropped to keep the design matrix full rank
      for (std::size_t cat = 1; cat < col.categories.size(); ++cat) {
        layout.emplace_back(c, int(cat));
        out.feature_names.push_back(col.name + "=" + col.categories[cat]);
      }
    }
  }
  out.dim = layout.size();
  out.x.resize(out.rows * out.dim);
  out.y.resize(out.rows);
  for (std::size_t r = 0; r < t.rows; ++r) {
    out.y[r] = t.target_class(r);
    double* dst = out.x.data() + r * out.dim;
    for (std::size_t f = 0; f < layout.size(); ++f) {
      const auto [c, cat] = layout[f];
      const double v = t(r, c);
      if (cat < 0) {
        const auto& col = t.columns[c];
        dst[f] = (v - col.lo) / col.range();
      } else {
        dst[f] = (int(v) == cat) ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

}  // namespace fedsandbox
