#include "fedsandbox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unordered_set>
#include <vector>

#include "fedsandbox/error.hpp"
#include "fedsandbox/rng.hpp"

namespace fedsandbox {

namespace {

// Row builders return the comma-joined record for one synthetic person of
// the given target class.
using RowFn = std::string (*)(int cls, Rng& rng);

double clampd(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

long long draw_int(Rng& rng, double mean, double sd, double lo, double hi) {
  return std::llround(clampd(rng.normal(mean, sd), lo, hi));
}

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Draws an index from cumulative weights (need not sum exactly to 1; the
// tail absorbs rounding).
std::size_t pick(Rng& rng, std::initializer_list<double> weights) {
  const double u = rng.uniform01();
  double acc = 0.0;
  std::size_t i = 0;
  for (const double w : weights) {
    acc += w;
    if (u < acc) return i;
    ++i;
  }
  return weights.size() - 1;
}

int bern(Rng& rng, double p) { return rng.uniform01() < p ? 1 : 0; }

std::string heart_row(int cls, Rng& rng) {
  std::string r;
  r += std::to_string(draw_int(rng, cls ? 56.6 : 52.6, cls ? 8.0 : 9.5, 29, 77));
  r += ',' + std::to_string(bern(rng, cls ? 0.82 : 0.56));
  r += ',' + std::to_string(1 + (cls ? pick(rng, {0.04, 0.06, 0.13, 0.77})
                                     : pick(rng, {0.12, 0.25, 0.42, 0.21})));
  r += ',' + std::to_string(draw_int(rng, cls ? 134 : 129, cls ? 19 : 16, 94, 200));
  r += ',' + std::to_string(draw_int(rng, cls ? 251 : 243, cls ? 49 : 53, 126, 564));
  r += ',' + std::to_string(bern(rng, cls ? 0.16 : 0.14));
  r += ',' + std::to_string(cls ? pick(rng, {0.44, 0.03, 0.53})
                                : pick(rng, {0.56, 0.01, 0.43}));
  r += ',' + std::to_string(draw_int(rng, cls ? 137.5 : 159.5, cls ? 21.0 : 19.0, 71, 202));
  r += ',' + std::to_string(bern(rng, cls ? 0.55 : 0.14));
  r += ',' + fmt(clampd(std::abs(rng.normal(cls ? 0.95 : 0.45, cls ? 1.0 : 0.7)), 0, 6.2), "%.1f");
  r += ',' + std::to_string(1 + (cls ? pick(rng, {0.26, 0.65, 0.09})
                                     : pick(rng, {0.64, 0.29, 0.07})));
  r += ',' + std::to_string(cls ? pick(rng, {0.33, 0.31, 0.22, 0.14})
                                : pick(rng, {0.73, 0.15, 0.08, 0.04}));
  static const char* thal[] = {"3", "6", "7"};
  r += ',';
  r += thal[cls ? pick(rng, {0.33, 0.09, 0.58}) : pick(rng, {0.79, 0.04, 0.17})];
  r += ',' + std::to_string(cls);
  return r;
}

std::string framingham_row(int cls, Rng& rng) {
  std::string r;
  r += std::to_string(bern(rng, cls ? 0.53 : 0.41));
  r += ',' + std::to_string(draw_int(rng, cls ? 53.6 : 48.6, cls ? 8.0 : 8.5, 32, 70));
  r += ',' + std::to_string(1 + (cls ? pick(rng, {0.48, 0.27, 0.15, 0.10})
                                     : pick(rng, {0.41, 0.31, 0.17, 0.11})));
  const int smoker = bern(rng, cls ? 0.52 : 0.49);
  r += ',' + std::to_string(smoker);
  r += ',' + std::to_string(smoker ? draw_int(rng, 18, 11, 1, 70) : 0);
  r += ',' + std::to_string(bern(rng, cls ? 0.06 : 0.025));
  r += ',' + std::to_string(bern(rng, cls ? 0.02 : 0.005));
  r += ',' + std::to_string(bern(rng, cls ? 0.50 : 0.29));
  r += ',' + std::to_string(bern(rng, cls ? 0.06 : 0.02));
  r += ',' + std::to_string(draw_int(rng, cls ? 244 : 235, cls ? 46 : 44, 107, 696));
  r += ',' + fmt(std::round(clampd(rng.normal(cls ? 146.0 : 130.5, cls ? 26.0 : 20.0), 83, 295) * 2.0) / 2.0, "%.1f");
  r += ',' + fmt(std::round(clampd(rng.normal(cls ? 87.0 : 82.0, cls ? 13.0 : 11.5), 48, 142) * 2.0) / 2.0, "%.1f");
  r += ',' + fmt(clampd(rng.normal(cls ? 26.9 : 25.6, cls ? 4.3 : 4.0), 15, 57), "%.2f");
  r += ',' + std::to_string(draw_int(rng, cls ? 76.7 : 75.7, cls ? 12.5 : 12.0, 44, 143));
  r += ',' + std::to_string(draw_int(rng, cls ? 88 : 81, cls ? 32 : 22, 40, 394));
  r += ',' + std::to_string(cls);
  return r;
}

std::string adult_row(int cls, Rng& rng) {
  static const char* workclass[] = {"Private", "Self-emp-not-inc", "Self-emp-inc",
                                    "Federal-gov", "Local-gov", "State-gov",
                                    "Without-pay", "Never-worked"};
  static const char* education[] = {"Preschool", "1st-4th", "5th-6th", "7th-8th",
                                    "9th", "10th", "11th", "12th", "HS-grad",
                                    "Some-college", "Assoc-voc", "Assoc-acdm",
                                    "Bachelors", "Masters", "Prof-school",
                                    "Doctorate"};
  static const char* marital[] = {"Married-civ-spouse", "Divorced", "Never-married",
                                  "Separated", "Widowed", "Married-spouse-absent",
                                  "Married-AF-spouse"};
  static const char* occupation[] = {"Tech-support", "Craft-repair", "Other-service",
                                     "Sales", "Exec-managerial", "Prof-specialty",
                                     "Handlers-cleaners", "Machine-op-inspct",
                                     "Adm-clerical", "Farming-fishing",
                                     "Transport-moving", "Priv-house-serv",
                                     "Protective-serv", "Armed-Forces"};
  static const char* relationship[] = {"Wife", "Own-child", "Husband",
                                       "Not-in-family", "Other-relative",
                                       "Unmarried"};
  static const char* race[] = {"White", "Asian-Pac-Islander", "Amer-Indian-Eskimo",
                               "Other", "Black"};
  static const char* country[] = {"United-States", "Mexico", "Philippines",
                                  "Germany", "Canada", "India", "England",
                                  "Other"};
  std::string r;
  r += std::to_string(draw_int(rng, cls ? 44.2 : 36.8, cls ? 10.5 : 13.7, 17, 90));
  r += ',';
  r += workclass[cls ? pick(rng, {0.63, 0.09, 0.08, 0.04, 0.07, 0.055, 0.0025, 0.0025})
                     : pick(rng, {0.75, 0.077, 0.025, 0.028, 0.062, 0.04, 0.005, 0.003})];
  r += ',' + std::to_string(std::llround(clampd(std::exp(rng.normal(11.9, 0.5)), 10000, 1500000)));
  // education-num drives the paired label
  const long long edu = cls ? draw_int(rng, 11.6, 2.4, 1, 16)
                            : draw_int(rng, 9.6, 2.5, 1, 16);
  r += ',';
  r += education[edu - 1];
  r += ',' + std::to_string(edu);
  r += ',';
  r += marital[cls ? pick(rng, {0.85, 0.06, 0.05, 0.01, 0.02, 0.008, 0.002})
                   : pick(rng, {0.33, 0.14, 0.43, 0.04, 0.04, 0.018, 0.002})];
  r += ',';
  r += occupation[cls ? pick(rng, {0.04, 0.12, 0.05, 0.12, 0.25, 0.24, 0.02, 0.05, 0.07, 0.015, 0.05, 0.001, 0.029, 0.005})
                      : pick(rng, {0.04, 0.13, 0.12, 0.11, 0.10, 0.10, 0.06, 0.07, 0.13, 0.04, 0.06, 0.01, 0.02, 0.01})];
  r += ',';
  r += relationship[cls ? pick(rng, {0.12, 0.01, 0.75, 0.08, 0.005, 0.035})
                        : pick(rng, {0.04, 0.18, 0.30, 0.28, 0.08, 0.12})];
  r += ',';
  r += race[cls ? pick(rng, {0.90, 0.035, 0.005, 0.005, 0.055})
                : pick(rng, {0.84, 0.03, 0.011, 0.009, 0.11})];
  r += ',';
  r += (bern(rng, cls ? 0.85 : 0.61) ? "Male" : "Female");
  double gain = 0.0;
  if (rng.uniform01() < (cls ? 0.22 : 0.04))
    gain = clampd(std::exp(rng.normal(cls ? 8.9 : 7.3, 1.0)), 1, 99999);
  r += ',' + std::to_string((long long)std::llround(gain));
  double loss = 0.0;
  if (rng.uniform01() < (cls ? 0.05 : 0.02))
    loss = clampd(rng.normal(1800, 350), 1, 4356);
  r += ',' + std::to_string((long long)std::llround(loss));
  r += ',' + std::to_string(draw_int(rng, cls ? 45.5 : 38.8, cls ? 11.0 : 12.0, 1, 99));
  r += ',';
  r += country[pick(rng, {0.895, 0.02, 0.006, 0.004, 0.004, 0.003, 0.003, 0.065})];
  r += ',';
  r += (cls ? ">50K" : "<=50K");
  return r;
}

std::string brfss_row(int cls, Rng& rng) {
  std::string r;
  r += std::to_string(bern(rng, cls ? 0.75 : 0.38));
  r += ',' + std::to_string(bern(rng, cls ? 0.67 : 0.40));
  r += ',' + std::to_string(bern(rng, cls ? 0.99 : 0.96));
  r += ',' + std::to_string(draw_int(rng, cls ? 31.9 : 27.8, cls ? 7.3 : 6.2, 12, 98));
  r += ',' + std::to_string(bern(rng, cls ? 0.52 : 0.43));
  r += ',' + std::to_string(bern(rng, cls ? 0.092 : 0.032));
  r += ',' + std::to_string(bern(rng, cls ? 0.22 : 0.07));
  r += ',' + std::to_string(bern(rng, cls ? 0.63 : 0.78));
  r += ',' + std::to_string(draw_int(rng, cls ? 3.3 : 2.4, 1.0, 1, 5));
  r += ',' + std::to_string(rng.uniform01() < (cls ? 0.62 : 0.67)
                                ? 0
                                : draw_int(rng, 8, 9, 0, 30));
  r += ',' + std::to_string(rng.uniform01() < (cls ? 0.45 : 0.61)
                                ? 0
                                : draw_int(rng, 9, 10, 0, 30));
  r += ',' + std::to_string(bern(rng, cls ? 0.37 : 0.13));
  r += ',' + std::to_string(bern(rng, cls ? 0.47 : 0.44));
  r += ',' + std::to_string(draw_int(rng, cls ? 9.4 : 7.8, cls ? 2.4 : 3.0, 1, 13));
  r += ',' + std::to_string(cls);
  return r;
}

struct DatasetPlan {
  const char* header;
  RowFn row_fn;
  std::size_t clean_class0;
  std::size_t clean_class1;
  std::size_t missing_rows;
  std::size_t duplicate_rows;
  // column replaced by the missing sentinel in injected dirty rows
  std::size_t missing_field;
  const char* sentinel;
};

DatasetPlan plan_for(const std::string& dataset) {
  if (dataset == "heart")
    return {"age,sex,cp,trestbps,chol,fbs,restecg,thalach,exang,oldpeak,slope,ca,thal,num",
            heart_row, 164, 139, 3, 2, 11, "?"};
  if (dataset == "framingham")
    return {"male,age,education,currentSmoker,cigsPerDay,BPMeds,prevalentStroke,"
            "prevalentHyp,diabetes,totChol,sysBP,diaBP,BMI,heartRate,glucose,TenYearCHD",
            framingham_row, 3596, 644, 4, 2, 2, ""};
  if (dataset == "adult")
    return {"age,workclass,fnlwgt,education,education-num,marital-status,occupation,"
            "relationship,race,sex,capital-gain,capital-loss,hours-per-week,"
            "native-country,income",
            adult_row, 36080, 11330, 1412, 20, 1, "?"};
  if (dataset == "brfss")
    return {"HighBP,HighChol,CholCheck,BMI,Smoker,Stroke,HeartDiseaseorAttack,"
            "PhysActivity,GenHlth,MentHlth,PhysHlth,DiffWalk,Sex,Age,Diabetes_binary",
            brfss_row, 103320, 16680, 280, 52, 3, ""};
  throw ConfigError("unknown dataset `" + dataset +
                    "` (expected heart, framingham, adult or brfss)");
}

std::string replace_field(const std::string& row, std::size_t field,
                          const std::string& value) {
  std::size_t start = 0, idx = 0;
  while (idx < field) {
    start = row.find(',', start) + 1;
    ++idx;
  }
  std::size_t end = row.find(',', start);
  if (end == std::string::npos) end = row.size();
  return row.substr(0, start) + value + row.substr(end);
}

}  // namespace

bool is_known_dataset(const std::string& dataset) {
  return dataset == "heart" || dataset == "framingham" || dataset == "adult" ||
         dataset == "brfss";
}

void write_synthetic_csv(const std::string& dataset, const std::string& path,
                         std::uint64_t seed) {
  const DatasetPlan plan = plan_for(dataset);
  Rng rng(derive_seed(seed, std::uint64_t(std::hash<std::string>{}(dataset))));

  std::vector<std::string> rows;
  std::unordered_set<std::string> seen;
  for (int cls = 0; cls < 2; ++cls) {
    const std::size_t want = cls ? plan.clean_class1 : plan.clean_class0;
    std::size_t made = 0;
    while (made < want) {
      std::string r = plan.row_fn(cls, rng);
      if (seen.insert(r).second) {
        rows.push_back(std::move(r));
        ++made;
      }
    }
  }
  shuffle(rows, rng);

  // Dirty extras: rows with a missing sentinel and exact duplicates, spliced
  // at deterministic positions. Both vanish during cleaning.
  std::vector<std::string> extras;
  for (std::size_t i = 0; i < plan.missing_rows; ++i)
    extras.push_back(replace_field(rows[i % rows.size()], plan.missing_field,
                                   plan.sentinel));
  for (std::size_t i = 0; i < plan.duplicate_rows; ++i)
    extras.push_back(rows[(i * 7 + 3) % rows.size()]);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file " + path);
  out << plan.header << '\n';
  std::size_t next_extra = 0;
  const std::size_t stride =
      extras.empty() ? rows.size() + 1 : rows.size() / (extras.size() + 1) + 1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i] << '\n';
    if (next_extra < extras.size() && (i + 1) % stride == 0)
      out << extras[next_extra++] << '\n';
  }
  while (next_extra < extras.size()) out << extras[next_extra++] << '\n';
}

std::string resolve_data_dir(const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("FEDSANDBOX_DATA_DIR"); env && *env)
    return env;
  return "data";
}

std::string ensure_dataset_csv(const std::string& dataset,
                               const std::string& data_dir,
                               std::uint64_t seed) {
  if (!is_known_dataset(dataset))
    throw ConfigError("unknown dataset `" + dataset + "`");
  namespace fs = std::filesystem;
  fs::create_directories(data_dir);
  const std::string path = (fs::path(data_dir) / (dataset + ".csv")).string();
  if (!fs::exists(path)) {
    std::fprintf(stderr,
                 "[fedsandbox] %s not found; generating the synthetic sample "
                 "dataset (drop a real CSV there to use it instead)\n",
                 path.c_str());
    write_synthetic_csv(dataset, path, seed);
  }
  return path;
}

}  // namespace fedsandbox
