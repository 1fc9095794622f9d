#pragma once

#include <cstdint>
#include <string>

namespace fedsandbox {

// Seed for the bundled sample datasets; a fixed constant so every checkout
// reproduces the same files.
inline constexpr std::uint64_t kDefaultDataSeed = 0xFEDBA5Eull;

bool is_known_dataset(const std::string& dataset);

// Writes the synthetic sample CSV for one of heart, framingham, adult,
// brfss. Raw files deliberately contain a few missing-value rows and exact
// duplicates so the cleaning path does real work.
void write_synthetic_csv(const std::string& dataset, const std::string& path,
                         std::uint64_t seed = kDefaultDataSeed);

// Resolves the dataset cache directory: explicit argument if non-empty,
// else $FEDSANDBOX_DATA_DIR, else ./data.
std::string resolve_data_dir(const std::string& override_dir = "");

// Path of the raw CSV inside the cache dir; generates the synthetic sample
// on first use if no file is present.
std::string ensure_dataset_csv(const std::string& dataset,
                               const std::string& data_dir,
                               std::uint64_t seed = kDefaultDataSeed);

}  // namespace fedsandbox
