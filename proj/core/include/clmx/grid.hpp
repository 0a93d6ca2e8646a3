#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "clmx/corpus.hpp"
#include "clmx/training.hpp"

namespace clmx {

struct LanguagePaths {
    std::string name;
    std::filesystem::path train, dev, test;
};

// Declarative description of a transfer grid or data-size sweep.
struct ExperimentConfig {
    std::vector<LanguagePaths> languages;  // sorted by name
    std::string target;
    std::vector<std::string> sources;
    std::vector<int> depths;
    int embed_dim = 32;
    int hidden_dim = 128;
    TrainConfig train;
    std::vector<double> data_fractions;  // used by the sweep; empty = {1.0}
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;
    std::string vowel_language = "english";

    void validate() const;
};

// JSON config file; all paths are relative to the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct GridRow {
    std::string source;  // "-" for the baseline
    int depth = 0;
    std::uint64_t seed = 0;
    double fraction = 1.0;
    double dev_ppl = 0.0;
    double test_word_ppl = 0.0;
    double test_char_ppl = 0.0;
    double lambda = 0.0;          // NaN on baseline rows
    double interp_test_ppl = 0.0; // NaN on baseline rows
    double mean_cosine = 0.0;     // NaN on baseline rows
    std::string error;            // empty unless the cell failed

    bool is_baseline() const { return source == "-"; }
};

bool rows_equal(const GridRow& a, const GridRow& b);  // NaN-tolerant

struct GridReport {
    std::vector<GridRow> rows;
};

GridReport run_transfer_grid(const ExperimentConfig& config);
GridReport run_datasize_sweep(const ExperimentConfig& config);

enum class ReportFormat { TextTable, Delimited };

void render_report(const GridReport& report, ReportFormat format, std::ostream& out);
void write_report(const GridReport& report, ReportFormat format,
                  const std::filesystem::path& path);
// parses the delimited format back
GridReport parse_report(std::istream& in);
GridReport read_report(const std::filesystem::path& path);

}  // namespace clmx
