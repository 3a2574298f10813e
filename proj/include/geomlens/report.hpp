#pragma once

#include "geomlens/spectral.hpp"
#include "geomlens/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace geomlens::report {

struct HeadInput {
    std::filesystem::path wq;
    std::filesystem::path wk;
};

struct RunConfig {
    std::vector<std::filesystem::path> embeddings;  // one container per layer
    std::vector<HeadInput> heads;                   // optional per-head weights
    bool drop_first_token = true;
    bool skip_final_layer = true;
    bool include_layer0 = true;
    /// Defaults to the largest layer index found in the inputs.
    std::optional<int> final_layer;
    std::vector<int> Ks = {1, 3, 5, 10};
    int spectrum_columns = 60;
    spectral::RankMethod ood_rank_method = spectral::RankMethod::gap;
    int dissect_K = 20;
    double dissect_quantile = 0.98;
    int threads = 1;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;  // empty: nothing written
    bool write_json = false;

    /// Fail-fast checks: paths exist, Ks positive, threads >= 1.
    void validate() const;
};

struct LayerRow {
    int layer = 0;
    int T = 0;
    int rank_gap = 0;
    int rank_energy = 0;
    double stable_rank = 0.0;
    double relative_norm = 0.0;
    std::optional<double> inter;
    std::optional<double> intra;
    double incoherence_mean = 0.0;
    double incoherence_max = 0.0;
    std::map<int, double> r;  // K -> r_K
    std::vector<double> spectrum;
};

struct HeadRow {
    int layer = 0;
    int head = 0;
    double argmax_locality = 0.0;
    double energy_fraction = 0.0;
    int K = 0;
};

struct Failure {
    std::string input;
    std::string message;
    int exit_code = 2;
};

struct SummaryStat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single layer
};

struct Report {
    std::vector<LayerRow> layers;  // sorted by layer
    std::vector<HeadRow> heads;
    std::vector<Failure> failures;
    std::vector<int> skipped_layers;
    std::map<std::string, SummaryStat> summary;

    /// 0 success, 4 partial failure, or the code of the first failure when
    /// nothing succeeded.
    int exit_code() const;
};

/// Analyses one already-loaded layer (artifact handling not applied).
LayerRow analyze_layer(const EmbeddingTensor& e, const std::vector<int>& Ks, int spectrum_columns = 60);

Report run_report(const RunConfig& cfg);

struct OodRow {
    int layer = 0;
    int rank = 0;
    double r10 = 0.0;
};

struct OodReport {
    std::vector<OodRow> layers;
    std::vector<Failure> failures;
    std::vector<int> skipped_layers;
    std::map<std::string, SummaryStat> summary;
    int exit_code() const;
};

OodReport run_ood_report(const RunConfig& cfg);

/// Column names of the per-layer CSV, in order.
std::vector<std::string> layer_columns(const std::vector<int>& Ks);

std::string layers_csv(const Report& r, const std::vector<int>& Ks);
std::string spectrum_csv(const Report& r);
std::string heads_csv(const Report& r);
std::string ood_csv(const OodReport& r);
nlohmann::json to_json(const Report& r, const std::vector<int>& Ks);
nlohmann::json to_json(const OodReport& r);

/// Table-style "mean (std)" lines, one per metric.
std::string format_summary(const std::map<std::string, SummaryStat>& summary);

/// Writes report.csv, spectrum.csv, heads.csv (if any) and report.json.
void write_report(const Report& r, const RunConfig& cfg);
void write_ood_report(const OodReport& r, const RunConfig& cfg);

SummaryStat summarize_values(const std::vector<double>& v);

/// Exit code for an exception thrown while processing an input.
int exit_code_for(const std::exception& ex);

}  // namespace geomlens::report
