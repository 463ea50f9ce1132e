#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "texteffect/corpus.hpp"
#include "texteffect/diagnostics.hpp"
#include "texteffect/dgp.hpp"
#include "texteffect/sim.hpp"
#include "texteffect/types.hpp"

namespace tfx {

// Write-temp-then-rename; concurrent writers must target distinct paths.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// Every output directory carries a manifest with the config hash and seed.
void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const nlohmann::json& config, const std::vector<std::string>& outputs);

nlohmann::json estimate_to_json(const EffectEstimate& est);
std::string estimates_to_jsonl(const std::vector<EffectEstimate>& estimates);
std::string estimates_summary_csv(const std::vector<EffectEstimate>& estimates);

SimConfig sim_config_from_json(const nlohmann::json& cfg,
                               std::optional<std::uint64_t> seed_override = std::nullopt);
DgpParams dgp_params_from_json(const nlohmann::json& cfg,
                               std::optional<std::uint64_t> seed_override = std::nullopt);

nlohmann::json run_ingest(const Corpus& corpus);

nlohmann::json run_audit(const Corpus& corpus, const nlohmann::json& cfg,
                         const std::filesystem::path& out_dir);

nlohmann::json run_counts(const Corpus& corpus, const nlohmann::json& cfg,
                          const std::filesystem::path& out_dir);

nlohmann::json run_dgp(const nlohmann::json& cfg, const std::filesystem::path& out_dir);

std::vector<EffectEstimate> run_estimate(const Corpus& corpus, const nlohmann::json& cfg);
nlohmann::json run_estimate_files(const Corpus& corpus, const nlohmann::json& cfg,
                                  const std::filesystem::path& out_dir);

nlohmann::json run_simulate(const Corpus& corpus, const nlohmann::json& cfg,
                            const std::filesystem::path& out_dir, int jobs, bool resume);

// corpus may be null when cfg carries a dgp block.
nlohmann::json run_benchmark(const Corpus* corpus, const nlohmann::json& cfg,
                             const std::filesystem::path& out_dir, int jobs, bool resume);

nlohmann::json run_report(const std::filesystem::path& benchmark_dir);

// Estimator zoo over one observational view (used per replica and for
// corpus-level runs of the adjustment estimators).
struct ZooOptions {
    std::vector<std::string> estimators;
    int min_df = 5;
    bool binary_counts = false;
    int k_folds = 5;
    int n_trees = 100;
    int max_depth = 0;
    double bound_lo = 0.1;
    double bound_hi = 0.9;
    std::string bound_mode = "winsorize";  // winsorize | trim | none
    std::uint64_t seed = 0;
};

std::vector<EstimateRecord> run_zoo(const std::vector<ViewRow>& view,
                                    const std::vector<std::string>& outcomes,
                                    const ZooOptions& opts, int replica_index);

void parallel_for(int n, int jobs, const std::function<void(int)>& body);

}  // namespace tfx
