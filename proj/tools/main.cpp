// texteffect command-line tool. Links the C API only; all heavy lifting lives
// in the shared library.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "texteffect/texteffect.h"

namespace {

using nlohmann::json;

struct StringOut {
    char* value = nullptr;
    ~StringOut() { tfx_string_free(value); }
    std::string str() const { return value ? value : ""; }
};

struct CorpusHandle {
    tfx_corpus* handle = nullptr;
    ~CorpusHandle() { tfx_corpus_close(handle); }
};

// Exit codes: 0 success, 1 validation error (bad inputs or config), 2 runtime
// error (I/O, non-computable results, internal faults).
int exit_code_for(tfx_status status) {
    switch (status) {
        case TFX_OK:
            return 0;
        case TFX_ERR_IO:
        case TFX_ERR_NON_COMPUTABLE:
        case TFX_ERR_INTERNAL:
            return 2;
        default:
            return 1;
    }
}

[[noreturn]] void die(tfx_status status) {
    std::fprintf(stderr, "error: %s\n", tfx_last_error());
    std::exit(exit_code_for(status));
}

void check(tfx_status status) {
    if (status != TFX_OK) die(status);
}

std::string default_out_dir() {
    const char* env = std::getenv("TEXTEFFECT_OUT_DIR");
    return env && *env ? env : ".";
}

struct CorpusArgs {
    std::string units, evaluations, ratings;
    std::string value_mode;  // "", "likert", "numeric"

    void attach(CLI::App* cmd, bool required = true) {
        auto* u = cmd->add_option("--units", units, "units.csv path");
        auto* e = cmd->add_option("--evaluations", evaluations, "evaluations.csv path");
        auto* r = cmd->add_option("--ratings", ratings, "ratings.csv path");
        if (required) {
            u->required();
            e->required();
            r->required();
        }
        cmd->add_option("--value-mode", value_mode,
                        "evaluation value validation: likert or numeric")
            ->check(CLI::IsMember({"likert", "numeric"}));
    }

    tfx_corpus* open(bool numeric_default) const {
        bool numeric = numeric_default;
        if (value_mode == "likert") numeric = false;
        if (value_mode == "numeric") numeric = true;
        tfx_corpus* handle = nullptr;
        check(tfx_corpus_open(units.c_str(), evaluations.c_str(), ratings.c_str(),
                              numeric ? 1 : 0, &handle));
        return handle;
    }

    bool given() const { return !units.empty(); }
};

// Flags that override config-file keys; only flags the user actually set are
// forwarded.
class Overrides {
public:
    explicit Overrides(CLI::App* cmd) : cmd_(cmd) {}

    void add_int(const std::string& flag, const std::string& key, const std::string& help) {
        auto slot = std::make_shared<std::int64_t>(0);
        cmd_->add_option(flag, *slot, help)->each([this, key, slot](const std::string&) {
            json_[key] = *slot;
        });
    }
    void add_real(const std::string& flag, const std::string& key, const std::string& help) {
        auto slot = std::make_shared<double>(0.0);
        cmd_->add_option(flag, *slot, help)->each([this, key, slot](const std::string&) {
            json_[key] = *slot;
        });
    }
    void add_string(const std::string& flag, const std::string& key, const std::string& help) {
        auto slot = std::make_shared<std::string>();
        cmd_->add_option(flag, *slot, help)->each([this, key, slot](const std::string&) {
            json_[key] = *slot;
        });
    }
    void add_string_list(const std::string& flag, const std::string& key,
                         const std::string& help) {
        auto slot = std::make_shared<std::vector<std::string>>();
        cmd_->add_option(flag, *slot, help)->each([this, key, slot](const std::string&) {
            json_[key] = *slot;
        });
    }
    void add_flag(const std::string& flag, const std::string& key, const std::string& help) {
        cmd_->add_flag_callback(flag, [this, key]() { json_[key] = true; }, help);
    }

    json take() const { return json_; }

private:
    CLI::App* cmd_;
    json json_ = json::object();
};

std::string load_config(const std::string& config_path, const json& overrides,
                        const std::string& schema) {
    StringOut canonical;
    const std::string ov = overrides.dump();
    check(tfx_config_load(config_path.empty() ? nullptr : config_path.c_str(), ov.c_str(),
                          schema.c_str(), &canonical.value));
    return canonical.str();
}

void add_learner_flags(Overrides& ov) {
    ov.add_int("--min-df", "min_df", "drop tokens in fewer than this many documents");
    ov.add_flag("--binary-counts", "binary_counts", "presence indicators instead of counts");
    ov.add_int("--k-folds", "k_folds", "cross-fitting folds");
    ov.add_int("--n-trees", "n_trees", "trees per forest");
    ov.add_int("--max-depth", "max_depth", "tree depth cap (0 = unbounded)");
    ov.add_real("--bound-lo", "propensity_bound_lo", "lower propensity bound");
    ov.add_real("--bound-hi", "propensity_bound_hi", "upper propensity bound");
    ov.add_string("--bound-mode", "propensity_bound_mode", "winsorize, trim, or none");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"texteffect: paired write/edit causal estimation, semi-synthetic confounded "
                 "benchmarks, and a covariate-adjustment estimator zoo"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may appear after the subcommand
    app.set_version_flag("--version", std::string(tfx_version()));

    std::string out_dir = default_out_dir();
    app.add_option("--out,-o", out_dir, "output directory (env TEXTEFFECT_OUT_DIR)")
        ->capture_default_str();
    int jobs = 0;
    app.add_option("--jobs,-j", jobs, "parallel replica workers (0 = hardware)");
    bool no_resume = false;
    app.add_flag("--no-resume", no_resume, "recompute replicas even when outputs exist");

    // ingest ------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "parse and validate a corpus");
    CorpusArgs ingest_corpus;
    ingest_corpus.attach(ingest);

    // audit -------------------------------------------------------------
    auto* audit = app.add_subcommand("audit", "remove edits that moved against instruction");
    CorpusArgs audit_corpus;
    audit_corpus.attach(audit);
    std::string audit_config;
    audit->add_option("--config,-c", audit_config, "config file (.json/.toml)");
    Overrides audit_ov(audit);
    audit_ov.add_real("--min-gap", "min_gap", "required ih movement in the instructed direction");

    // counts ------------------------------------------------------------
    auto* counts = app.add_subcommand("counts", "evaluation counts by topic/treatment/original");
    CorpusArgs counts_corpus;
    counts_corpus.attach(counts);
    std::string counts_config;
    counts->add_option("--config,-c", counts_config, "config file (.json/.toml)");
    Overrides counts_ov(counts);
    counts_ov.add_real("--min-gap", "min_gap", "audit margin used for the final columns");

    // dgp ---------------------------------------------------------------
    auto* dgp = app.add_subcommand("dgp", "sample a synthetic corpus with known effects");
    std::string dgp_config;
    dgp->add_option("--config,-c", dgp_config, "config file (.json/.toml)");
    Overrides dgp_ov(dgp);
    dgp_ov.add_int("--n-pairs", "n_pairs", "number of original texts");
    dgp_ov.add_real("--p-treat", "p_treat", "P(document label = 1)");
    dgp_ov.add_real("--tau", "tau", "structural treatment effect");
    dgp_ov.add_real("--beta", "beta", "latent-feature outcome coefficient");
    dgp_ov.add_real("--z-shift", "z_shift", "latent-feature shift between label arms");
    dgp_ov.add_real("--alpha", "alpha", "outcome intercept");
    dgp_ov.add_real("--noise-sd", "noise_sd", "outcome noise sd");
    dgp_ov.add_real("--z-jitter", "z_jitter", "width of the latent-feature jitter");
    dgp_ov.add_int("--min-edits", "min_edits", "minimum edits per original");
    dgp_ov.add_int("--max-edits", "max_edits", "maximum edits per original");
    dgp_ov.add_int("--tokens-per-doc", "tokens_per_doc", "document length in tokens");
    dgp_ov.add_string("--outcome-label", "outcome_label", "outcome label for evaluations");
    dgp_ov.add_int("--seed", "seed", "master seed (required)");

    // simulate ------------------------------------------------------------
    auto* simulate = app.add_subcommand("simulate", "semi-synthetic confounded replicas");
    CorpusArgs sim_corpus;
    sim_corpus.attach(simulate);
    std::string sim_config;
    simulate->add_option("--config,-c", sim_config, "config file (.json/.toml)");
    Overrides sim_ov(simulate);
    sim_ov.add_string("--mode", "mode", "baseline or amplified");
    sim_ov.add_real("--selection-strength", "selection_strength", "selection strength kappa");
    sim_ov.add_real("--selection-floor", "selection_floor", "selection probability floor");
    sim_ov.add_int("--outcome-shift", "outcome_shift", "Likert shift for respectful texts");
    sim_ov.add_real("--effect-delta", "effect_delta", "injected treatment effect");
    sim_ov.add_int("--dichotomize-threshold", "dichotomize_threshold", "binary cut point");
    sim_ov.add_int("--n-replicas", "n_replicas", "number of replicas");
    sim_ov.add_int("--seed", "seed", "master seed (required)");

    // estimate ------------------------------------------------------------
    auto* estimate = app.add_subcommand("estimate", "run estimators on a corpus");
    CorpusArgs est_corpus;
    est_corpus.attach(estimate);
    std::string est_config;
    estimate->add_option("--config,-c", est_config, "config file (.json/.toml)");
    Overrides est_ov(estimate);
    est_ov.add_string_list("--estimator", "estimators",
                           "tau_t, tau_t_wls, tau_d, diff_in_means, topic_adjusted, bow_or, "
                           "bow_ipw, bow_aipw, leakage_probe");
    est_ov.add_string_list("--outcome", "outcomes", "outcome labels (default: all present)");
    est_ov.add_string("--inference", "inference", "none, permutation, exact, or clustered");
    est_ov.add_int("--n-perm", "n_permutations", "permutation draws");
    est_ov.add_flag("--by-topic", "by_topic", "also run the paired estimators per topic");
    add_learner_flags(est_ov);
    est_ov.add_int("--seed", "seed", "master seed (required)");

    // benchmark -----------------------------------------------------------
    auto* benchmark = app.add_subcommand("benchmark",
                                         "replicas + estimator zoo + coverage report");
    CorpusArgs bench_corpus;
    bench_corpus.attach(benchmark, /*required=*/false);
    std::string bench_config;
    benchmark->add_option("--config,-c", bench_config, "config file (.json/.toml)");
    Overrides bench_ov(benchmark);
    bench_ov.add_string_list("--estimator", "estimators", "zoo estimators to run");
    bench_ov.add_string_list("--outcome", "outcomes", "outcome labels (default: all present)");
    add_learner_flags(bench_ov);
    bench_ov.add_int("--seed", "seed", "master seed (required)");

    // report --------------------------------------------------------------
    auto* report = app.add_subcommand("report", "rebuild report files from a benchmark dir");
    std::string report_dir;
    report->add_option("--dir", report_dir, "benchmark output directory")->required();

    CLI11_PARSE(app, argc, argv);

    const bool resume = !no_resume;

    if (ingest->parsed()) {
        CorpusHandle corpus{ingest_corpus.open(/*numeric_default=*/false)};
        StringOut summary;
        check(tfx_corpus_stats(corpus.handle, &summary.value));
        const json s = json::parse(summary.str());
        std::printf("ingest ok: %lld texts in %lld pairs, %lld evaluations, %lld ratings\n",
                    s["n_texts"].get<long long>(), s["n_pairs"].get<long long>(),
                    s["n_evaluations"].get<long long>(), s["n_ratings"].get<long long>());
        return 0;
    }

    if (audit->parsed()) {
        const std::string cfg = load_config(audit_config, audit_ov.take(), "audit");
        CorpusHandle corpus{audit_corpus.open(false)};
        StringOut summary;
        check(tfx_run_audit(corpus.handle, cfg.c_str(), out_dir.c_str(), &summary.value));
        const json s = json::parse(summary.str());
        std::printf("audit ok: removed %.2f%% of edits, %.2f%% of originals; %lld texts and "
                    "%lld evaluations remain -> %s\n",
                    100.0 * s["edits_removed_frac"].get<double>(),
                    100.0 * s["originals_removed_frac"].get<double>(),
                    s["n_texts_after"].get<long long>(),
                    s["n_evaluations_after"].get<long long>(), out_dir.c_str());
        return 0;
    }

    if (counts->parsed()) {
        const std::string cfg = load_config(counts_config, counts_ov.take(), "counts");
        CorpusHandle corpus{counts_corpus.open(false)};
        StringOut summary;
        check(tfx_run_counts(corpus.handle, cfg.c_str(), out_dir.c_str(), &summary.value));
        const json s = json::parse(summary.str());
        std::printf("counts ok: %lld cells, %lld raw / %lld final evaluations -> %s\n",
                    s["n_cells"].get<long long>(), s["n_evaluations_raw"].get<long long>(),
                    s["n_evaluations_final"].get<long long>(), out_dir.c_str());
        return 0;
    }

    if (dgp->parsed()) {
        const std::string cfg = load_config(dgp_config, dgp_ov.take(), "dgp");
        StringOut summary;
        check(tfx_run_dgp(cfg.c_str(), out_dir.c_str(), &summary.value));
        const json s = json::parse(summary.str());
        std::printf("dgp ok: %lld texts from %lld pairs, tau_t=%g tau_d=%g -> %s\n",
                    s["n_texts"].get<long long>(), s["n_pairs"].get<long long>(),
                    s["tau_t"].get<double>(), s["tau_d"].get<double>(), out_dir.c_str());
        return 0;
    }

    if (simulate->parsed()) {
        const std::string cfg = load_config(sim_config, sim_ov.take(), "simulate");
        CorpusHandle corpus{sim_corpus.open(/*numeric_default=*/true)};
        StringOut summary;
        check(tfx_run_simulate(corpus.handle, cfg.c_str(), out_dir.c_str(), jobs, resume ? 1 : 0,
                               &summary.value));
        const json s = json::parse(summary.str());
        std::printf("simulate ok: %lld replicas over %zu outcomes -> %s\n",
                    s["n_replicas"].get<long long>(), s["outcomes"].size(), out_dir.c_str());
        return 0;
    }

    if (estimate->parsed()) {
        const std::string cfg = load_config(est_config, est_ov.take(), "estimate");
        CorpusHandle corpus{est_corpus.open(/*numeric_default=*/true)};
        StringOut summary;
        check(tfx_run_estimate(corpus.handle, cfg.c_str(), out_dir.c_str(), &summary.value));
        const json s = json::parse(summary.str());
        std::string first;
        if (!s["estimates"].empty()) {
            const auto& e = s["estimates"][0];
            first = " (" + e["estimator"].get<std::string>() + "/" +
                    e["outcome"].get<std::string>() + " = " +
                    std::to_string(e["point"].get<double>()) + ")";
        }
        std::printf("estimate ok: %lld estimates%s -> %s\n",
                    s["n_estimates"].get<long long>(), first.c_str(), out_dir.c_str());
        return 0;
    }

    if (benchmark->parsed()) {
        const std::string cfg = load_config(bench_config, bench_ov.take(), "benchmark");
        CorpusHandle corpus;
        if (bench_corpus.given()) corpus.handle = bench_corpus.open(/*numeric_default=*/true);
        StringOut summary;
        check(tfx_run_benchmark(corpus.handle, cfg.c_str(), out_dir.c_str(), jobs,
                                resume ? 1 : 0, &summary.value));
        const json s = json::parse(summary.str());
        std::printf("benchmark ok: %lld replicas, %zu estimator/outcome cells -> %s\n",
                    s["n_replicas"].get<long long>(), s["coverage"].size(), out_dir.c_str());
        return 0;
    }

    if (report->parsed()) {
        StringOut summary;
        check(tfx_run_report(report_dir.c_str(), &summary.value));
        const json s = json::parse(summary.str());
        std::printf("report ok: %zu estimator/outcome cells -> %s\n", s["coverage"].size(),
                    report_dir.c_str());
        return 0;
    }

    return 0;
}
