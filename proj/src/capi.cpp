#include "texteffect/texteffect.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "json.hpp"
#include "texteffect/config.hpp"
#include "texteffect/corpus.hpp"
#include "texteffect/error.hpp"
#include "texteffect/pipeline.hpp"

struct tfx_corpus {
    tfx::Corpus corpus;
};

namespace {

thread_local std::string g_last_error;

tfx_status status_from(tfx::errc code) { return static_cast<tfx_status>(static_cast<int>(code)); }

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_out(char** out, const std::string& value) {
    if (out) *out = dup_string(value);
}

template <typename F>
tfx_status guarded(F&& fn) {
    try {
        fn();
        return TFX_OK;
    } catch (const tfx::Error& e) {
        g_last_error = e.what();
        return status_from(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return TFX_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return TFX_ERR_INTERNAL;
    }
}

nlohmann::json parse_config(const char* config_json) {
    if (!config_json) tfx::fail(tfx::errc::config_error, "config_json must not be NULL");
    try {
        return nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
        tfx::fail(tfx::errc::config_error, std::string("config_json: ") + e.what());
    }
}

const char* require(const char* s, const char* name) {
    if (!s) tfx::fail(tfx::errc::config_error, std::string(name) + " must not be NULL");
    return s;
}

}  // namespace

extern "C" {

const char* tfx_version(void) { return "0.1.0"; }

const char* tfx_last_error(void) { return g_last_error.c_str(); }

void tfx_string_free(char* s) { std::free(s); }

tfx_status tfx_corpus_open(const char* units_csv, const char* evaluations_csv,
                           const char* ratings_csv, int numeric_values, tfx_corpus** out) {
    return guarded([&] {
        require(units_csv, "units_csv");
        require(evaluations_csv, "evaluations_csv");
        require(ratings_csv, "ratings_csv");
        if (!out) tfx::fail(tfx::errc::config_error, "out must not be NULL");
        const tfx::ValueMode mode =
            numeric_values ? tfx::ValueMode::numeric : tfx::ValueMode::likert;
        auto handle = std::make_unique<tfx_corpus>();
        handle->corpus =
            tfx::parse_corpus({units_csv, evaluations_csv, ratings_csv}, mode);
        *out = handle.release();
    });
}

void tfx_corpus_close(tfx_corpus* corpus) { delete corpus; }

tfx_status tfx_corpus_stats(const tfx_corpus* corpus, char** summary_json_out) {
    return guarded([&] {
        if (!corpus) tfx::fail(tfx::errc::config_error, "corpus must not be NULL");
        set_out(summary_json_out, tfx::run_ingest(corpus->corpus).dump());
    });
}

tfx_status tfx_config_load(const char* file_path, const char* overrides_json, const char* schema,
                           char** canonical_json_out) {
    return guarded([&] {
        require(schema, "schema");
        nlohmann::json file_config = nlohmann::json::object();
        if (file_path) file_config = tfx::load_config_file(file_path);
        nlohmann::json overrides = nlohmann::json::object();
        if (overrides_json) overrides = parse_config(overrides_json);
        const auto resolved = tfx::resolve_config(file_config, overrides, schema);
        set_out(canonical_json_out, resolved.dump());
    });
}

tfx_status tfx_run_audit(const tfx_corpus* corpus, const char* config_json, const char* out_dir,
                         char** summary_json_out) {
    return guarded([&] {
        if (!corpus) tfx::fail(tfx::errc::config_error, "corpus must not be NULL");
        const auto cfg = tfx::validate_config(parse_config(config_json), "audit");
        const auto summary = tfx::run_audit(corpus->corpus, cfg, require(out_dir, "out_dir"));
        set_out(summary_json_out, summary.dump());
    });
}

tfx_status tfx_run_counts(const tfx_corpus* corpus, const char* config_json, const char* out_dir,
                          char** summary_json_out) {
    return guarded([&] {
        if (!corpus) tfx::fail(tfx::errc::config_error, "corpus must not be NULL");
        const auto cfg = tfx::validate_config(parse_config(config_json), "counts");
        const auto summary = tfx::run_counts(corpus->corpus, cfg, require(out_dir, "out_dir"));
        set_out(summary_json_out, summary.dump());
    });
}

tfx_status tfx_run_dgp(const char* config_json, const char* out_dir, char** summary_json_out) {
    return guarded([&] {
        const auto cfg = tfx::validate_config(parse_config(config_json), "dgp");
        const auto summary = tfx::run_dgp(cfg, require(out_dir, "out_dir"));
        set_out(summary_json_out, summary.dump());
    });
}

tfx_status tfx_run_estimate(const tfx_corpus* corpus, const char* config_json,
                            const char* out_dir, char** summary_json_out) {
    return guarded([&] {
        if (!corpus) tfx::fail(tfx::errc::config_error, "corpus must not be NULL");
        const auto cfg = tfx::validate_config(parse_config(config_json), "estimate");
        const auto summary =
            tfx::run_estimate_files(corpus->corpus, cfg, require(out_dir, "out_dir"));
        set_out(summary_json_out, summary.dump());
    });
}

tfx_status tfx_run_simulate(const tfx_corpus* corpus, const char* config_json,
                            const char* out_dir, int jobs, int resume,
                            char** summary_json_out) {
    return guarded([&] {
        if (!corpus) tfx::fail(tfx::errc::config_error, "corpus must not be NULL");
        const auto cfg = tfx::validate_config(parse_config(config_json), "simulate");
        const auto summary = tfx::run_simulate(corpus->corpus, cfg, require(out_dir, "out_dir"),
                                               jobs, resume != 0);
        set_out(summary_json_out, summary.dump());
    });
}

tfx_status tfx_run_benchmark(const tfx_corpus* corpus, const char* config_json,
                             const char* out_dir, int jobs, int resume,
                             char** summary_json_out) {
    return guarded([&] {
        const auto cfg = tfx::validate_config(parse_config(config_json), "benchmark");
        const auto summary = tfx::run_benchmark(corpus ? &corpus->corpus : nullptr, cfg,
                                                require(out_dir, "out_dir"), jobs, resume != 0);
        set_out(summary_json_out, summary.dump());
    });
}

tfx_status tfx_run_report(const char* benchmark_dir, char** summary_json_out) {
    return guarded([&] {
        const auto summary = tfx::run_report(require(benchmark_dir, "benchmark_dir"));
        set_out(summary_json_out, summary.dump());
    });
}

}  // extern "C"
