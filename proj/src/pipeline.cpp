#include "texteffect/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "texteffect/config.hpp"
#include "texteffect/csv.hpp"
#include "texteffect/design.hpp"
#include "texteffect/error.hpp"
#include "texteffect/estimators.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(errc::io_error, "cannot write " + tmp.string());
        out << content;
        if (!out) fail(errc::io_error, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(errc::io_error, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
    json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = config_hash_hex(config);
    if (config.contains("seed")) manifest["seed"] = config["seed"];
    manifest["outputs"] = outputs;
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(errc::io_error, "cannot create directory " + dir.string());
}

}  // namespace

json estimate_to_json(const EffectEstimate& est) {
    json j;
    j["estimator"] = est.estimator_name;
    j["outcome"] = est.outcome;
    j["point"] = est.point;
    j["std_error"] = est.std_error ? json(*est.std_error) : json(nullptr);
    j["p_value"] = est.p_value ? json(*est.p_value) : json(nullptr);
    j["n_texts"] = est.n_texts;
    j["n_evals"] = est.n_evals;
    j["metadata"] = est.metadata;
    return j;
}

std::string estimates_to_jsonl(const std::vector<EffectEstimate>& estimates) {
    std::string out;
    for (const auto& est : estimates) {
        out += estimate_to_json(est).dump();
        out += '\n';
    }
    return out;
}

std::string estimates_summary_csv(const std::vector<EffectEstimate>& estimates) {
    std::string out = "estimator,outcome,topic,point,std_error,p_value,n_texts,n_evals\n";
    for (const auto& est : estimates) {
        const auto topic_it = est.metadata.find("topic");
        out += est.estimator_name;
        out += ',';
        out += est.outcome;
        out += ',';
        out += topic_it == est.metadata.end() ? "" : topic_it->second;
        out += ',';
        out += fmt(est.point);
        out += ',';
        out += est.std_error ? fmt(*est.std_error) : "";
        out += ',';
        out += est.p_value ? fmt(*est.p_value) : "";
        out += ',';
        out += std::to_string(est.n_texts);
        out += ',';
        out += std::to_string(est.n_evals);
        out += '\n';
    }
    return out;
}

SimConfig sim_config_from_json(const json& cfg, std::optional<std::uint64_t> seed_override) {
    SimConfig sim;
    const std::string mode = cfg.value("mode", "baseline");
    if (mode == "baseline") sim.mode = SimMode::baseline;
    else if (mode == "amplified") sim.mode = SimMode::amplified;
    else fail(errc::config_error, "sim mode must be 'baseline' or 'amplified', got '" + mode + "'");
    sim.selection_strength = cfg.value("selection_strength", 0.8);
    sim.selection_floor = cfg.value("selection_floor", 0.05);
    sim.outcome_shift = cfg.value("outcome_shift", 1);
    sim.effect_delta = cfg.value("effect_delta", 0.6);
    sim.dichotomize_threshold = cfg.value("dichotomize_threshold", 4);
    sim.n_replicas = cfg.value("n_replicas", 100);
    sim.seed = seed_override ? *seed_override : cfg.value("seed", std::uint64_t{0});
    validate_sim_config(sim);
    return sim;
}

DgpParams dgp_params_from_json(const json& cfg, std::optional<std::uint64_t> seed_override) {
    DgpParams p;
    p.n_pairs = cfg.value("n_pairs", 200);
    p.p_treat = cfg.value("p_treat", 0.5);
    p.z_shift = cfg.value("z_shift", 0.3);
    p.tau = cfg.value("tau", 0.5);
    p.beta = cfg.value("beta", 1.0);
    p.alpha = cfg.value("alpha", 2.4);
    p.noise_sd = cfg.value("noise_sd", 0.5);
    p.z_jitter = cfg.value("z_jitter", 1.0);
    p.z_resolution = cfg.value("z_resolution", 0.02);
    p.min_edits = cfg.value("min_edits", 1);
    p.max_edits = cfg.value("max_edits", 1);
    p.tokens_per_doc = cfg.value("tokens_per_doc", 90);
    p.marker_count = cfg.value("marker_count", 3);
    p.outcome_label = cfg.value("outcome_label", "informative");
    p.seed = seed_override ? *seed_override : cfg.value("seed", std::uint64_t{0});
    return p;
}

json run_ingest(const Corpus& corpus) {
    std::set<std::string> pairs;
    long originals = 0;
    for (const TextUnit& u : corpus.units) {
        pairs.insert(u.pair_id);
        if (u.is_original()) ++originals;
    }
    json j;
    j["n_texts"] = corpus.units.size();
    j["n_pairs"] = pairs.size();
    j["n_originals"] = originals;
    j["n_evaluations"] = corpus.evaluations.size();
    j["n_ratings"] = corpus.latent_ratings.size();
    return j;
}

json run_audit(const Corpus& corpus, const json& cfg, const fs::path& out_dir) {
    const double min_gap = cfg.value("min_gap", 0.0);
    const AuditOutcome audited = audit_edits(corpus, min_gap);
    ensure_dir(out_dir);

    CorpusPaths paths{out_dir / "units.csv", out_dir / "evaluations.csv",
                      out_dir / "ratings.csv"};
    write_corpus(audited.corpus, paths);
    atomic_write(out_dir / "audit_report.json", audited.report.to_json() + "\n");
    write_manifest(out_dir, "audit", cfg,
                   {"units.csv", "evaluations.csv", "ratings.csv", "audit_report.json"});

    json j;
    j["edits_removed_frac"] = audited.report.edits_removed_frac;
    j["originals_removed_frac"] = audited.report.originals_removed_frac;
    j["n_removed"] = audited.report.removed_text_ids.size();
    j["n_flagged"] = audited.report.flagged_text_ids.size();
    j["n_texts_after"] = audited.corpus.units.size();
    j["n_evaluations_after"] = audited.corpus.evaluations.size();
    return j;
}

json run_counts(const Corpus& corpus, const json& cfg, const fs::path& out_dir) {
    const double min_gap = cfg.value("min_gap", 0.0);
    const CountTable raw = summarize_counts(corpus);
    const AuditOutcome audited = audit_edits(corpus, min_gap);
    const CountTable final_counts = summarize_counts(audited.corpus);

    std::set<CountKey> keys;
    for (const auto& [k, v] : raw) keys.insert(k);
    for (const auto& [k, v] : final_counts) keys.insert(k);

    std::string csv = "topic,ih,original,n_evaluations_raw,n_evaluations_final\n";
    json rows = json::array();
    for (const CountKey& k : keys) {
        const long r = raw.count(k) ? raw.at(k) : 0;
        const long f = final_counts.count(k) ? final_counts.at(k) : 0;
        const std::string ih = k.treatment ? "yes" : "no";
        const std::string orig = k.original ? "yes" : "no";
        csv += k.topic + "," + ih + "," + orig + "," + std::to_string(r) + "," +
               std::to_string(f) + "\n";
        rows.push_back({{"topic", k.topic},
                        {"ih", ih},
                        {"original", orig},
                        {"n_evaluations_raw", r},
                        {"n_evaluations_final", f}});
    }
    ensure_dir(out_dir);
    atomic_write(out_dir / "counts.csv", csv);
    atomic_write(out_dir / "counts.json", json(rows).dump(2) + "\n");
    write_manifest(out_dir, "counts", cfg, {"counts.csv", "counts.json"});

    json j;
    j["n_cells"] = keys.size();
    j["n_evaluations_raw"] = corpus.evaluations.size();
    j["n_evaluations_final"] = audited.corpus.evaluations.size();
    return j;
}

json run_dgp(const json& cfg, const fs::path& out_dir) {
    const DgpParams params = dgp_params_from_json(cfg);
    const DgpDataset ds = sample_dataset(params);
    ensure_dir(out_dir);
    CorpusPaths paths{out_dir / "units.csv", out_dir / "evaluations.csv",
                      out_dir / "ratings.csv"};
    write_corpus(ds.corpus, paths);
    json truth;
    truth["tau_t"] = ds.truth.tau_t;
    truth["tau_d"] = ds.truth.tau_d;
    atomic_write(out_dir / "truth.json", truth.dump(2) + "\n");
    write_manifest(out_dir, "dgp", cfg,
                   {"units.csv", "evaluations.csv", "ratings.csv", "truth.json"});

    json j;
    j["n_texts"] = ds.corpus.units.size();
    j["n_pairs"] = params.n_pairs;
    j["tau_t"] = ds.truth.tau_t;
    j["tau_d"] = ds.truth.tau_d;
    return j;
}

namespace {

std::vector<std::string> outcomes_for(const Corpus& corpus, const json& cfg) {
    std::set<std::string> present;
    for (const Evaluation& e : corpus.evaluations) present.insert(e.outcome);
    std::vector<std::string> requested;
    if (cfg.contains("outcomes")) requested = cfg["outcomes"].get<std::vector<std::string>>();
    if (requested.empty()) return {present.begin(), present.end()};
    for (const auto& o : requested)
        if (!present.count(o))
            fail(errc::config_error, "requested outcome '" + o + "' not present in corpus");
    std::sort(requested.begin(), requested.end());
    return requested;
}

ZooOptions zoo_options_from_json(const json& cfg, std::uint64_t seed) {
    ZooOptions z;
    if (cfg.contains("estimators"))
        z.estimators = cfg["estimators"].get<std::vector<std::string>>();
    z.min_df = cfg.value("min_df", 5);
    z.binary_counts = cfg.value("binary_counts", false);
    z.k_folds = cfg.value("k_folds", 5);
    z.n_trees = cfg.value("n_trees", 100);
    z.max_depth = cfg.value("max_depth", 0);
    z.bound_lo = cfg.value("propensity_bound_lo", 0.1);
    z.bound_hi = cfg.value("propensity_bound_hi", 0.9);
    z.bound_mode = cfg.value("propensity_bound_mode", "winsorize");
    if (z.bound_mode != "winsorize" && z.bound_mode != "trim" && z.bound_mode != "none")
        fail(errc::config_error, "propensity_bound_mode must be winsorize, trim, or none");
    z.seed = seed;
    return z;
}

const std::set<std::string> kDesignEstimators = {"tau_t", "tau_t_wls", "tau_d"};
const std::set<std::string> kZooEstimators = {"diff_in_means", "topic_adjusted", "bow_or",
                                              "bow_ipw", "bow_aipw", "leakage_probe"};

std::vector<ViewRow> corpus_view(const Corpus& corpus) {
    std::map<std::string, std::map<std::string, std::pair<double, long>>> acc;
    for (const Evaluation& e : corpus.evaluations) {
        auto& slot = acc[e.text_id][e.outcome];
        slot.first += e.value;
        slot.second += 1;
    }
    std::vector<ViewRow> view;
    view.reserve(corpus.units.size());
    for (const TextUnit& u : corpus.units) {
        ViewRow row;
        row.text_id = u.text_id;
        row.treatment = u.treatment;
        row.topic = u.topic;
        row.body = u.body;
        const auto it = acc.find(u.text_id);
        if (it != acc.end())
            for (const auto& [o, sn] : it->second)
                row.outcomes[o] = sn.first / static_cast<double>(sn.second);
        view.push_back(std::move(row));
    }
    return view;
}

void apply_inference(EffectEstimate& est, const std::vector<DesignGroup>& groups,
                     const std::string& inference, long n_perm, std::uint64_t seed) {
    if (inference == "none") return;
    if (inference == "permutation") {
        est.p_value = permutation_pvalue(groups, n_perm, seed);
        est.metadata["inference"] = "permutation";
        est.metadata["n_permutations"] = std::to_string(n_perm);
    } else if (inference == "exact") {
        est.p_value = permutation_pvalue_exact(groups);
        est.metadata["inference"] = "exact_permutation";
        est.metadata["n_arrangements"] = std::to_string(permutation_arrangements(groups));
    } else if (inference == "clustered") {
        const ClusteredWls wls = wls_evaluation_clustered(groups);
        est.std_error = wls.std_error;
        est.p_value = wls.p_value;
        est.metadata["inference"] = "clustered_wls";
        est.metadata["n_clusters"] = std::to_string(wls.n_clusters);
    } else {
        fail(errc::config_error, "inference must be none, permutation, exact, or clustered");
    }
}

}  // namespace

std::vector<EstimateRecord> run_zoo(const std::vector<ViewRow>& view,
                                    const std::vector<std::string>& outcomes,
                                    const ZooOptions& opts, int replica_index) {
    if (view.empty()) fail(errc::empty_input, "run_zoo: empty view");
    for (const auto& name : opts.estimators)
        if (!kZooEstimators.count(name))
            fail(errc::config_error, "unknown zoo estimator '" + name + "'");

    std::vector<std::string> texts, ids, topics;
    std::vector<int> treatment;
    texts.reserve(view.size());
    for (const ViewRow& r : view) {
        texts.push_back(r.body);
        ids.push_back(r.text_id);
        topics.push_back(r.topic);
        treatment.push_back(r.treatment);
    }

    const bool need_features =
        std::any_of(opts.estimators.begin(), opts.estimators.end(), [](const std::string& s) {
            return s == "bow_or" || s == "bow_ipw" || s == "bow_aipw" || s == "leakage_probe";
        });
    const bool need_e = std::any_of(opts.estimators.begin(), opts.estimators.end(),
                                    [](const std::string& s) {
                                        return s == "bow_ipw" || s == "bow_aipw";
                                    });
    const bool need_q = std::any_of(opts.estimators.begin(), opts.estimators.end(),
                                    [](const std::string& s) {
                                        return s == "bow_or" || s == "bow_aipw";
                                    });

    NuisanceOptions nopts;
    nopts.k_folds = opts.k_folds;
    nopts.n_trees = opts.n_trees;
    nopts.max_depth = opts.max_depth;

    const Rng master(opts.seed);

    DocTermMatrix dtm;
    std::vector<float> dense;
    std::vector<int> folds;
    std::vector<double> e_full;
    if (need_features) {
        dtm = bow_vectorize(texts, ids, opts.min_df, opts.binary_counts);
        dense = dtm.dense();
        const FeatureView X{dense.data(), dtm.n_docs(), dtm.n_terms()};
        folds = make_stratified_folds(dtm.doc_ids, treatment, opts.k_folds,
                                      master.child_str("folds").base_seed());
        if (need_e) {
            // One propensity fit per replica: it depends on text and treatment
            // only, so every outcome shares it.
            NuisanceOptions eopts = nopts;
            eopts.seed = master.child_str("e").base_seed();
            e_full = crossfit_propensity(X, dtm.doc_ids, treatment, folds, opts.k_folds, eopts);
        }
    }

    std::vector<EstimateRecord> records;
    for (const std::string& outcome : outcomes) {
        std::vector<int> rows;
        for (std::size_t i = 0; i < view.size(); ++i)
            if (view[i].outcomes.count(outcome)) rows.push_back(static_cast<int>(i));
        if (rows.empty()) continue;

        std::vector<int> t_o;
        std::vector<double> y_o;
        std::vector<std::string> topic_o;
        t_o.reserve(rows.size());
        for (int i : rows) {
            t_o.push_back(treatment[i]);
            y_o.push_back(view[i].outcomes.at(outcome));
            topic_o.push_back(topics[i]);
        }

        const bool full = rows.size() == view.size();
        std::optional<PropensityBins> e_bins;
        NuisanceFits fits;
        if (need_features && (need_e || need_q)) {
            if (need_e) {
                fits.e.reserve(rows.size());
                for (int i : rows) fits.e.push_back(e_full[i]);
                e_bins = propensity_bins(fits.e, opts.bound_lo, opts.bound_hi);
            }
            if (need_q) {
                NuisanceOptions qopts = nopts;
                qopts.seed = master.child_str("q").child(hash_str(outcome)).base_seed();
                if (full) {
                    const FeatureView X{dense.data(), dtm.n_docs(), dtm.n_terms()};
                    crossfit_outcomes(X, dtm.doc_ids, treatment, y_o, folds, opts.k_folds, qopts,
                                      fits.q1, fits.q0);
                } else {
                    const DocTermMatrix sub = select_rows(dtm, rows);
                    const auto sub_dense = sub.dense();
                    const FeatureView X{sub_dense.data(), sub.n_docs(), sub.n_terms()};
                    const auto sub_folds =
                        make_stratified_folds(sub.doc_ids, t_o, opts.k_folds,
                                              master.child_str("folds")
                                                  .child(hash_str(outcome))
                                                  .base_seed());
                    crossfit_outcomes(X, sub.doc_ids, t_o, y_o, sub_folds, opts.k_folds, qopts,
                                      fits.q1, fits.q0);
                }
            }
        }

        auto bounded_fits = [&](bool need_outcome_models) -> std::pair<NuisanceFits,
                                                                       std::vector<int>> {
            NuisanceFits in;
            in.e = fits.e;
            if (need_outcome_models) {
                in.q1 = fits.q1;
                in.q0 = fits.q0;
            }
            if (opts.bound_mode == "none") {
                std::vector<int> kept(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) kept[i] = static_cast<int>(i);
                return {std::move(in), std::move(kept)};
            }
            const BoundMode mode =
                opts.bound_mode == "trim" ? BoundMode::trim : BoundMode::winsorize;
            BoundedFits b = bound_propensities(in, opts.bound_lo, opts.bound_hi, mode);
            return {std::move(b.fits), std::move(b.kept_rows)};
        };

        for (const std::string& name : opts.estimators) {
            EstimateRecord rec;
            rec.replica = replica_index;
            rec.outcome = outcome;
            rec.estimator = name;
            if (name == "diff_in_means") {
                rec.point = diff_in_means(t_o, y_o).point;
            } else if (name == "topic_adjusted") {
                rec.point = topic_adjusted(t_o, y_o, topic_o).point;
            } else if (name == "bow_or") {
                rec.point = or_estimate(fits, t_o, y_o).point;
            } else if (name == "bow_ipw") {
                auto [bf, kept] = bounded_fits(false);
                std::vector<int> t_k;
                std::vector<double> y_k;
                for (int i : kept) {
                    t_k.push_back(t_o[i]);
                    y_k.push_back(y_o[i]);
                }
                rec.point = ipw_estimate(bf, t_k, y_k).point;
                rec.bins = e_bins;
            } else if (name == "bow_aipw") {
                auto [bf, kept] = bounded_fits(true);
                std::vector<int> t_k;
                std::vector<double> y_k;
                for (int i : kept) {
                    t_k.push_back(t_o[i]);
                    y_k.push_back(y_o[i]);
                }
                rec.point = aipw_estimate(bf, t_k, y_k).point;
                rec.bins = e_bins;
            } else if (name == "leakage_probe") {
                ProbeOptions popts;
                popts.nuisance = nopts;
                popts.nuisance.seed =
                    master.child_str("probe").child(hash_str(outcome)).base_seed();
                popts.bound_lo = opts.bound_lo;
                popts.bound_hi = opts.bound_hi;
                popts.bound_mode =
                    opts.bound_mode == "trim" ? BoundMode::trim : BoundMode::winsorize;
                const DocTermMatrix sub = full ? dtm : select_rows(dtm, rows);
                const ProbeResult probe = leakage_probe(sub, t_o, y_o, popts);
                rec.point = probe.estimate.point;
                rec.bins = probe.bins;
            }
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<EffectEstimate> run_estimate(const Corpus& corpus, const json& cfg) {
    const auto outcomes = outcomes_for(corpus, cfg);
    std::vector<std::string> estimators = {"tau_t"};
    if (cfg.contains("estimators"))
        estimators = cfg["estimators"].get<std::vector<std::string>>();
    const std::string inference = cfg.value("inference", "none");
    const long n_perm = cfg.value("n_permutations", 1000);
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    const bool by_topic = cfg.value("by_topic", false);

    std::vector<std::string> zoo_names;
    for (const auto& name : estimators) {
        if (kZooEstimators.count(name)) zoo_names.push_back(name);
        else if (!kDesignEstimators.count(name))
            fail(errc::config_error, "unknown estimator '" + name + "'");
    }

    const Rng master(seed);
    std::vector<EffectEstimate> results;

    for (const std::string& outcome : outcomes) {
        std::vector<DesignGroup> groups;
        bool groups_built = false;
        auto ensure_groups = [&]() {
            if (!groups_built) {
                groups = build_groups(corpus, outcome);
                groups_built = true;
            }
            if (groups.empty())
                fail(errc::empty_input,
                     "no complete pairs with evaluations for outcome '" + outcome + "'");
        };

        for (const std::string& name : estimators) {
            if (name == "tau_t" || name == "tau_t_wls") {
                ensure_groups();
                EffectEstimate est =
                    name == "tau_t" ? tau_t_hat(groups, outcome) : tau_t_wls(groups, outcome);
                apply_inference(est, groups, inference, n_perm,
                                master.child_str(outcome).child_str(name).base_seed());
                results.push_back(std::move(est));
            } else if (name == "tau_d") {
                results.push_back(tau_d_hat(corpus.units, corpus.evaluations, outcome));
            }
        }

        if (by_topic) {
            std::set<std::string> topics;
            for (const TextUnit& u : corpus.units) topics.insert(u.topic);
            for (const std::string& topic : topics) {
                Corpus sub;
                std::set<std::string> keep;
                for (const TextUnit& u : corpus.units)
                    if (u.topic == topic) {
                        sub.units.push_back(u);
                        keep.insert(u.text_id);
                    }
                for (const Evaluation& e : corpus.evaluations)
                    if (keep.count(e.text_id)) sub.evaluations.push_back(e);
                for (const std::string& name : estimators) {
                    if (name != "tau_t" && name != "tau_t_wls") continue;
                    const auto topic_groups = build_groups(sub, outcome);
                    if (topic_groups.empty()) continue;
                    EffectEstimate est = name == "tau_t" ? tau_t_hat(topic_groups, outcome)
                                                         : tau_t_wls(topic_groups, outcome);
                    apply_inference(est, topic_groups, inference, n_perm,
                                    master.child_str(outcome)
                                        .child_str(name)
                                        .child(hash_str(topic))
                                        .base_seed());
                    est.metadata["topic"] = topic;
                    results.push_back(std::move(est));
                }
            }
        }
    }

    if (!zoo_names.empty()) {
        ZooOptions zopts = zoo_options_from_json(cfg, master.child_str("zoo").base_seed());
        zopts.estimators = zoo_names;
        const auto view = corpus_view(corpus);
        const auto records = run_zoo(view, outcomes, zopts, 0);
        for (const EstimateRecord& rec : records) {
            EffectEstimate est;
            est.estimator_name = rec.estimator;
            est.outcome = rec.outcome;
            est.point = rec.point;
            est.n_texts = static_cast<long>(view.size());
            est.n_evals = static_cast<long>(view.size());
            if (rec.bins) {
                est.metadata["prop_le_lo"] = fmt(rec.bins->p_low);
                est.metadata["prop_mid"] = fmt(rec.bins->p_mid);
                est.metadata["prop_ge_hi"] = fmt(rec.bins->p_high);
            }
            results.push_back(std::move(est));
        }
    }
    return results;
}

json run_estimate_files(const Corpus& corpus, const json& cfg, const fs::path& out_dir) {
    const auto estimates = run_estimate(corpus, cfg);
    ensure_dir(out_dir);
    atomic_write(out_dir / "estimates.jsonl", estimates_to_jsonl(estimates));
    atomic_write(out_dir / "summary.csv", estimates_summary_csv(estimates));
    write_manifest(out_dir, "estimate", cfg, {"estimates.jsonl", "summary.csv"});
    json j;
    j["n_estimates"] = estimates.size();
    json arr = json::array();
    for (const auto& est : estimates) arr.push_back(estimate_to_json(est));
    j["estimates"] = std::move(arr);
    return j;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
    if (jobs < 1) jobs = 1;
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::string replica_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "replica_%03d", index);
    return buf;
}

std::string view_to_csv(const std::vector<ViewRow>& view,
                        const std::vector<std::string>& outcomes) {
    std::string out = "text_id,treatment,topic,body";
    for (const auto& o : outcomes) out += "," + o;
    out += '\n';
    for (const ViewRow& r : view) {
        std::vector<std::string> fields = {r.text_id, std::to_string(r.treatment), r.topic,
                                           r.body};
        for (const auto& o : outcomes) {
            const auto it = r.outcomes.find(o);
            fields.push_back(it == r.outcomes.end() ? "" : fmt(it->second));
        }
        out += csv_line(fields);
    }
    return out;
}

json truth_to_json(const Replica& rep) {
    json j;
    j["replica_index"] = rep.replica_index;
    j["ground_truth"] = rep.ground_truth;
    j["ground_truth_pairs"] = rep.ground_truth_pairs;
    j["n_selected"] = rep.selected_text_ids.size();
    return j;
}

std::string records_to_jsonl(const std::vector<EstimateRecord>& records) {
    std::string out;
    for (const EstimateRecord& rec : records) {
        json j;
        j["replica"] = rec.replica;
        j["estimator"] = rec.estimator;
        j["outcome"] = rec.outcome;
        j["point"] = rec.point;
        if (rec.bins)
            j["propensity_bins"] = {{"p_low", rec.bins->p_low},
                                    {"p_mid", rec.bins->p_mid},
                                    {"p_high", rec.bins->p_high},
                                    {"lo", rec.bins->lo},
                                    {"hi", rec.bins->hi}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<EstimateRecord> records_from_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string());
    std::vector<EstimateRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        EstimateRecord rec;
        rec.replica = j.at("replica").get<int>();
        rec.estimator = j.at("estimator").get<std::string>();
        rec.outcome = j.at("outcome").get<std::string>();
        rec.point = j.at("point").get<double>();
        if (j.contains("propensity_bins")) {
            PropensityBins bins;
            bins.p_low = j["propensity_bins"].at("p_low").get<double>();
            bins.p_mid = j["propensity_bins"].at("p_mid").get<double>();
            bins.p_high = j["propensity_bins"].at("p_high").get<double>();
            bins.lo = j["propensity_bins"].at("lo").get<double>();
            bins.hi = j["propensity_bins"].at("hi").get<double>();
            rec.bins = bins;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

json bands_to_json(const std::map<std::string, Band>& bands,
                   const std::map<std::string, double>& population_truth, long n_replicas) {
    json j;
    j["n_replicas"] = n_replicas;
    json bj = json::object();
    for (const auto& [o, band] : bands) bj[o] = {{"lo", band.lo}, {"hi", band.hi}};
    j["bands"] = std::move(bj);
    j["population_truth"] = population_truth;
    return j;
}

}  // namespace

json run_simulate(const Corpus& corpus, const json& cfg, const fs::path& out_dir, int jobs,
                  bool resume) {
    const SimConfig sim = sim_config_from_json(cfg);
    ensure_dir(out_dir);

    std::vector<Replica> replicas(sim.n_replicas);
    std::vector<char> loaded(sim.n_replicas, 0);
    std::set<std::string> outcome_set;
    for (const Evaluation& e : corpus.evaluations) outcome_set.insert(e.outcome);
    const std::vector<std::string> outcomes(outcome_set.begin(), outcome_set.end());

    parallel_for(sim.n_replicas, jobs, [&](int r) {
        const fs::path dir = out_dir / replica_dir_name(r);
        if (resume && fs::exists(dir / "view.csv") && fs::exists(dir / "truth.json")) {
            std::ifstream in(dir / "truth.json");
            const json t = json::parse(in);
            Replica rep;
            rep.replica_index = r;
            for (const auto& [o, v] : t.at("ground_truth").items())
                rep.ground_truth[o] = v.get<double>();
            replicas[r] = std::move(rep);
            loaded[r] = 1;
            return;
        }
        Replica rep = generate_replica(corpus, sim, r);
        ensure_dir(dir);
        atomic_write(dir / "view.csv", view_to_csv(rep.view, outcomes));
        atomic_write(dir / "truth.json", truth_to_json(rep).dump(2) + "\n");
        replicas[r] = std::move(rep);
    });

    // Bands over replica ground truths; population truth from the full
    // modified corpus (computed via a single-replica run when all loaded).
    std::map<std::string, Band> bands;
    std::map<std::string, double> population_truth;
    {
        Corpus full = corpus;
        std::vector<Evaluation> evals = corpus.evaluations;
        if (sim.mode == SimMode::amplified) {
            evals = amplify_outcomes(evals, corpus.latent_ratings, sim);
            evals = inject_effect(evals, corpus.units, sim.effect_delta);
        }
        full.evaluations = dichotomize(evals, sim.dichotomize_threshold);
        for (const std::string& o : outcomes) {
            const auto groups = build_groups(full, o);
            if (!groups.empty()) population_truth[o] = tau_t_point(groups);
        }
    }
    for (const std::string& o : outcomes) {
        std::vector<double> truths;
        for (const Replica& rep : replicas) {
            const auto it = rep.ground_truth.find(o);
            if (it != rep.ground_truth.end()) truths.push_back(it->second);
        }
        if (!truths.empty())
            bands[o] = Band{quantile_linear(truths, 0.025), quantile_linear(truths, 0.975)};
    }

    atomic_write(out_dir / "bands.json",
                 bands_to_json(bands, population_truth, sim.n_replicas).dump(2) + "\n");
    write_manifest(out_dir, "simulate", cfg, {"bands.json", "replica_*/view.csv",
                                              "replica_*/truth.json"});

    json j;
    j["n_replicas"] = sim.n_replicas;
    j["outcomes"] = outcomes;
    j["bands"] = bands_to_json(bands, population_truth, sim.n_replicas)["bands"];
    j["resumed"] = std::count(loaded.begin(), loaded.end(), 1);
    return j;
}

json run_benchmark(const Corpus* corpus_in, const json& cfg, const fs::path& out_dir, int jobs,
                   bool resume) {
    const std::uint64_t master_seed = cfg.at("seed").get<std::uint64_t>();
    const Rng master(master_seed);

    Corpus generated;
    const Corpus* corpus = corpus_in;
    if (cfg.contains("dgp") && !cfg["dgp"].is_null()) {
        if (corpus_in)
            fail(errc::config_error, "benchmark: provide either a corpus or a dgp block, not both");
        generated =
            sample_dataset(dgp_params_from_json(cfg["dgp"], master.child_str("dgp").base_seed()))
                .corpus;
        corpus = &generated;
    }
    if (!corpus) fail(errc::config_error, "benchmark: no corpus given and no dgp block in config");

    const SimConfig sim =
        sim_config_from_json(cfg.value("sim", json::object()), master.child_str("sim").base_seed());
    const auto outcomes = outcomes_for(*corpus, cfg);
    ensure_dir(out_dir);

    ZooOptions zoo_base = zoo_options_from_json(cfg, 0);
    if (zoo_base.estimators.empty())
        zoo_base.estimators = {"diff_in_means", "topic_adjusted", "bow_or",
                               "bow_ipw", "bow_aipw", "leakage_probe"};

    std::vector<std::map<std::string, double>> truths(sim.n_replicas);
    std::vector<std::vector<EstimateRecord>> records_by_replica(sim.n_replicas);

    parallel_for(sim.n_replicas, jobs, [&](int r) {
        const fs::path dir = out_dir / replica_dir_name(r);
        if (resume && fs::exists(dir / "view.csv") && fs::exists(dir / "truth.json") &&
            fs::exists(dir / "estimates.jsonl")) {
            std::ifstream in(dir / "truth.json");
            const json t = json::parse(in);
            for (const auto& [o, v] : t.at("ground_truth").items())
                truths[r][o] = v.get<double>();
            records_by_replica[r] = records_from_jsonl(dir / "estimates.jsonl");
            return;
        }
        Replica rep = generate_replica(*corpus, sim, r);
        ZooOptions zopts = zoo_base;
        zopts.seed = master.child_str("zoo").child(static_cast<std::uint64_t>(r)).base_seed();
        auto records = run_zoo(rep.view, outcomes, zopts, r);
        ensure_dir(dir);
        atomic_write(dir / "view.csv", view_to_csv(rep.view, outcomes));
        atomic_write(dir / "truth.json", truth_to_json(rep).dump(2) + "\n");
        atomic_write(dir / "estimates.jsonl", records_to_jsonl(records));
        truths[r] = rep.ground_truth;
        records_by_replica[r] = std::move(records);
    });

    std::map<std::string, Band> bands;
    for (const std::string& o : outcomes) {
        std::vector<double> ts;
        for (const auto& t : truths) {
            const auto it = t.find(o);
            if (it != t.end()) ts.push_back(it->second);
        }
        if (!ts.empty()) bands[o] = Band{quantile_linear(ts, 0.025), quantile_linear(ts, 0.975)};
    }

    std::vector<EstimateRecord> all_records;
    for (auto& rs : records_by_replica)
        for (auto& rec : rs)
            if (bands.count(rec.outcome)) all_records.push_back(std::move(rec));

    const BenchmarkReport report = build_report(bands, sim.n_replicas, all_records);

    std::map<std::string, double> population_truth;  // kept in bands.json for reference
    {
        Corpus full = *corpus;
        std::vector<Evaluation> evals = corpus->evaluations;
        if (sim.mode == SimMode::amplified) {
            evals = amplify_outcomes(evals, corpus->latent_ratings, sim);
            evals = inject_effect(evals, corpus->units, sim.effect_delta);
        }
        full.evaluations = dichotomize(evals, sim.dichotomize_threshold);
        for (const std::string& o : outcomes) {
            const auto groups = build_groups(full, o);
            if (!groups.empty()) population_truth[o] = tau_t_point(groups);
        }
    }

    atomic_write(out_dir / "bands.json",
                 bands_to_json(bands, population_truth, sim.n_replicas).dump(2) + "\n");
    atomic_write(out_dir / "report.json", report.to_json() + "\n");
    atomic_write(out_dir / "report.csv", report.to_csv());
    atomic_write(out_dir / "bins.csv", report.bins_csv());
    write_manifest(out_dir, "benchmark", cfg,
                   {"bands.json", "report.json", "report.csv", "bins.csv",
                    "replica_*/view.csv", "replica_*/truth.json", "replica_*/estimates.jsonl"});

    json j;
    j["n_replicas"] = sim.n_replicas;
    j["outcomes"] = outcomes;
    json coverage = json::object();
    for (const auto& [key, cell] : report.cells)
        coverage[key.first + ":" + key.second] = cell.coverage;
    j["coverage"] = std::move(coverage);
    return j;
}

json run_report(const fs::path& benchmark_dir) {
    const fs::path bands_path = benchmark_dir / "bands.json";
    std::ifstream in(bands_path);
    if (!in) fail(errc::io_error, "cannot open " + bands_path.string());
    const json bands_json = json::parse(in);
    const long n_replicas = bands_json.at("n_replicas").get<long>();

    std::map<std::string, Band> bands;
    for (const auto& [o, b] : bands_json.at("bands").items())
        bands[o] = Band{b.at("lo").get<double>(), b.at("hi").get<double>()};

    std::vector<EstimateRecord> records;
    for (long r = 0; r < n_replicas; ++r) {
        const fs::path path = benchmark_dir / replica_dir_name(static_cast<int>(r)) /
                              "estimates.jsonl";
        if (!fs::exists(path))
            fail(errc::missing_estimate, "missing " + path.string());
        auto rs = records_from_jsonl(path);
        for (auto& rec : rs)
            if (bands.count(rec.outcome)) records.push_back(std::move(rec));
    }

    const BenchmarkReport report = build_report(bands, n_replicas, records);
    atomic_write(benchmark_dir / "report.json", report.to_json() + "\n");
    atomic_write(benchmark_dir / "report.csv", report.to_csv());
    atomic_write(benchmark_dir / "bins.csv", report.bins_csv());

    json j;
    j["n_replicas"] = n_replicas;
    json coverage = json::object();
    for (const auto& [key, cell] : report.cells)
        coverage[key.first + ":" + key.second] = cell.coverage;
    j["coverage"] = std::move(coverage);
    return j;
}

}  // namespace tfx
