#include "texteffect/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "texteffect/csv.hpp"
#include "texteffect/error.hpp"

namespace tfx {

bool is_outcome_label(const std::string& s) {
    return std::find(kOutcomeLabels.begin(), kOutcomeLabels.end(), s) != kOutcomeLabels.end();
}

bool is_feature_label(const std::string& s) {
    return std::find(kFeatureLabels.begin(), kFeatureLabels.end(), s) != kFeatureLabels.end();
}

namespace {

long parse_int(const std::string& s, const std::string& where) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        fail(errc::invariant_violation, where + ": '" + s + "' is not an integer");
    }
    if (pos != s.size())
        fail(errc::invariant_violation, where + ": '" + s + "' is not an integer");
    return v;
}

double parse_real(const std::string& s, const std::string& where) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        fail(errc::invariant_violation, where + ": '" + s + "' is not a number");
    }
    if (pos != s.size() || !std::isfinite(v))
        fail(errc::invariant_violation, where + ": '" + s + "' is not a finite number");
    return v;
}

std::string row_ref(const std::string& file, std::size_t idx) {
    return file + " row " + std::to_string(idx + 2);  // +2: header + 1-based
}

Corpus build_corpus(const CsvTable& units_t, const CsvTable& evals_t, const CsvTable& ratings_t,
                    ValueMode mode) {
    Corpus corpus;

    {
        const auto c_text = units_t.col("text_id", "units.csv");
        const auto c_pair = units_t.col("pair_id", "units.csv");
        const auto c_ver = units_t.col("version_index", "units.csv");
        const auto c_treat = units_t.col("treatment", "units.csv");
        const auto c_topic = units_t.col("topic", "units.csv");
        const auto c_body = units_t.col("body", "units.csv");
        corpus.units.reserve(units_t.rows.size());
        for (std::size_t i = 0; i < units_t.rows.size(); ++i) {
            const auto& r = units_t.rows[i];
            TextUnit u;
            u.text_id = r[c_text];
            u.pair_id = r[c_pair];
            u.version_index = static_cast<int>(parse_int(r[c_ver], row_ref("units.csv", i)));
            const long treat = parse_int(r[c_treat], row_ref("units.csv", i));
            if (treat != 0 && treat != 1)
                fail(errc::invariant_violation,
                     row_ref("units.csv", i) + ": treatment must be 0 or 1, got " + r[c_treat]);
            u.treatment = static_cast<int>(treat);
            u.topic = r[c_topic];
            u.body = r[c_body];
            if (u.version_index < 1)
                fail(errc::invariant_violation,
                     row_ref("units.csv", i) + ": version_index must be >= 1");
            corpus.units.push_back(std::move(u));
        }
    }

    {
        const auto c_eval = evals_t.col("eval_id", "evaluations.csv");
        const auto c_text = evals_t.col("text_id", "evaluations.csv");
        const auto c_rater = evals_t.col("evaluator_id", "evaluations.csv");
        const auto c_outcome = evals_t.col("outcome", "evaluations.csv");
        const auto c_value = evals_t.col("value", "evaluations.csv");
        corpus.evaluations.reserve(evals_t.rows.size());
        for (std::size_t i = 0; i < evals_t.rows.size(); ++i) {
            const auto& r = evals_t.rows[i];
            Evaluation e;
            e.eval_id = r[c_eval];
            e.text_id = r[c_text];
            e.evaluator_id = r[c_rater];
            e.outcome = r[c_outcome];
            const std::string where = row_ref("evaluations.csv", i);
            if (mode == ValueMode::likert) {
                const long v = parse_int(r[c_value], where);
                if (v < 1 || v > 5)
                    fail(errc::invariant_violation,
                         where + ": Likert value must be in [1,5], got " + r[c_value]);
                e.value = static_cast<double>(v);
            } else {
                e.value = parse_real(r[c_value], where);
            }
            corpus.evaluations.push_back(std::move(e));
        }
    }

    {
        const auto c_text = ratings_t.col("text_id", "ratings.csv");
        const auto c_rater = ratings_t.col("rater_id", "ratings.csv");
        const auto c_feature = ratings_t.col("feature", "ratings.csv");
        const auto c_value = ratings_t.col("value", "ratings.csv");
        corpus.latent_ratings.reserve(ratings_t.rows.size());
        for (std::size_t i = 0; i < ratings_t.rows.size(); ++i) {
            const auto& r = ratings_t.rows[i];
            LatentRating lr;
            lr.text_id = r[c_text];
            lr.rater_id = r[c_rater];
            lr.feature = r[c_feature];
            lr.value = parse_real(r[c_value], row_ref("ratings.csv", i));
            corpus.latent_ratings.push_back(std::move(lr));
        }
    }

    validate_corpus(corpus, mode);
    return corpus;
}

}  // namespace

void validate_corpus(const Corpus& corpus, ValueMode mode) {
    std::unordered_map<std::string, const TextUnit*> by_text;
    by_text.reserve(corpus.units.size());
    std::unordered_map<std::string, std::vector<const TextUnit*>> by_pair;
    std::set<std::pair<std::string, int>> pair_versions;

    for (std::size_t i = 0; i < corpus.units.size(); ++i) {
        const TextUnit& u = corpus.units[i];
        if (!by_text.emplace(u.text_id, &u).second)
            fail(errc::duplicate_id,
                 "units row for text_id '" + u.text_id + "': duplicate text_id");
        if (!pair_versions.emplace(u.pair_id, u.version_index).second)
            fail(errc::duplicate_id, "units row for text_id '" + u.text_id +
                                         "': duplicate (pair_id, version_index) = (" + u.pair_id +
                                         ", " + std::to_string(u.version_index) + ")");
        by_pair[u.pair_id].push_back(&u);
    }

    for (const auto& [pair_id, members] : by_pair) {
        const TextUnit* original = nullptr;
        for (const TextUnit* u : members) {
            if (u->version_index == 1) {
                original = u;
            }
        }
        if (!original)
            fail(errc::invariant_violation,
                 "pair '" + pair_id + "' has no original (version_index = 1)");
        for (const TextUnit* u : members) {
            if (u->version_index > 1 && u->treatment != 1 - original->treatment)
                fail(errc::invariant_violation,
                     "units row for text_id '" + u->text_id + "': edit treatment " +
                         std::to_string(u->treatment) + " does not flip original '" +
                         original->text_id + "' (treatment " +
                         std::to_string(original->treatment) + ")");
        }
    }

    std::unordered_set<std::string> eval_ids;
    eval_ids.reserve(corpus.evaluations.size());
    for (const Evaluation& e : corpus.evaluations) {
        if (!eval_ids.insert(e.eval_id).second)
            fail(errc::duplicate_id, "evaluations row '" + e.eval_id + "': duplicate eval_id");
        if (!by_text.count(e.text_id))
            fail(errc::dangling_reference,
                 "evaluations row '" + e.eval_id + "': unknown text_id '" + e.text_id + "'");
        if (!is_outcome_label(e.outcome))
            fail(errc::invariant_violation,
                 "evaluations row '" + e.eval_id + "': unknown outcome '" + e.outcome + "'");
        if (mode == ValueMode::likert) {
            if (e.value < 1.0 || e.value > 5.0 || e.value != std::floor(e.value))
                fail(errc::invariant_violation, "evaluations row '" + e.eval_id +
                                                    "': Likert value must be an integer in [1,5]");
        } else if (!std::isfinite(e.value)) {
            fail(errc::invariant_violation,
                 "evaluations row '" + e.eval_id + "': value must be finite");
        }
    }

    for (std::size_t i = 0; i < corpus.latent_ratings.size(); ++i) {
        const LatentRating& r = corpus.latent_ratings[i];
        const std::string where = "ratings row " + std::to_string(i + 2);
        if (!by_text.count(r.text_id))
            fail(errc::dangling_reference, where + ": unknown text_id '" + r.text_id + "'");
        if (!is_feature_label(r.feature))
            fail(errc::invariant_violation, where + ": unknown feature '" + r.feature + "'");
        if (r.value < 0.0 || r.value > 100.0)
            fail(errc::invariant_violation,
                 where + ": rating value must be in [0,100], got " + std::to_string(r.value));
    }
}

Corpus parse_corpus(const CorpusPaths& paths, ValueMode mode) {
    const CsvTable units = read_csv(paths.units);
    const CsvTable evals = read_csv(paths.evaluations);
    const CsvTable ratings = read_csv(paths.ratings);
    return build_corpus(units, evals, ratings, mode);
}

Corpus parse_corpus_text(const std::string& units_csv, const std::string& evals_csv,
                         const std::string& ratings_csv, ValueMode mode) {
    return build_corpus(parse_csv(units_csv, "units.csv"), parse_csv(evals_csv, "evaluations.csv"),
                        parse_csv(ratings_csv, "ratings.csv"), mode);
}

namespace {

std::string format_value(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

void write_corpus(const Corpus& corpus, const CorpusPaths& paths) {
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) fail(errc::io_error, "cannot write " + p.string());
        return out;
    };
    {
        auto out = open(paths.units);
        out << "text_id,pair_id,version_index,treatment,topic,body\n";
        for (const auto& u : corpus.units)
            out << csv_line({u.text_id, u.pair_id, std::to_string(u.version_index),
                             std::to_string(u.treatment), u.topic, u.body});
    }
    {
        auto out = open(paths.evaluations);
        out << "eval_id,text_id,evaluator_id,outcome,value\n";
        for (const auto& e : corpus.evaluations)
            out << csv_line({e.eval_id, e.text_id, e.evaluator_id, e.outcome,
                             format_value(e.value)});
    }
    {
        auto out = open(paths.ratings);
        out << "text_id,rater_id,feature,value\n";
        for (const auto& r : corpus.latent_ratings)
            out << csv_line({r.text_id, r.rater_id, r.feature, format_value(r.value)});
    }
}

std::map<std::string, double> mean_feature_by_text(const Corpus& corpus,
                                                   const std::string& feature) {
    std::map<std::string, std::pair<double, long>> acc;
    for (const LatentRating& r : corpus.latent_ratings) {
        if (r.feature != feature) continue;
        auto& slot = acc[r.text_id];
        slot.first += r.value;
        slot.second += 1;
    }
    std::map<std::string, double> out;
    for (const auto& [id, sum_n] : acc) out[id] = sum_n.first / static_cast<double>(sum_n.second);
    return out;
}

std::string AuditReport::to_json() const {
    nlohmann::json j;
    j["edits_removed_frac"] = edits_removed_frac;
    j["originals_removed_frac"] = originals_removed_frac;
    j["removed_text_ids"] = removed_text_ids;
    j["flagged_text_ids"] = flagged_text_ids;
    return j.dump(2);
}

AuditOutcome audit_edits(const Corpus& corpus, double min_gap) {
    if (min_gap < 0.0) fail(errc::config_error, "min_gap must be >= 0");
    const auto ih_mean = mean_feature_by_text(corpus, "ih");

    std::unordered_map<std::string, const TextUnit*> original_of_pair;
    for (const TextUnit& u : corpus.units)
        if (u.is_original()) original_of_pair[u.pair_id] = &u;

    std::set<std::string> removed;
    std::set<std::string> flagged;
    long n_edits = 0;
    long n_originals = 0;
    long edits_removed = 0;

    for (const TextUnit& u : corpus.units) {
        if (u.is_original()) {
            ++n_originals;
            if (!ih_mean.count(u.text_id)) flagged.insert(u.text_id);
            continue;
        }
        ++n_edits;
        const TextUnit* orig = original_of_pair.at(u.pair_id);
        const auto edit_it = ih_mean.find(u.text_id);
        const auto orig_it = ih_mean.find(orig->text_id);
        if (edit_it == ih_mean.end() || orig_it == ih_mean.end()) {
            // No ratings to audit against: keep, but flag rather than silently pass.
            if (edit_it == ih_mean.end()) flagged.insert(u.text_id);
            if (orig_it == ih_mean.end()) flagged.insert(orig->text_id);
            continue;
        }
        // Directional movement: an edit must change ih away from the original's
        // arm. Positive = moved as instructed.
        const double movement = orig->treatment == 1 ? orig_it->second - edit_it->second
                                                     : edit_it->second - orig_it->second;
        if (movement < min_gap) {
            removed.insert(u.text_id);
            ++edits_removed;
        }
    }

    // Originals left with zero surviving edits go too.
    std::unordered_map<std::string, long> surviving_edits;
    for (const TextUnit& u : corpus.units)
        if (!u.is_original() && !removed.count(u.text_id)) surviving_edits[u.pair_id] += 1;

    long originals_removed = 0;
    for (const TextUnit& u : corpus.units) {
        if (u.is_original() && surviving_edits[u.pair_id] == 0) {
            removed.insert(u.text_id);
            ++originals_removed;
        }
    }

    AuditOutcome out;
    out.report.edits_removed_frac =
        n_edits ? static_cast<double>(edits_removed) / static_cast<double>(n_edits) : 0.0;
    out.report.originals_removed_frac =
        n_originals ? static_cast<double>(originals_removed) / static_cast<double>(n_originals)
                    : 0.0;
    out.report.removed_text_ids.assign(removed.begin(), removed.end());
    out.report.flagged_text_ids.assign(flagged.begin(), flagged.end());

    for (const TextUnit& u : corpus.units)
        if (!removed.count(u.text_id)) out.corpus.units.push_back(u);
    for (const Evaluation& e : corpus.evaluations)
        if (!removed.count(e.text_id)) out.corpus.evaluations.push_back(e);
    for (const LatentRating& r : corpus.latent_ratings)
        if (!removed.count(r.text_id)) out.corpus.latent_ratings.push_back(r);
    return out;
}

CountTable summarize_counts(const Corpus& corpus) {
    std::unordered_map<std::string, const TextUnit*> by_text;
    for (const TextUnit& u : corpus.units) by_text[u.text_id] = &u;
    CountTable table;
    for (const Evaluation& e : corpus.evaluations) {
        const auto it = by_text.find(e.text_id);
        if (it == by_text.end())
            fail(errc::dangling_reference,
                 "evaluation '" + e.eval_id + "' references unknown text '" + e.text_id + "'");
        const TextUnit& u = *it->second;
        table[CountKey{u.topic, u.treatment, u.is_original() ? 1 : 0}] += 1;
    }
    return table;
}

}  // namespace tfx
