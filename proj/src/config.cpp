#include "texteffect/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "texteffect/error.hpp"
#include "texteffect/rng.hpp"

namespace tfx {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void toml_fail(const std::string& context, std::size_t line, const std::string& msg) {
    fail(errc::config_error, context + " line " + std::to_string(line) + ": " + msg);
}

json parse_toml_scalar(const std::string& raw, const std::string& context, std::size_t line) {
    if (raw.empty()) toml_fail(context, line, "empty value");
    if (raw.front() == '"' || raw.front() == '\'') {
        const char quote = raw.front();
        if (raw.size() < 2 || raw.back() != quote)
            toml_fail(context, line, "unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (quote == '"' && c == '\\' && i + 2 < raw.size() + 1) {
                const char next = raw[++i];
                switch (next) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: toml_fail(context, line, "unsupported escape");
                }
            } else {
                out += c;
            }
        }
        return json(out);
    }
    if (raw == "true") return json(true);
    if (raw == "false") return json(false);
    // Number: integer unless it carries a fraction or exponent.
    const bool is_float = raw.find_first_of(".eE") != std::string::npos;
    try {
        std::size_t pos = 0;
        if (is_float) {
            const double v = std::stod(raw, &pos);
            if (pos == raw.size()) return json(v);
        } else {
            const long long v = std::stoll(raw, &pos);
            if (pos == raw.size()) return json(v);
        }
    } catch (const std::exception&) {
    }
    toml_fail(context, line, "cannot parse value '" + raw + "'");
}

json parse_toml_value(const std::string& raw, const std::string& context, std::size_t line) {
    if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']') toml_fail(context, line, "unterminated array");
        json arr = json::array();
        std::string inner = raw.substr(1, raw.size() - 2);
        std::string item;
        bool in_string = false;
        char quote = 0;
        for (char c : inner) {
            if (in_string) {
                item += c;
                if (c == quote) in_string = false;
            } else if (c == '"' || c == '\'') {
                item += c;
                in_string = true;
                quote = c;
            } else if (c == ',') {
                const std::string t = trim(item);
                if (!t.empty()) arr.push_back(parse_toml_scalar(t, context, line));
                item.clear();
            } else {
                item += c;
            }
        }
        const std::string t = trim(item);
        if (!t.empty()) arr.push_back(parse_toml_scalar(t, context, line));
        return arr;
    }
    return parse_toml_scalar(raw, context, line);
}

}  // namespace

json parse_toml(const std::string& text, const std::string& context) {
    json root = json::object();
    json* current = &root;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments outside strings.
        std::string stripped;
        bool in_string = false;
        char quote = 0;
        for (char c : line) {
            if (in_string) {
                stripped += c;
                if (c == quote) in_string = false;
            } else if (c == '"' || c == '\'') {
                stripped += c;
                in_string = true;
                quote = c;
            } else if (c == '#') {
                break;
            } else {
                stripped += c;
            }
        }
        const std::string t = trim(stripped);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') toml_fail(context, lineno, "malformed table header");
            const std::string name = trim(t.substr(1, t.size() - 2));
            if (name.empty()) toml_fail(context, lineno, "empty table name");
            root[name] = json::object();
            current = &root[name];
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) toml_fail(context, lineno, "expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) toml_fail(context, lineno, "empty key");
        for (char c : key)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
                toml_fail(context, lineno, "unsupported key '" + key + "'");
        (*current)[key] = parse_toml_value(value, context, lineno);
    }
    return root;
}

json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string ext = path.extension().string();
    if (ext == ".json") {
        try {
            return json::parse(buf.str());
        } catch (const json::parse_error& e) {
            fail(errc::config_error, path.string() + ": " + e.what());
        }
    }
    if (ext == ".toml") return parse_toml(buf.str(), path.filename().string());
    fail(errc::config_error, "config file must be .json or .toml: " + path.string());
}

namespace {

enum class FieldType { integer, number, boolean, string, string_array, object };

struct FieldSpec {
    FieldType type;
    bool required = false;
    json default_value;
    const char* child_schema = nullptr;  // for object fields
};

using Schema = std::map<std::string, FieldSpec>;

const Schema& schema_by_name(const std::string& name);

Schema make_dgp_schema(bool require_seed) {
    Schema s;
    s["n_pairs"] = {FieldType::integer, false, json(200), nullptr};
    s["p_treat"] = {FieldType::number, false, json(0.5), nullptr};
    s["z_shift"] = {FieldType::number, false, json(0.3), nullptr};
    s["tau"] = {FieldType::number, false, json(0.5), nullptr};
    s["beta"] = {FieldType::number, false, json(1.0), nullptr};
    s["alpha"] = {FieldType::number, false, json(2.4), nullptr};
    s["noise_sd"] = {FieldType::number, false, json(0.5), nullptr};
    s["z_jitter"] = {FieldType::number, false, json(1.0), nullptr};
    s["z_resolution"] = {FieldType::number, false, json(0.02), nullptr};
    s["min_edits"] = {FieldType::integer, false, json(1), nullptr};
    s["max_edits"] = {FieldType::integer, false, json(1), nullptr};
    s["tokens_per_doc"] = {FieldType::integer, false, json(90), nullptr};
    s["marker_count"] = {FieldType::integer, false, json(3), nullptr};
    s["outcome_label"] = {FieldType::string, false, json("informative"), nullptr};
    if (require_seed) s["seed"] = {FieldType::integer, true, json(), nullptr};
    return s;
}

Schema make_sim_schema(bool require_seed) {
    Schema s;
    s["mode"] = {FieldType::string, false, json("baseline"), nullptr};
    s["selection_strength"] = {FieldType::number, false, json(0.8), nullptr};
    s["selection_floor"] = {FieldType::number, false, json(0.05), nullptr};
    s["outcome_shift"] = {FieldType::integer, false, json(1), nullptr};
    s["effect_delta"] = {FieldType::number, false, json(0.6), nullptr};
    s["dichotomize_threshold"] = {FieldType::integer, false, json(4), nullptr};
    s["n_replicas"] = {FieldType::integer, false, json(100), nullptr};
    if (require_seed) s["seed"] = {FieldType::integer, true, json(), nullptr};
    return s;
}

Schema make_learner_schema() {
    Schema s;
    s["min_df"] = {FieldType::integer, false, json(5), nullptr};
    s["binary_counts"] = {FieldType::boolean, false, json(false), nullptr};
    s["k_folds"] = {FieldType::integer, false, json(5), nullptr};
    s["n_trees"] = {FieldType::integer, false, json(100), nullptr};
    s["max_depth"] = {FieldType::integer, false, json(0), nullptr};
    s["propensity_bound_lo"] = {FieldType::number, false, json(0.1), nullptr};
    s["propensity_bound_hi"] = {FieldType::number, false, json(0.9), nullptr};
    s["propensity_bound_mode"] = {FieldType::string, false, json("winsorize"), nullptr};
    return s;
}

const Schema& schema_by_name(const std::string& name) {
    static const Schema ingest = {};
    static const Schema audit = {{"min_gap", {FieldType::number, false, json(0.0), nullptr}}};
    static const Schema counts = {{"min_gap", {FieldType::number, false, json(0.0), nullptr}}};
    static const Schema dgp = make_dgp_schema(true);
    static const Schema dgp_nested = make_dgp_schema(false);
    static const Schema simulate = make_sim_schema(true);
    static const Schema sim_nested = make_sim_schema(false);
    static const Schema learner = make_learner_schema();
    static const Schema report = {};

    static const Schema estimate = [] {
        Schema s = make_learner_schema();
        s["estimators"] = {FieldType::string_array, false, json(json::array({"tau_t"})), nullptr};
        s["outcomes"] = {FieldType::string_array, false, json(json::array()), nullptr};
        s["inference"] = {FieldType::string, false, json("none"), nullptr};
        s["n_permutations"] = {FieldType::integer, false, json(1000), nullptr};
        s["by_topic"] = {FieldType::boolean, false, json(false), nullptr};
        s["seed"] = {FieldType::integer, true, json(), nullptr};
        return s;
    }();

    static const Schema benchmark = [] {
        Schema s = make_learner_schema();
        s["estimators"] = {FieldType::string_array, false,
                           json(json::array({"diff_in_means", "topic_adjusted", "bow_or",
                                             "bow_ipw", "bow_aipw", "leakage_probe"})),
                           nullptr};
        s["outcomes"] = {FieldType::string_array, false, json(json::array()), nullptr};
        s["sim"] = {FieldType::object, false, json(json::object()), "sim_nested"};
        s["dgp"] = {FieldType::object, false, json(), "dgp_nested"};
        s["seed"] = {FieldType::integer, true, json(), nullptr};
        return s;
    }();

    if (name == "ingest") return ingest;
    if (name == "audit") return audit;
    if (name == "counts") return counts;
    if (name == "dgp") return dgp;
    if (name == "dgp_nested") return dgp_nested;
    if (name == "simulate") return simulate;
    if (name == "sim_nested") return sim_nested;
    if (name == "learner") return learner;
    if (name == "estimate") return estimate;
    if (name == "benchmark") return benchmark;
    if (name == "report") return report;
    fail(errc::config_error, "unknown config schema '" + name + "'");
}

json validate_against(const json& config, const Schema& schema, const std::string& context) {
    if (!config.is_object())
        fail(errc::config_error, context + ": config must be an object");
    for (const auto& [key, value] : config.items()) {
        if (!schema.count(key))
            fail(errc::config_error, context + ": unknown key '" + key + "'");
    }
    json out = json::object();
    for (const auto& [key, spec] : schema) {
        const auto it = config.find(key);
        if (it == config.end()) {
            if (spec.required)
                fail(errc::config_error, context + ": missing required key '" + key + "'");
            if (!spec.default_value.is_null()) {
                if (spec.type == FieldType::object && spec.child_schema)
                    out[key] = validate_against(spec.default_value,
                                                schema_by_name(spec.child_schema),
                                                context + "." + key);
                else
                    out[key] = spec.default_value;
            }
            continue;
        }
        const json& v = *it;
        const std::string where = context + "." + key;
        switch (spec.type) {
            case FieldType::integer:
                if (!v.is_number_integer() && !v.is_number_unsigned())
                    fail(errc::config_error, where + ": expected integer");
                out[key] = v;
                break;
            case FieldType::number:
                if (!v.is_number()) fail(errc::config_error, where + ": expected number");
                out[key] = v.get<double>();
                break;
            case FieldType::boolean:
                if (!v.is_boolean()) fail(errc::config_error, where + ": expected boolean");
                out[key] = v;
                break;
            case FieldType::string:
                if (!v.is_string()) fail(errc::config_error, where + ": expected string");
                out[key] = v;
                break;
            case FieldType::string_array: {
                if (!v.is_array()) fail(errc::config_error, where + ": expected string array");
                for (const auto& e : v)
                    if (!e.is_string())
                        fail(errc::config_error, where + ": expected string array");
                out[key] = v;
                break;
            }
            case FieldType::object:
                if (!v.is_object()) fail(errc::config_error, where + ": expected table/object");
                out[key] = validate_against(v, schema_by_name(spec.child_schema), where);
                break;
        }
    }
    return out;
}

}  // namespace

json validate_config(const json& config, const std::string& schema_name) {
    return validate_against(config, schema_by_name(schema_name), schema_name);
}

json resolve_config(const json& file_config, const json& overrides,
                    const std::string& schema_name) {
    json merged = file_config.is_object() ? file_config : json::object();
    if (overrides.is_object()) {
        for (const auto& [key, value] : overrides.items()) {
            if (value.is_object() && merged.contains(key) && merged[key].is_object()) {
                for (const auto& [k2, v2] : value.items()) merged[key][k2] = v2;
            } else {
                merged[key] = value;
            }
        }
    }
    return validate_config(merged, schema_name);
}

std::string config_hash_hex(const json& config) {
    const std::string canonical = config.dump();  // nlohmann objects iterate sorted
    const std::uint64_t h = hash_str(canonical);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace tfx
