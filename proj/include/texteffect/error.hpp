#pragma once

#include <stdexcept>
#include <string>

namespace tfx {

// Error codes shared between the C++ core and the C API. Values are stable;
// the C header mirrors them.
enum class errc : int {
    ok = 0,
    io_error = 1,
    config_error = 2,
    missing_column = 3,
    duplicate_id = 4,
    dangling_reference = 5,
    invariant_violation = 6,
    no_ratings = 7,
    missing_rating = 8,
    empty_arm = 9,
    singular_design = 10,
    single_cluster = 11,
    empty_vocabulary = 12,
    degenerate_fold = 13,
    extreme_propensity = 14,
    non_computable = 15,
    all_trimmed = 16,
    missing_estimate = 17,
    empty_input = 18,
    internal = 19,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::ok: return "ok";
        case errc::io_error: return "io_error";
        case errc::config_error: return "config_error";
        case errc::missing_column: return "missing_column";
        case errc::duplicate_id: return "duplicate_id";
        case errc::dangling_reference: return "dangling_reference";
        case errc::invariant_violation: return "invariant_violation";
        case errc::no_ratings: return "no_ratings";
        case errc::missing_rating: return "missing_rating";
        case errc::empty_arm: return "empty_arm";
        case errc::singular_design: return "singular_design";
        case errc::single_cluster: return "single_cluster";
        case errc::empty_vocabulary: return "empty_vocabulary";
        case errc::degenerate_fold: return "degenerate_fold";
        case errc::extreme_propensity: return "extreme_propensity";
        case errc::non_computable: return "non_computable";
        case errc::all_trimmed: return "all_trimmed";
        case errc::missing_estimate: return "missing_estimate";
        case errc::empty_input: return "empty_input";
        case errc::internal: return "internal";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace tfx
