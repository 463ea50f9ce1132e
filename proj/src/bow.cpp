#include "texteffect/bow.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>

#include "texteffect/error.hpp"

namespace tfx {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

DocTermMatrix bow_vectorize(const std::vector<std::string>& texts,
                            const std::vector<std::string>& doc_ids, int min_df, bool binary) {
    if (texts.empty()) fail(errc::empty_input, "bow_vectorize: no documents");
    if (doc_ids.size() != texts.size())
        fail(errc::config_error, "bow_vectorize: doc_ids/texts size mismatch");
    if (min_df < 1) fail(errc::config_error, "min_df must be >= 1");

    std::vector<std::unordered_map<std::string, long>> doc_counts(texts.size());
    std::map<std::string, long> df;  // ordered: vocabulary comes out sorted
    for (std::size_t d = 0; d < texts.size(); ++d) {
        for (auto& tok : tokenize(texts[d])) doc_counts[d][tok] += 1;
        for (const auto& [tok, n] : doc_counts[d]) df[tok] += 1;
    }

    DocTermMatrix dtm;
    dtm.doc_ids = doc_ids;
    std::unordered_map<std::string, int> term_index;
    for (const auto& [tok, n] : df) {
        if (n < min_df) continue;
        term_index.emplace(tok, static_cast<int>(dtm.vocabulary.size()));
        dtm.vocabulary.push_back(tok);
    }
    if (dtm.vocabulary.empty())
        fail(errc::empty_vocabulary,
             "bow_vectorize: no token appears in >= " + std::to_string(min_df) + " documents");

    dtm.rows.resize(texts.size());
    for (std::size_t d = 0; d < texts.size(); ++d) {
        auto& row = dtm.rows[d];
        row.reserve(doc_counts[d].size());
        for (const auto& [tok, n] : doc_counts[d]) {
            const auto it = term_index.find(tok);
            if (it == term_index.end()) continue;
            row.emplace_back(it->second, binary ? 1.0f : static_cast<float>(n));
        }
        std::sort(row.begin(), row.end());
    }
    return dtm;
}

DocTermMatrix select_rows(const DocTermMatrix& dtm, const std::vector<int>& rows) {
    DocTermMatrix out;
    out.vocabulary = dtm.vocabulary;
    out.doc_ids.reserve(rows.size());
    out.rows.reserve(rows.size());
    for (int r : rows) {
        out.doc_ids.push_back(dtm.doc_ids[r]);
        out.rows.push_back(dtm.rows[r]);
    }
    return out;
}

std::vector<float> DocTermMatrix::dense() const {
    std::vector<float> out(n_docs() * n_terms(), 0.0f);
    for (std::size_t d = 0; d < rows.size(); ++d)
        for (const auto& [term, count] : rows[d]) out[d * n_terms() + term] = count;
    return out;
}

}  // namespace tfx
