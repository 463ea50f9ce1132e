#pragma once

#include <string>
#include <vector>

namespace tfx {

// Sparse document-term matrix. Vocabulary is sorted lexicographically, which
// makes every downstream estimator invariant to the order documents and
// tokens arrive in.
struct DocTermMatrix {
    std::vector<std::string> vocabulary;
    std::vector<std::string> doc_ids;
    // Per-document (term index, count) pairs, term indices ascending.
    std::vector<std::vector<std::pair<int, float>>> rows;

    std::size_t n_docs() const { return rows.size(); }
    std::size_t n_terms() const { return vocabulary.size(); }

    // Dense row-major copy (n_docs x n_terms), used by the tree learners.
    std::vector<float> dense() const;
};

// Lowercased maximal alphanumeric runs (ASCII; other bytes act as separators).
std::vector<std::string> tokenize(const std::string& text);

// Count featurization with document-frequency pruning: tokens appearing in
// fewer than min_df documents are dropped. binary replaces counts with
// presence indicators.
DocTermMatrix bow_vectorize(const std::vector<std::string>& texts,
                            const std::vector<std::string>& doc_ids, int min_df = 5,
                            bool binary = false);

// Row subset with the vocabulary left as-is (no re-pruning).
DocTermMatrix select_rows(const DocTermMatrix& dtm, const std::vector<int>& rows);

}  // namespace tfx
