#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "etm/errors.hpp"
#include "etm/rng.hpp"

namespace etm {

using TermId = std::size_t;
using TokenSeq = std::vector<std::string>;

struct Vocabulary {
  std::vector<std::string> terms;                  // id -> term
  std::unordered_map<std::string, TermId> index;   // term -> id
  // Fraction of documents containing each term; filled by
  // build_vocabulary, empty for vocabularies loaded from file.
  std::vector<double> doc_freq;

  std::size_t size() const { return terms.size(); }
  std::optional<TermId> id_of(const std::string& term) const {
    auto it = index.find(term);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
  // FNV-1a over terms, newline separated; recorded in checkpoints and
  // reports so artifacts can be cross-checked.
  std::uint64_t hash() const;
};

struct BowDocument {
  std::map<TermId, std::uint32_t> counts;  // term id -> count, ordered
  std::uint64_t total_tokens = 0;          // N_d

  bool empty() const { return total_tokens == 0; }
};

struct SplitCorpus {
  std::vector<BowDocument> train, validation, test;
  // Original document index per split entry, parallel to the vectors above.
  std::vector<std::size_t> train_ids, validation_ids, test_ids;
};

struct CompletionPair {
  BowDocument observed_half;
  BowDocument held_out_half;
};

struct SplitFractions {
  double train = 0.85;
  double test = 0.10;
  double validation = 0.05;
};

// Lowercases, splits on non-alphabetic characters, drops tokens shorter
// than 2 characters, then removes stop words when a list is given.
TokenSeq tokenize(const std::string& raw_text,
                  const std::set<std::string>* stopwords = nullptr);

// Keeps terms contained in at least min_docs documents and in at most a
// max_df fraction of them (presence-based counting). Ids are assigned
// in lexicographic term order. Throws EmptyVocabulary.
Vocabulary build_vocabulary(const std::vector<TokenSeq>& docs, std::size_t min_docs,
                            double max_df);

// Counts in-vocabulary tokens; out-of-vocabulary tokens are dropped.
BowDocument to_bow(const TokenSeq& doc, const Vocabulary& vocab);

// Deterministic shuffle + partition. Documents with fewer than 2 tokens
// are removed from the validation and test splits after partitioning.
// Throws InsufficientDocuments if any split ends up empty.
SplitCorpus split_corpus(const std::vector<BowDocument>& docs, SplitFractions fractions,
                         std::uint64_t seed);

// Expands the document to its token multiset, shuffles it under the
// seed, and puts the first ceil(N_d/2) tokens in the observed half.
// Throws TooShort when N_d < 2.
CompletionPair completion_split(const BowDocument& doc, std::uint64_t seed);
CompletionPair completion_split(const BowDocument& doc, Rng& rng);

// --- file formats ---

// One document per line if path is a file; one document per .txt file
// (sorted by filename) if path is a directory.
std::vector<std::string> read_raw_corpus(const std::string& path);
// One word per line.
std::set<std::string> read_stopwords(const std::string& path);

// One term per line, line number = id.
void write_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary read_vocabulary(const std::string& path);

// JSON lines: {"id": int, "counts": {"termid": count, ...}}.
void write_bow_jsonl(const std::vector<BowDocument>& docs,
                     const std::vector<std::size_t>& ids, const std::string& path);
std::vector<BowDocument> read_bow_jsonl(const std::string& path,
                                        std::vector<std::size_t>* ids = nullptr);

}  // namespace etm
