#include "etm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace etm {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const std::string& t : terms) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 1099511628211ull;
  }
  return h;
}

TokenSeq tokenize(const std::string& raw_text, const std::set<std::string>* stopwords) {
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2 && (!stopwords || !stopwords->count(cur))) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : raw_text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if (c >= 'a' && c <= 'z')
      cur.push_back(static_cast<char>(c));
    else
      flush();  // any non-alphabetic byte is a separator
  }
  flush();
  return out;
}

Vocabulary build_vocabulary(const std::vector<TokenSeq>& docs, std::size_t min_docs,
                            double max_df) {
  if (min_docs < 1) throw ConfigError("build_vocabulary: min_docs must be >= 1");
  if (!(max_df > 0.0) || max_df > 1.0)
    throw ConfigError("build_vocabulary: max_df must be in (0, 1]");
  std::map<std::string, std::size_t> doc_counts;  // ordered -> lexicographic ids
  for (const TokenSeq& doc : docs) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const std::string& t : seen) doc_counts[t] += 1;
  }
  double total = static_cast<double>(docs.size());
  Vocabulary vocab;
  for (const auto& [term, count] : doc_counts) {
    double df = static_cast<double>(count) / total;
    if (count >= min_docs && df <= max_df) {
      vocab.index.emplace(term, vocab.terms.size());
      vocab.terms.push_back(term);
      vocab.doc_freq.push_back(df);
    }
  }
  if (vocab.terms.empty()) throw EmptyVocabulary();
  return vocab;
}

BowDocument to_bow(const TokenSeq& doc, const Vocabulary& vocab) {
  BowDocument bow;
  for (const std::string& t : doc) {
    if (auto id = vocab.id_of(t)) {
      bow.counts[*id] += 1;
      bow.total_tokens += 1;
    }
  }
  return bow;
}

SplitCorpus split_corpus(const std::vector<BowDocument>& docs, SplitFractions fractions,
                         std::uint64_t seed) {
  double fsum = fractions.train + fractions.test + fractions.validation;
  if (!(fractions.train > 0.0) || !(fractions.test > 0.0) ||
      !(fractions.validation > 0.0) || std::abs(fsum - 1.0) > 1e-9)
    throw ConfigError("split_corpus: fractions must be positive and sum to 1");

  std::size_t n = docs.size();
  // Largest-remainder apportionment keeps each split within one
  // document of its exact share.
  double shares[3] = {fractions.train * n, fractions.test * n, fractions.validation * n};
  std::size_t sizes[3];
  double rema[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(std::floor(shares[i]));
    rema[i] = shares[i] - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::size_t order[3] = {0, 1, 2};
  std::stable_sort(std::begin(order), std::end(order),
                   [&](std::size_t a, std::size_t b) { return rema[a] > rema[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) sizes[order[i % 3]] += 1;

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(perm);

  SplitCorpus split;
  std::size_t pos = 0;
  auto take = [&](std::size_t count, std::vector<BowDocument>& dst,
                  std::vector<std::size_t>& ids, bool drop_short) {
    for (std::size_t i = 0; i < count; ++i, ++pos) {
      const BowDocument& d = docs[perm[pos]];
      if (drop_short && d.total_tokens < 2) continue;
      dst.push_back(d);
      ids.push_back(perm[pos]);
    }
  };
  take(sizes[0], split.train, split.train_ids, false);
  take(sizes[1], split.test, split.test_ids, true);
  take(sizes[2], split.validation, split.validation_ids, true);

  if (split.train.empty() || split.test.empty() || split.validation.empty())
    throw InsufficientDocuments(
        "split_corpus: a split is empty (corpus of " + std::to_string(n) + " documents)");
  return split;
}

CompletionPair completion_split(const BowDocument& doc, Rng& rng) {
  if (doc.total_tokens < 2)
    throw TooShort("completion_split: document has " +
                   std::to_string(doc.total_tokens) + " tokens");
  std::vector<TermId> tokens;
  tokens.reserve(doc.total_tokens);
  for (const auto& [id, count] : doc.counts)
    for (std::uint32_t i = 0; i < count; ++i) tokens.push_back(id);
  rng.shuffle(tokens);
  std::size_t observed_n = (tokens.size() + 1) / 2;
  CompletionPair pair;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    BowDocument& half = i < observed_n ? pair.observed_half : pair.held_out_half;
    half.counts[tokens[i]] += 1;
    half.total_tokens += 1;
  }
  return pair;
}

CompletionPair completion_split(const BowDocument& doc, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "completion");
  return completion_split(doc, rng);
}

std::vector<std::string> read_raw_corpus(const std::string& path) {
  std::vector<std::string> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".txt")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      std::ifstream in(f);
      if (!in) throw ConfigError("cannot read corpus file: " + f.string());
      std::ostringstream body;
      body << in.rdbuf();
      docs.push_back(body.str());
    }
  } else {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read corpus file: " + path);
    std::string line;
    while (std::getline(in, line)) docs.push_back(line);
  }
  return docs;
}

std::set<std::string> read_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read stop-word file: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write vocabulary file: " + path);
  for (const std::string& t : vocab.terms) out << t << '\n';
}

Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab.index.emplace(line, vocab.terms.size());
    vocab.terms.push_back(line);
  }
  if (vocab.terms.empty()) throw EmptyVocabulary("vocabulary file is empty: " + path);
  return vocab;
}

void write_bow_jsonl(const std::vector<BowDocument>& docs,
                     const std::vector<std::size_t>& ids, const std::string& path) {
  if (docs.size() != ids.size())
    throw ShapeMismatch("write_bow_jsonl: id count does not match document count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write bow file: " + path);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    json counts = json::object();
    for (const auto& [id, count] : docs[i].counts) counts[std::to_string(id)] = count;
    json line = {{"id", ids[i]}, {"counts", counts}};
    out << line.dump() << '\n';
  }
}

std::vector<BowDocument> read_bow_jsonl(const std::string& path,
                                        std::vector<std::size_t>* ids) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read bow file: " + path);
  std::vector<BowDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorruptFile(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    BowDocument doc;
    for (const auto& [key, value] : j.at("counts").items()) {
      TermId id = static_cast<TermId>(std::stoull(key));
      std::uint32_t count = value.get<std::uint32_t>();
      doc.counts[id] = count;
      doc.total_tokens += count;
    }
    docs.push_back(std::move(doc));
    if (ids) ids->push_back(j.at("id").get<std::size_t>());
  }
  return docs;
}

}  // namespace etm
