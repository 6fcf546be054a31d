#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "etm/corpus.hpp"

using namespace etm;

namespace {

std::vector<TokenSeq> toks(std::initializer_list<TokenSeq> docs) { return docs; }

BowDocument bow(std::initializer_list<std::pair<TermId, std::uint32_t>> counts) {
  BowDocument d;
  for (auto [id, c] : counts) {
    d.counts[id] = c;
    d.total_tokens += c;
  }
  return d;
}

BowDocument random_doc(std::mt19937_64& gen, std::size_t vocab, std::size_t max_count) {
  std::uniform_int_distribution<std::size_t> nterms(1, vocab);
  std::uniform_int_distribution<std::uint32_t> count(1, static_cast<std::uint32_t>(max_count));
  BowDocument d;
  std::size_t n = nterms(gen);
  for (std::size_t i = 0; i < n; ++i) {
    TermId id = std::uniform_int_distribution<TermId>(0, vocab - 1)(gen);
    std::uint32_t c = count(gen);
    d.counts[id] += c;
    d.total_tokens += c;
  }
  return d;
}

}  // namespace

TEST_CASE("tokenize basic rules") {
  std::set<std::string> stop = {"the"};
  CHECK(tokenize("The cat sat.", &stop) == TokenSeq{"cat", "sat"});
  CHECK(tokenize("") == TokenSeq{});
  std::set<std::string> a = {"a"};
  CHECK(tokenize("a a a", &a) == TokenSeq{});
  // lowercasing, separators, short-token rule
  CHECK(tokenize("Dogs&CATS; 42 ok x") == TokenSeq{"dogs", "cats", "ok"});
  CHECK(tokenize("don't") == TokenSeq{"don"});
}

TEST_CASE("tokenize is deterministic") {
  std::string text = "Some Mixed-Case text, with 3 numbers and punctuation!";
  CHECK(tokenize(text) == tokenize(text));
}

TEST_CASE("build_vocabulary document-frequency thresholds") {
  auto docs = toks({{"a", "b"}, {"a", "c"}, {"a"}});
  Vocabulary v1 = build_vocabulary(docs, 2, 1.0);
  CHECK(v1.terms == std::vector<std::string>{"a"});

  Vocabulary v2 = build_vocabulary(docs, 1, 0.5);
  CHECK(v2.terms == std::vector<std::string>{"b", "c"});

  Vocabulary v3 = build_vocabulary(toks({{"a"}}), 1, 1.0);
  CHECK(v3.terms == std::vector<std::string>{"a"});

  CHECK_THROWS_AS(build_vocabulary(docs, 4, 1.0), EmptyVocabulary);
}

TEST_CASE("vocabulary ids are dense, lexicographic, round trip") {
  auto docs = toks({{"zebra", "apple", "mango"}, {"apple", "zebra"}, {"mango"}});
  Vocabulary v = build_vocabulary(docs, 1, 1.0);
  CHECK(v.terms == std::vector<std::string>{"apple", "mango", "zebra"});
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(*v.id_of(v.terms[i]) == i);
  CHECK(v.doc_freq.size() == v.size());
  CHECK(v.doc_freq[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("build_vocabulary is monotone in min_docs") {
  std::mt19937_64 gen(7);
  std::vector<std::string> pool = {"ant", "bee", "cat", "dog", "elk", "fox", "gnu"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TokenSeq> docs(8);
    for (auto& d : docs) {
      std::size_t n = 1 + gen() % 5;
      for (std::size_t i = 0; i < n; ++i) d.push_back(pool[gen() % pool.size()]);
    }
    for (std::size_t lo = 1; lo < 4; ++lo) {
      std::set<std::string> small, big;
      try {
        for (auto& t : build_vocabulary(docs, lo + 1, 1.0).terms) small.insert(t);
      } catch (const EmptyVocabulary&) {
      }
      for (auto& t : build_vocabulary(docs, lo, 1.0).terms) big.insert(t);
      for (const auto& t : small) CHECK(big.count(t) == 1);
    }
  }
}

TEST_CASE("to_bow counts and drops out-of-vocabulary tokens") {
  Vocabulary v;
  v.terms = {"cat", "dog"};
  v.index = {{"cat", 0}, {"dog", 1}};
  BowDocument d = to_bow({"cat", "cat", "dog"}, v);
  CHECK(d.counts.at(0) == 2);
  CHECK(d.counts.at(1) == 1);
  CHECK(d.total_tokens == 3);

  BowDocument oov = to_bow({"zebra"}, v);
  CHECK(oov.counts.empty());
  CHECK(oov.total_tokens == 0);

  BowDocument empty = to_bow({}, v);
  CHECK(empty.total_tokens == 0);
}

TEST_CASE("to_bow total matches count sum over random docs") {
  std::mt19937_64 gen(13);
  Vocabulary v;
  for (char c = 'a'; c <= 'j'; ++c) {
    v.index.emplace(std::string(1, c), v.terms.size());
    v.terms.emplace_back(1, c);
  }
  for (int trial = 0; trial < 50; ++trial) {
    TokenSeq doc;
    std::size_t n = gen() % 30;
    for (std::size_t i = 0; i < n; ++i)
      doc.push_back(std::string(1, static_cast<char>('a' + gen() % 14)));  // some OOV
    BowDocument b = to_bow(doc, v);
    std::uint64_t sum = 0;
    for (auto& [id, c] : b.counts) {
      CHECK(id < v.size());
      sum += c;
    }
    CHECK(sum == b.total_tokens);
  }
}

TEST_CASE("split_corpus sizes and determinism") {
  std::vector<BowDocument> docs;
  for (std::size_t i = 0; i < 100; ++i) docs.push_back(bow({{i % 7, 2}, {(i + 1) % 7, 1}}));
  SplitCorpus s = split_corpus(docs, {0.85, 0.10, 0.05}, 7);
  CHECK(s.train.size() == 85);
  CHECK(s.test.size() == 10);
  CHECK(s.validation.size() == 5);

  SplitCorpus again = split_corpus(docs, {0.85, 0.10, 0.05}, 7);
  CHECK(s.train_ids == again.train_ids);
  CHECK(s.test_ids == again.test_ids);
  CHECK(s.validation_ids == again.validation_ids);

  // splits are disjoint and cover distinct source documents
  std::set<std::size_t> seen;
  for (auto* ids : {&s.train_ids, &s.test_ids, &s.validation_ids})
    for (std::size_t id : *ids) CHECK(seen.insert(id).second);
}

TEST_CASE("split_corpus uniform three-way and failure cases") {
  std::vector<BowDocument> three = {bow({{0, 2}}), bow({{1, 2}}), bow({{2, 2}})};
  SplitCorpus s = split_corpus(three, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0);
  CHECK(s.train.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(s.validation.size() == 1);

  std::vector<BowDocument> two = {bow({{0, 2}}), bow({{1, 2}})};
  CHECK_THROWS_AS(split_corpus(two, {0.85, 0.10, 0.05}, 0), InsufficientDocuments);
}

TEST_CASE("split_corpus drops one-token documents from test and validation") {
  std::vector<BowDocument> docs;
  for (std::size_t i = 0; i < 40; ++i)
    docs.push_back(i % 2 == 0 ? bow({{0, 1}}) : bow({{0, 2}, {1, 3}}));
  SplitCorpus s = split_corpus(docs, {0.5, 0.25, 0.25}, 3);
  for (const BowDocument& d : s.test) CHECK(d.total_tokens >= 2);
  for (const BowDocument& d : s.validation) CHECK(d.total_tokens >= 2);
  // train keeps everything it was assigned
  CHECK(s.train.size() == 20);
}

TEST_CASE("completion_split conserves the token multiset") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 100; ++trial) {
    BowDocument doc = random_doc(gen, 9, 4);
    if (doc.total_tokens < 2) continue;
    CompletionPair p = completion_split(doc, trial);
    CHECK(p.observed_half.total_tokens == (doc.total_tokens + 1) / 2);
    CHECK(p.observed_half.total_tokens + p.held_out_half.total_tokens == doc.total_tokens);
    CHECK(!p.observed_half.counts.empty());
    CHECK(!p.held_out_half.counts.empty());
    std::map<TermId, std::uint32_t> merged = p.observed_half.counts;
    for (auto& [id, c] : p.held_out_half.counts) merged[id] += c;
    CHECK(merged == doc.counts);
  }
}

TEST_CASE("completion_split edge cases") {
  CHECK_THROWS_AS(completion_split(bow({{0, 1}}), 0), TooShort);
  CompletionPair p = completion_split(bow({{0, 2}}), 5);
  CHECK(p.observed_half.counts.at(0) == 1);
  CHECK(p.held_out_half.counts.at(0) == 1);
}

TEST_CASE("bow jsonl round trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "etm_corpus_test";
  fs::create_directories(dir);
  std::vector<BowDocument> docs = {bow({{0, 2}, {3, 1}}), bow({{1, 5}})};
  std::vector<std::size_t> ids = {4, 9};
  std::string path = (dir / "docs.jsonl").string();
  write_bow_jsonl(docs, ids, path);
  std::vector<std::size_t> rids;
  std::vector<BowDocument> rdocs = read_bow_jsonl(path, &rids);
  CHECK(rids == ids);
  REQUIRE(rdocs.size() == 2);
  CHECK(rdocs[0].counts == docs[0].counts);
  CHECK(rdocs[1].total_tokens == 5);

  std::ofstream bad(dir / "bad.jsonl");
  bad << "{not json\n";
  bad.close();
  CHECK_THROWS_AS(read_bow_jsonl((dir / "bad.jsonl").string()), CorruptFile);
  fs::remove_all(dir);
}

TEST_CASE("vocabulary file round trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "etm_vocab_test";
  fs::create_directories(dir);
  Vocabulary v;
  v.terms = {"alpha", "beta", "gamma"};
  for (std::size_t i = 0; i < v.terms.size(); ++i) v.index[v.terms[i]] = i;
  std::string path = (dir / "vocab.txt").string();
  write_vocabulary(v, path);
  Vocabulary r = read_vocabulary(path);
  CHECK(r.terms == v.terms);
  CHECK(*r.id_of("beta") == 1);
  CHECK(r.hash() == v.hash());
  fs::remove_all(dir);
}

TEST_CASE("raw corpus: line files and directories") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "etm_raw_test";
  fs::create_directories(dir / "docs");
  {
    std::ofstream f(dir / "corpus.txt");
    f << "first doc\nsecond doc\n";
    std::ofstream a(dir / "docs" / "b.txt");
    a << "from b";
    std::ofstream b(dir / "docs" / "a.txt");
    b << "from a";
  }
  auto lines = read_raw_corpus((dir / "corpus.txt").string());
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "first doc");
  auto files = read_raw_corpus((dir / "docs").string());
  REQUIRE(files.size() == 2);
  CHECK(files[0] == "from a");  // sorted by filename
  CHECK(files[1] == "from b");
  fs::remove_all(dir);
}
