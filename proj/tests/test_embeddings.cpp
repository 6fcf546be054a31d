#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "etm/embeddings.hpp"
#include "support/oracles.hpp"

using namespace etm;

namespace {

Vocabulary make_vocab(std::vector<std::string> terms) {
  Vocabulary v;
  v.terms = std::move(terms);
  for (std::size_t i = 0; i < v.terms.size(); ++i) v.index[v.terms[i]] = i;
  return v;
}

ContextEmbeddings ctx_from(std::size_t l, std::size_t v, std::vector<double> data) {
  return ContextEmbeddings{Tensor::matrix(l, v, std::move(data))};
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("cbow_context sums neighbors within the window") {
  // L=2, V=3; column v holds (v+1, 10(v+1))
  ContextEmbeddings ctx = ctx_from(2, 3, {1, 2, 3, 10, 20, 30});

  std::vector<double> single = cbow_context({1}, 0, 1, ctx);
  CHECK(single == std::vector<double>{0, 0});

  std::vector<double> mid = cbow_context({0, 1, 2}, 1, 1, ctx);
  CHECK(mid[0] == doctest::Approx(1 + 3));
  CHECK(mid[1] == doctest::Approx(10 + 30));

  std::vector<double> twin = cbow_context({0, 0}, 0, 1, ctx);
  CHECK(twin[0] == doctest::Approx(1));
  CHECK(twin[1] == doctest::Approx(10));

  // wider window covers both sides, excludes the position itself
  std::vector<double> wide = cbow_context({0, 1, 2, 1}, 1, 4, ctx);
  CHECK(wide[0] == doctest::Approx(1 + 3 + 2));
}

TEST_CASE("cbow_loss closed forms") {
  // V=1: softmax over a single term is 1, loss 0
  EmbeddingMatrix one;
  one.rho = Tensor::matrix(2, 1, {0.3, -0.7});
  one.vocab = make_vocab({"only"});
  ContextEmbeddings ctx1 = ctx_from(2, 1, {0.1, 0.2});
  CHECK(cbow_loss({0, 0, 0}, one, ctx1, 1) == doctest::Approx(0.0).epsilon(1e-14));

  // V=2 with zero context: uniform, ln 2 per token
  EmbeddingMatrix two;
  two.rho = Tensor::matrix(2, 2, {1, 0, 0, 1});
  two.vocab = make_vocab({"aa", "bb"});
  ContextEmbeddings zero_ctx = ctx_from(2, 2, {0, 0, 0, 0});
  CHECK(cbow_loss({0}, two, zero_ctx, 1) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // logits [1, 0], target 0 -> ln(1 + e^-1)
  // tokens [0, 0]: each position sees one neighbor '0'; rho columns
  // chosen so rho^T alpha_0 = [1, 0]
  EmbeddingMatrix m;
  m.rho = Tensor::matrix(1, 2, {1, 0});
  m.vocab = make_vocab({"aa", "bb"});
  ContextEmbeddings unit = ctx_from(1, 2, {1, 0});
  double expected = 2.0 * std::log(1.0 + std::exp(-1.0));  // two positions
  CHECK(cbow_loss({0, 0}, m, unit, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(std::log(1.0 + std::exp(-1.0)) == doctest::Approx(0.3132616875182228).epsilon(1e-15));
}

TEST_CASE("cbow loss: direct evaluation matches the training graph") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> d(-0.8, 0.8);
  std::size_t l = 3, v = 5;
  Tensor alpha_vl = Tensor::zeros({v, l});
  Tensor rho_lv = Tensor::zeros({l, v});
  for (double& x : alpha_vl.data) x = d(gen);
  for (double& x : rho_lv.data) x = d(gen);

  std::vector<std::vector<TermId>> docs = {{0, 3, 1, 4, 2, 0}};
  std::vector<std::pair<std::size_t, std::size_t>> positions;
  for (std::size_t p = 0; p < docs[0].size(); ++p) positions.emplace_back(0, p);
  CbowBatch batch = make_cbow_batch(docs, positions, 2, v);

  Tape tape;
  Tape::Var loss = cbow_loss_graph(tape, tape.leaf(alpha_vl), tape.leaf(rho_lv), batch);
  double graph_total = tape.value(loss).data[0] * static_cast<double>(positions.size());

  EmbeddingMatrix m;
  m.rho = rho_lv;
  m.vocab = make_vocab({"aa", "bb", "cc", "dd", "ee"});
  ContextEmbeddings ctx{Tensor::zeros({l, v})};
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < v; ++j) ctx.alpha_ctx.data[i * v + j] = alpha_vl.data[j * l + i];
  double direct = cbow_loss(docs[0], m, ctx, 2);
  CHECK(graph_total == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("cbow loss gradient matches finite differences") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  std::size_t l = 2, v = 4;
  std::vector<std::vector<TermId>> docs = {{0, 2, 1, 3, 2}};
  std::vector<std::pair<std::size_t, std::size_t>> positions;
  for (std::size_t p = 0; p < docs[0].size(); ++p) positions.emplace_back(0, p);
  CbowBatch batch = make_cbow_batch(docs, positions, 1, v);

  for (int trial = 0; trial < 5; ++trial) {
    Tensor alpha_vl = Tensor::zeros({v, l});
    Tensor rho_lv = Tensor::zeros({l, v});
    for (double& x : alpha_vl.data) x = d(gen);
    for (double& x : rho_lv.data) x = d(gen);

    auto f = [&](const std::vector<Tensor>& params) {
      Tape t;
      return t.value(cbow_loss_graph(t, t.leaf(params[0]), t.leaf(params[1]), batch))
          .data[0];
    };
    Tape tape;
    Tape::Var av = tape.leaf(alpha_vl), rv = tape.leaf(rho_lv);
    auto grads =
        tape.backward(cbow_loss_graph(tape, av, rv, batch), std::vector<Tape::Var>{av, rv});
    double err = oracle::max_grad_rel_error(f, {alpha_vl, rho_lv}, grads.grads);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("cbow_loss equals ln V per token when logits are equal") {
  EmbeddingMatrix m;
  m.rho = Tensor::matrix(2, 6, std::vector<double>(12, 0.37));  // equal columns
  m.vocab = make_vocab({"aa", "bb", "cc", "dd", "ee", "ff"});
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor ctx_t = Tensor::zeros({2, 6});
  for (double& x : ctx_t.data) x = d(gen);
  ContextEmbeddings ctx{ctx_t};
  std::vector<TermId> tokens = {0, 5, 2, 1};
  double loss = cbow_loss(tokens, m, ctx, 2);
  CHECK(loss == doctest::Approx(4.0 * std::log(6.0)).epsilon(1e-12));
  CHECK(loss >= 0.0);
}

TEST_CASE("train_cbow: epochs=0 returns the initialization") {
  std::vector<std::vector<TermId>> docs = {{0, 1, 0, 1}, {1, 0}};
  Vocabulary vocab = make_vocab({"aa", "bb"});
  CbowConfig cfg;
  cfg.dim = 4;
  cfg.window = 1;
  cfg.epochs = 0;
  cfg.seed = 42;
  CbowTrainResult r1 = train_cbow(docs, vocab, cfg);
  CbowTrainResult r2 = train_cbow(docs, vocab, cfg);
  CHECK(r1.epoch_loss.empty());
  CHECK(r1.embeddings.rho.data == r2.embeddings.rho.data);
  double bound = 0.5 / 4.0;
  for (double x : r1.embeddings.rho.data) CHECK(std::abs(x) <= bound);
}

TEST_CASE("train_cbow: epoch loss decreases on an alternating corpus") {
  std::vector<std::vector<TermId>> docs(20, std::vector<TermId>{0, 1, 0, 1, 0, 1, 0, 1});
  Vocabulary vocab = make_vocab({"aa", "bb"});
  CbowConfig cfg;
  cfg.dim = 4;
  cfg.window = 1;
  cfg.epochs = 10;
  cfg.batch_size = 1024;  // full batch keeps per-epoch averages smooth
  cfg.learning_rate = 0.05;
  cfg.seed = 1;
  CbowTrainResult r = train_cbow(docs, vocab, cfg);
  REQUIRE(r.epoch_loss.size() == 10);
  for (std::size_t e = 1; e < r.epoch_loss.size(); ++e)
    CHECK(r.epoch_loss[e] < r.epoch_loss[e - 1]);
}

TEST_CASE("train_cbow: co-occurring pairs end up closer in cosine") {
  // p(0), q(1) always together; r(2), s(3) always together; never across
  std::vector<std::vector<TermId>> docs;
  for (int i = 0; i < 100; ++i) {
    docs.push_back({0, 1, 0, 1, 0, 1});
    docs.push_back({2, 3, 2, 3, 2, 3});
  }
  Vocabulary vocab = make_vocab({"pp", "qq", "rr", "ss"});
  CbowConfig cfg;
  cfg.dim = 6;
  cfg.window = 3;
  cfg.epochs = 12;
  cfg.batch_size = 256;
  cfg.learning_rate = 0.02;
  cfg.seed = 17;
  CbowTrainResult r = train_cbow(docs, vocab, cfg);
  auto p = r.embeddings.column(0), q = r.embeddings.column(1), rr = r.embeddings.column(2);
  CHECK(cosine(p, q) > cosine(p, rr));
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("train_cbow is deterministic under a fixed seed") {
  std::vector<std::vector<TermId>> docs = {{0, 1, 2, 0}, {2, 1, 0, 2, 1}};
  Vocabulary vocab = make_vocab({"aa", "bb", "cc"});
  CbowConfig cfg;
  cfg.dim = 4;
  cfg.window = 2;
  cfg.epochs = 3;
  cfg.seed = 99;
  CbowTrainResult a = train_cbow(docs, vocab, cfg);
  CbowTrainResult b = train_cbow(docs, vocab, cfg);
  CHECK(a.embeddings.rho.data == b.embeddings.rho.data);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK_THROWS_AS(train_cbow({}, vocab, cfg), EmptyCorpus);
}

TEST_CASE("embedding file: parse, missing terms, dimension checks") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "etm_emb_test";
  fs::create_directories(dir);
  std::string path = (dir / "emb.txt").string();
  {
    std::ofstream f(path);
    f << "2 3\ncat 1 0 0\ndog 0 1 0\n";
  }
  Vocabulary vocab = make_vocab({"cat", "dog"});
  EmbeddingMatrix m = load_embeddings(path, vocab);
  CHECK(m.dim() == 3);
  CHECK(m.vocab_size() == 2);
  CHECK(m.column(0) == std::vector<double>{1, 0, 0});
  CHECK(m.column(1) == std::vector<double>{0, 1, 0});

  Vocabulary bigger = make_vocab({"cat", "dog", "emu"});
  try {
    load_embeddings(path, bigger);
    FAIL("expected MissingTerms");
  } catch (const MissingTerms& e) {
    CHECK(e.missing == std::vector<std::string>{"emu"});
  }

  {
    std::ofstream f(path);
    f << "3 3\ncat 1 0 0\ndog 0 1 0\n";  // header V != body lines
  }
  CHECK_THROWS_AS(load_embeddings(path, vocab), DimensionMismatch);

  {
    std::ofstream f(path);
    f << "2 3\ncat 1 0\ndog 0 1 0\n";  // wrong value count
  }
  CHECK_THROWS_AS(load_embeddings(path, vocab), DimensionMismatch);
  fs::remove_all(dir);
}

TEST_CASE("embedding file round trip is exact") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "etm_emb_rt";
  fs::create_directories(dir);
  std::string path = (dir / "emb.txt").string();
  Vocabulary vocab = make_vocab({"ant", "bee", "cow"});
  EmbeddingMatrix m;
  m.vocab = vocab;
  std::mt19937_64 gen(23);
  std::normal_distribution<double> d(0.0, 1.0);
  m.rho = Tensor::zeros({4, 3});
  for (double& x : m.rho.data) x = d(gen);
  save_embeddings(m, path);
  EmbeddingMatrix r = load_embeddings(path, vocab);
  CHECK(r.rho.data == m.rho.data);  // shortest-round-trip formatting
  fs::remove_all(dir);
}

TEST_CASE("nearest_neighbors ranking and errors") {
  Vocabulary vocab = make_vocab({"aa", "bb", "cc"});
  EmbeddingMatrix m;
  m.vocab = vocab;

  // identical a and b, orthogonal c
  m.rho = Tensor::matrix(2, 3, {1, 1, 0, 0, 0, 1});
  CHECK(nearest_neighbors(m, "aa", 1) == std::vector<std::string>{"bb"});
  CHECK_THROWS_AS(nearest_neighbors(m, "zz", 1), UnknownTerm);
  CHECK_THROWS_AS(nearest_neighbors(m, "aa", 3), ConfigError);

  // hand cosine: a=[1,0], b=[0.9,0.1], c=[0,1]
  m.rho = Tensor::matrix(2, 3, {1, 0.9, 0, 0, 0.1, 1});
  CHECK(nearest_neighbors(m, "aa", 2) == std::vector<std::string>{"bb", "cc"});
}

TEST_CASE("nearest_neighbors is invariant to positive column rescaling") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_real_distribution<double> s(0.1, 5.0);
  Vocabulary vocab = make_vocab({"aa", "bb", "cc", "dd", "ee", "ff"});
  EmbeddingMatrix m;
  m.vocab = vocab;
  m.rho = Tensor::zeros({3, 6});
  for (double& x : m.rho.data) x = d(gen);
  EmbeddingMatrix scaled = m;
  for (std::size_t j = 0; j < 6; ++j) {
    double f = s(gen);
    for (std::size_t i = 0; i < 3; ++i) scaled.rho.data[i * 6 + j] *= f;
  }
  for (const std::string& q : vocab.terms)
    CHECK(nearest_neighbors(m, q, 3) == nearest_neighbors(scaled, q, 3));
}
