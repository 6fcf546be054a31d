#include "etm/embeddings.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "etm/adam.hpp"

namespace etm {

std::vector<double> EmbeddingMatrix::column(TermId v) const {
  std::size_t l = dim(), n = vocab_size();
  if (v >= n) throw ShapeMismatch("embedding column out of range");
  std::vector<double> out(l);
  for (std::size_t i = 0; i < l; ++i) out[i] = rho.data[i * n + v];
  return out;
}

std::vector<double> cbow_context(const std::vector<TermId>& tokens, std::size_t position,
                                 std::size_t window, const ContextEmbeddings& context) {
  if (window < 1) throw ConfigError("cbow_context: window must be >= 1");
  if (position >= tokens.size()) throw ShapeMismatch("cbow_context: position out of range");
  std::size_t l = context.alpha_ctx.shape[0], v = context.alpha_ctx.shape[1];
  std::vector<double> out(l, 0.0);
  std::size_t lo = position > window ? position - window : 0;
  std::size_t hi = std::min(tokens.size(), position + window + 1);
  for (std::size_t p = lo; p < hi; ++p) {
    if (p == position) continue;
    TermId t = tokens[p];
    if (t >= v) throw ShapeMismatch("cbow_context: term id out of range");
    for (std::size_t i = 0; i < l; ++i) out[i] += context.alpha_ctx.data[i * v + t];
  }
  return out;
}

double cbow_loss(const std::vector<TermId>& tokens, const EmbeddingMatrix& rho,
                 const ContextEmbeddings& context, std::size_t window) {
  std::size_t l = rho.dim(), v = rho.vocab_size();
  double total = 0.0;
  std::vector<double> logits(v);
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    std::vector<double> ctx = cbow_context(tokens, n, window, context);
    for (std::size_t j = 0; j < v; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < l; ++i) acc += rho.rho.data[i * v + j] * ctx[i];
      logits[j] = acc;
    }
    double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double x : logits) s += std::exp(x - m);
    total -= logits[tokens[n]] - m - std::log(s);
  }
  if (!std::isfinite(total)) throw NonFinite("cbow_loss produced a non-finite value");
  return total;
}

CbowBatch make_cbow_batch(const std::vector<std::vector<TermId>>& docs,
                          std::span<const std::pair<std::size_t, std::size_t>> positions,
                          std::size_t window, std::size_t vocab_size) {
  CbowBatch batch;
  batch.context_counts = Tensor::zeros({positions.size(), vocab_size});
  batch.targets.reserve(positions.size());
  for (std::size_t n = 0; n < positions.size(); ++n) {
    const auto& [d, pos] = positions[n];
    const std::vector<TermId>& tokens = docs[d];
    std::size_t lo = pos > window ? pos - window : 0;
    std::size_t hi = std::min(tokens.size(), pos + window + 1);
    for (std::size_t p = lo; p < hi; ++p)
      if (p != pos) batch.context_counts.data[n * vocab_size + tokens[p]] += 1.0;
    batch.targets.push_back(tokens[pos]);
  }
  return batch;
}

Tape::Var cbow_loss_graph(Tape& tape, Tape::Var alpha_vl, Tape::Var rho_lv,
                          const CbowBatch& batch) {
  Tape::Var ctx = tape.matmul(tape.leaf(batch.context_counts), alpha_vl);  // {N, L}
  Tape::Var logits = tape.matmul(ctx, rho_lv);                             // {N, V}
  Tape::Var picked = tape.gather_rows_sum(tape.log_softmax(logits), batch.targets);
  return tape.scale(picked, -1.0 / static_cast<double>(batch.targets.size()));
}

CbowTrainResult train_cbow(const std::vector<std::vector<TermId>>& docs,
                           const Vocabulary& vocab, const CbowConfig& config) {
  if (docs.empty()) throw EmptyCorpus("train_cbow: no documents");
  if (config.dim < 2) throw ConfigError("train_cbow: dim must be >= 2");
  if (config.window < 1) throw ConfigError("train_cbow: window must be >= 1");
  std::size_t v = vocab.size(), l = config.dim;

  // Positions with at least one context neighbor.
  std::vector<std::pair<std::size_t, std::size_t>> positions;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (TermId t : docs[d])
      if (t >= v) throw ShapeMismatch("train_cbow: term id out of range");
    if (docs[d].size() < 2) continue;
    for (std::size_t p = 0; p < docs[d].size(); ++p) positions.emplace_back(d, p);
  }
  if (positions.empty()) throw EmptyCorpus("train_cbow: no trainable positions");

  Rng init = Rng::stream(config.seed, "cbow-init");
  double bound = 0.5 / static_cast<double>(l);
  Tensor alpha_vl = Tensor::zeros({v, l});
  Tensor rho_lv = Tensor::zeros({l, v});
  for (double& x : alpha_vl.data) x = init.uniform(-bound, bound);
  for (double& x : rho_lv.data) x = init.uniform(-bound, bound);

  const Tensor* param_ptrs[2] = {&alpha_vl, &rho_lv};
  std::vector<bool> decay = {false, false};
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  AdamState state(adam_cfg, param_ptrs, decay);
  Tensor* params[2] = {&alpha_vl, &rho_lv};

  Rng shuffle = Rng::stream(config.seed, "cbow-shuffle");
  std::vector<double> epoch_loss;
  std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle.shuffle(positions);
    double total = 0.0;
    for (std::size_t start = 0; start < positions.size(); start += batch_size) {
      std::size_t count = std::min(batch_size, positions.size() - start);
      CbowBatch batch = make_cbow_batch(
          docs, std::span(positions).subspan(start, count), config.window, v);
      Tape tape(config.threads);
      Tape::Var av = tape.leaf(alpha_vl);
      Tape::Var rv = tape.leaf(rho_lv);
      Tape::Var loss = cbow_loss_graph(tape, av, rv, batch);
      total += tape.value(loss).data[0] * static_cast<double>(count);
      std::array<Tape::Var, 2> leaves{av, rv};
      Tape::GradResult grads = tape.backward(loss, leaves);
      adam_step(params, grads.grads, state);
    }
    epoch_loss.push_back(total / static_cast<double>(positions.size()));
  }

  CbowTrainResult result;
  result.embeddings.rho = std::move(rho_lv);
  result.embeddings.vocab = vocab;
  result.context.alpha_ctx = Tensor::zeros({l, v});
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < v; ++j)
      result.context.alpha_ctx.data[i * v + j] = alpha_vl.data[j * l + i];
  result.epoch_loss = std::move(epoch_loss);
  return result;
}

namespace {

std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& path) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DimensionMismatch(path + ": malformed float '" + s + "'");
  return x;
}

}  // namespace

void save_embeddings(const EmbeddingMatrix& matrix, const std::string& path) {
  std::size_t l = matrix.dim(), v = matrix.vocab_size();
  if (matrix.vocab.size() != v)
    throw DimensionMismatch("save_embeddings: vocabulary size does not match columns");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write embedding file: " + path);
  out << v << ' ' << l << '\n';
  for (std::size_t j = 0; j < v; ++j) {
    out << matrix.vocab.terms[j];
    for (std::size_t i = 0; i < l; ++i)
      out << ' ' << format_double(matrix.rho.data[i * v + j]);
    out << '\n';
  }
}

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DimensionMismatch(path + ": missing header");
  std::istringstream header(line);
  std::size_t file_v = 0, l = 0;
  if (!(header >> file_v >> l) || l == 0)
    throw DimensionMismatch(path + ": malformed header '" + line + "'");

  EmbeddingMatrix matrix;
  matrix.vocab = vocab;
  matrix.rho = Tensor::zeros({l, vocab.size()});
  std::vector<bool> seen(vocab.size(), false);
  std::size_t body_lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++body_lines;
    std::istringstream ls(line);
    std::string term;
    ls >> term;
    std::vector<std::string> fields;
    std::string f;
    while (ls >> f) fields.push_back(f);
    if (fields.size() != l)
      throw DimensionMismatch(path + ": expected " + std::to_string(l) +
                              " values for term '" + term + "', got " +
                              std::to_string(fields.size()));
    auto id = vocab.id_of(term);
    if (!id) continue;  // extra file terms are ignored
    for (std::size_t i = 0; i < l; ++i)
      matrix.rho.data[i * vocab.size() + *id] = parse_double(fields[i], path);
    seen[*id] = true;
  }
  if (body_lines != file_v)
    throw DimensionMismatch(path + ": header declares " + std::to_string(file_v) +
                            " terms but body has " + std::to_string(body_lines));
  std::vector<std::string> missing;
  for (std::size_t j = 0; j < vocab.size(); ++j)
    if (!seen[j]) missing.push_back(vocab.terms[j]);
  if (!missing.empty())
    throw MissingTerms(missing, path + ": " + std::to_string(missing.size()) +
                                    " vocabulary terms missing from embedding file");
  check_finite(matrix.rho, "load_embeddings");
  return matrix;
}

std::vector<std::string> nearest_neighbors(const EmbeddingMatrix& matrix,
                                           const std::string& query, std::size_t k) {
  auto qid = matrix.vocab.id_of(query);
  if (!qid) throw UnknownTerm(query);
  std::size_t v = matrix.vocab_size();
  if (k >= v) throw ConfigError("nearest_neighbors: k must be < V");
  std::vector<double> q = matrix.column(*qid);
  double qn = 0.0;
  for (double x : q) qn += x * x;
  qn = std::sqrt(qn);

  std::vector<std::pair<double, TermId>> scored;
  scored.reserve(v - 1);
  for (TermId j = 0; j < v; ++j) {
    if (j == *qid) continue;
    std::vector<double> c = matrix.column(j);
    double dot = 0.0, cn = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      dot += q[i] * c[i];
      cn += c[i] * c[i];
    }
    cn = std::sqrt(cn);
    double denom = qn * cn;
    scored.emplace_back(denom > 0.0 ? dot / denom : 0.0, j);
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(matrix.vocab.terms[scored[i].second]);
  return out;
}

}  // namespace etm
