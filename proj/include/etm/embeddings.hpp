#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "etm/corpus.hpp"
#include "etm/tape.hpp"

namespace etm {

// L x V word embedding matrix; column v embeds term v of the bound
// vocabulary.
struct EmbeddingMatrix {
  Tensor rho;        // shape {L, V}
  Vocabulary vocab;  // binding: term id <-> column

  std::size_t dim() const { return rho.rank() == 2 ? rho.shape[0] : 0; }
  std::size_t vocab_size() const { return rho.rank() == 2 ? rho.shape[1] : 0; }
  // Embedding of term v as a length-L vector.
  std::vector<double> column(TermId v) const;
};

// Per-word context vectors, same shape contract as rho.
struct ContextEmbeddings {
  Tensor alpha_ctx;  // shape {L, V}
};

struct CbowConfig {
  std::size_t dim = 300;
  std::size_t window = 4;  // per side
  std::size_t epochs = 5;
  std::size_t batch_size = 256;
  double learning_rate = 0.002;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct CbowTrainResult {
  EmbeddingMatrix embeddings;
  ContextEmbeddings context;
  std::vector<double> epoch_loss;  // mean loss per token position
};

// Sum of context vectors over up to `window` positions on each side of
// `position`, excluding the position itself.
std::vector<double> cbow_context(const std::vector<TermId>& tokens, std::size_t position,
                                 std::size_t window, const ContextEmbeddings& context);

// Total negative log-likelihood of the document under the
// full-vocabulary softmax; direct evaluation, no tape.
double cbow_loss(const std::vector<TermId>& tokens, const EmbeddingMatrix& rho,
                 const ContextEmbeddings& context, std::size_t window);

// One minibatch of prediction positions in tape-ready form: row n of
// context_counts holds the multiplicity of each vocabulary term in the
// context window of position n.
struct CbowBatch {
  Tensor context_counts;             // {N, V}
  std::vector<std::size_t> targets;  // w_dn per row
};

CbowBatch make_cbow_batch(const std::vector<std::vector<TermId>>& docs,
                          std::span<const std::pair<std::size_t, std::size_t>> positions,
                          std::size_t window, std::size_t vocab_size);

// Mean per-position negative log-likelihood for a batch, on the tape.
// alpha_vl is the context matrix as {V, L}; rho_lv the embeddings {L, V}.
Tape::Var cbow_loss_graph(Tape& tape, Tape::Var alpha_vl, Tape::Var rho_lv,
                          const CbowBatch& batch);

// Adam on the exact softmax objective over minibatches of token
// positions. Deterministic given config.seed.
CbowTrainResult train_cbow(const std::vector<std::vector<TermId>>& docs,
                           const Vocabulary& vocab, const CbowConfig& config);

// word2vec-style text format: header "V L", then one line per term.
void save_embeddings(const EmbeddingMatrix& matrix, const std::string& path);

// Columns aligned to vocab ids; file terms outside the vocabulary are
// ignored. Throws MissingTerms / DimensionMismatch.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab);

// Top-k terms by cosine similarity to the query term, excluding the
// query; ties broken by term id. Throws UnknownTerm.
std::vector<std::string> nearest_neighbors(const EmbeddingMatrix& matrix,
                                           const std::string& query, std::size_t k);

}  // namespace etm
