#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etm/corpus.hpp"
#include "etm/embeddings.hpp"
#include "etm/tape.hpp"

namespace etm {

// K topic embeddings, one L-dimensional row per topic.
struct TopicEmbeddings {
  Tensor alpha;  // {K, L}
  std::size_t count() const { return alpha.rank() == 2 ? alpha.shape[0] : 0; }
  std::size_t dim() const { return alpha.rank() == 2 ? alpha.shape[1] : 0; }
};

// Encoder nu: V -> hidden -> hidden -> hidden (ReLU) with linear heads
// for the posterior mean and log-variance. Weights are {in, out}.
struct InferenceNetParams {
  Tensor w1, b1, w2, b2, w3, b3;
  Tensor w_mu, b_mu, w_lv, b_lv;

  std::size_t input_dim() const { return w1.shape[0]; }
  std::size_t hidden_dim() const { return w1.shape[1]; }
  std::size_t output_dim() const { return w_mu.shape[1]; }
};

enum class TrainMode { labeled, joint };

struct TrainingConfig {
  std::size_t topics = 50;        // K
  std::size_t embed_dim = 300;    // L
  std::size_t hidden_dim = 800;
  std::size_t minibatch = 1000;
  double learning_rate = 0.002;
  double weight_decay = 1.2e-6;   // on encoder parameters only
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::joint;
  std::size_t patience = 0;       // early stop on validation ELBO; 0 = off
  int threads = 1;
};

struct Posterior {
  std::vector<double> mu;
  std::vector<double> log_var;
};

struct EtmModel {
  Tensor rho;  // {L, V}
  bool rho_trainable = true;
  TopicEmbeddings alpha;
  InferenceNetParams encoder;
  TrainingConfig config;
  std::uint64_t vocab_hash = 0;

  std::size_t vocab_size() const { return rho.rank() == 2 ? rho.shape[1] : 0; }
  std::size_t embed_dim() const { return rho.rank() == 2 ? rho.shape[0] : 0; }
  std::size_t topic_count() const { return alpha.count(); }
};

// Log arguments inside the ELBO and the completion likelihood are
// clamped at this floor.
inline constexpr double kLogFloor = 1e-12;

// Fresh model; labeled mode takes the pre-fitted embeddings and freezes
// them, joint mode initializes rho from the seed.
EtmModel init_model(const TrainingConfig& config, std::size_t vocab_size,
                    std::uint64_t vocab_hash, const EmbeddingMatrix* pretrained);

// x_d[v] = count_v / N_d. Throws EmptyDocument when N_d = 0.
Tensor normalize_bow(const BowDocument& doc, std::size_t vocab_size);
// Rows of normalized bows / raw counts for a minibatch.
Tensor normalize_bow_batch(std::span<const BowDocument> docs, std::size_t vocab_size);
Tensor counts_matrix(std::span<const BowDocument> docs, std::size_t vocab_size);

Posterior encode(const EtmModel& model, const Tensor& x);
// mu and log-var as {B, K} for a batch of normalized bows {B, V}.
std::pair<Tensor, Tensor> encode_batch(const EtmModel& model, const Tensor& x);

// beta, recomputed from the current alpha and rho: row k is
// softmax(rho^T alpha_k) over the vocabulary.
Tensor topics(const EtmModel& model);

// p(w = v | theta) = sum_k theta_k beta_kv.
double word_likelihood(std::span<const double> theta, const Tensor& beta, TermId v);

// Variational-mean topic proportions: softmax(mu_d).
std::vector<double> infer_theta(const EtmModel& model, const BowDocument& doc);

struct ElboParts {
  double elbo = 0.0;    // (D/|B|) * (loglik - kl)
  double loglik = 0.0;  // (D/|B|) * sum_d sum_n count * log(theta' beta)
  double kl = 0.0;      // (D/|B|) * sum_d KL(q(delta_d) || N(0, I))
};

// One-sample ELBO estimate for a minibatch; eps is {B, K} (standard
// normal draws, one row per document). corpus_size sets the data
// subsampling scale D/|B|.
ElboParts elbo_minibatch(const EtmModel& model, std::span<const BowDocument> batch,
                         std::size_t corpus_size, const Tensor& eps);

struct EpochRecord {
  std::size_t epoch = 0;
  double elbo = 0.0;
  double kl = 0.0;
  std::optional<double> val_elbo;
};

// Adam on -ELBO over shuffled minibatches. In labeled mode rho is
// excluded from the parameter set. Documents with no in-vocabulary
// tokens are skipped. NonFinite failures carry the iteration index.
std::vector<EpochRecord> train(EtmModel& model, const SplitCorpus& corpus,
                               const TrainingConfig& config);

// --- tape plumbing shared by train, encode and the gradient tests ---

struct EtmLeaves {
  Tape::Var rho, alpha;
  Tape::Var w1, b1, w2, b2, w3, b3, w_mu, b_mu, w_lv, b_lv;
};

EtmLeaves make_leaves(Tape& tape, const EtmModel& model);

// Trainable parameters in checkpoint order; decay flags mark the
// encoder (nu) parameters. Labeled mode omits rho.
struct ParamRefs {
  std::vector<Tensor*> values;
  std::vector<bool> decay;
  std::vector<std::string> names;
};
ParamRefs trainable_params(EtmModel& model, TrainMode mode);
std::vector<Tape::Var> leaf_vars(const EtmLeaves& leaves, TrainMode mode);

std::pair<Tape::Var, Tape::Var> encoder_forward(Tape& tape, const EtmLeaves& leaves,
                                                Tape::Var x);

struct EtmGraph {
  Tape::Var mu, log_var, theta, beta;
  Tape::Var loglik, kl_sum;  // unscaled sums over the minibatch
  Tape::Var elbo;            // scaled by D/|B|
};

EtmGraph build_elbo_graph(Tape& tape, const EtmLeaves& leaves, const Tensor& x_norm,
                          const Tensor& counts, double scale, const Tensor& eps);

}  // namespace etm
