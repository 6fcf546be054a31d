#include "etm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "etm/adam.hpp"

namespace etm {

namespace {

void validate_config(const TrainingConfig& c) {
  if (c.topics < 2) throw ConfigError("config: topics (K) must be >= 2");
  if (c.embed_dim < 1) throw ConfigError("config: embed_dim (L) must be >= 1");
  if (c.hidden_dim < 1) throw ConfigError("config: hidden_dim must be >= 1");
  if (c.minibatch < 1) throw ConfigError("config: minibatch must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("config: learning rate must be > 0");
  if (c.weight_decay < 0.0) throw ConfigError("config: weight decay must be >= 0");
}

Tensor uniform_init(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.data) x = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(std::vector<std::size_t> shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.data) x = stddev * rng.normal();
  return t;
}

}  // namespace

EtmModel init_model(const TrainingConfig& config, std::size_t vocab_size,
                    std::uint64_t vocab_hash, const EmbeddingMatrix* pretrained) {
  validate_config(config);
  if (vocab_size == 0) throw EmptyVocabulary("init_model: vocabulary is empty");

  EtmModel model;
  model.config = config;
  model.vocab_hash = vocab_hash;

  if (config.mode == TrainMode::labeled) {
    if (!pretrained)
      throw ConfigError("labeled mode requires a loaded embedding matrix");
    if (pretrained->vocab_size() != vocab_size)
      throw DimensionMismatch("embedding matrix has " +
                              std::to_string(pretrained->vocab_size()) +
                              " columns, vocabulary has " + std::to_string(vocab_size));
    model.rho = pretrained->rho;
    model.rho_trainable = false;
    model.config.embed_dim = pretrained->dim();
  } else {
    Rng rng = Rng::stream(config.seed, "init-rho");
    model.rho = normal_init({config.embed_dim, vocab_size}, 0.02, rng);
    model.rho_trainable = true;
  }

  std::size_t l = model.config.embed_dim;
  {
    Rng rng = Rng::stream(config.seed, "init-alpha");
    model.alpha.alpha = normal_init({config.topics, l}, 0.02, rng);
  }

  Rng rng = Rng::stream(config.seed, "init-encoder");
  std::size_t v = vocab_size, h = config.hidden_dim, k = config.topics;
  auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  InferenceNetParams& e = model.encoder;
  e.w1 = uniform_init({v, h}, fan_in(v), rng);
  e.b1 = Tensor::zeros({h});
  e.w2 = uniform_init({h, h}, fan_in(h), rng);
  e.b2 = Tensor::zeros({h});
  e.w3 = uniform_init({h, h}, fan_in(h), rng);
  e.b3 = Tensor::zeros({h});
  e.w_mu = uniform_init({h, k}, fan_in(h), rng);
  e.b_mu = Tensor::zeros({k});
  e.w_lv = uniform_init({h, k}, fan_in(h), rng);
  e.b_lv = Tensor::zeros({k});
  return model;
}

Tensor normalize_bow(const BowDocument& doc, std::size_t vocab_size) {
  if (doc.total_tokens == 0) throw EmptyDocument();
  Tensor x = Tensor::zeros({vocab_size});
  double n = static_cast<double>(doc.total_tokens);
  for (const auto& [id, count] : doc.counts) {
    if (id >= vocab_size) throw ShapeMismatch("normalize_bow: term id out of range");
    x.data[id] = static_cast<double>(count) / n;
  }
  return x;
}

Tensor normalize_bow_batch(std::span<const BowDocument> docs, std::size_t vocab_size) {
  Tensor x = Tensor::zeros({docs.size(), vocab_size});
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].total_tokens == 0) throw EmptyDocument();
    double n = static_cast<double>(docs[i].total_tokens);
    for (const auto& [id, count] : docs[i].counts) {
      if (id >= vocab_size) throw ShapeMismatch("normalize_bow: term id out of range");
      x.data[i * vocab_size + id] = static_cast<double>(count) / n;
    }
  }
  return x;
}

Tensor counts_matrix(std::span<const BowDocument> docs, std::size_t vocab_size) {
  Tensor c = Tensor::zeros({docs.size(), vocab_size});
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (const auto& [id, count] : docs[i].counts)
      c.data[i * vocab_size + id] = static_cast<double>(count);
  return c;
}

EtmLeaves make_leaves(Tape& tape, const EtmModel& model) {
  EtmLeaves l;
  l.rho = tape.leaf(model.rho);
  l.alpha = tape.leaf(model.alpha.alpha);
  const InferenceNetParams& e = model.encoder;
  l.w1 = tape.leaf(e.w1);
  l.b1 = tape.leaf(e.b1);
  l.w2 = tape.leaf(e.w2);
  l.b2 = tape.leaf(e.b2);
  l.w3 = tape.leaf(e.w3);
  l.b3 = tape.leaf(e.b3);
  l.w_mu = tape.leaf(e.w_mu);
  l.b_mu = tape.leaf(e.b_mu);
  l.w_lv = tape.leaf(e.w_lv);
  l.b_lv = tape.leaf(e.b_lv);
  return l;
}

ParamRefs trainable_params(EtmModel& model, TrainMode mode) {
  ParamRefs p;
  auto push = [&](Tensor* t, bool decay, const char* name) {
    p.values.push_back(t);
    p.decay.push_back(decay);
    p.names.push_back(name);
  };
  if (mode == TrainMode::joint) push(&model.rho, false, "rho");
  push(&model.alpha.alpha, false, "alpha");
  InferenceNetParams& e = model.encoder;
  push(&e.w1, true, "w1");
  push(&e.b1, true, "b1");
  push(&e.w2, true, "w2");
  push(&e.b2, true, "b2");
  push(&e.w3, true, "w3");
  push(&e.b3, true, "b3");
  push(&e.w_mu, true, "w_mu");
  push(&e.b_mu, true, "b_mu");
  push(&e.w_lv, true, "w_lv");
  push(&e.b_lv, true, "b_lv");
  return p;
}

std::vector<Tape::Var> leaf_vars(const EtmLeaves& l, TrainMode mode) {
  std::vector<Tape::Var> vars;
  if (mode == TrainMode::joint) vars.push_back(l.rho);
  vars.push_back(l.alpha);
  for (Tape::Var v : {l.w1, l.b1, l.w2, l.b2, l.w3, l.b3, l.w_mu, l.b_mu, l.w_lv, l.b_lv})
    vars.push_back(v);
  return vars;
}

std::pair<Tape::Var, Tape::Var> encoder_forward(Tape& tape, const EtmLeaves& l,
                                                Tape::Var x) {
  Tape::Var h1 = tape.relu(tape.affine(x, l.w1, l.b1));
  Tape::Var h2 = tape.relu(tape.affine(h1, l.w2, l.b2));
  Tape::Var h3 = tape.relu(tape.affine(h2, l.w3, l.b3));
  Tape::Var mu = tape.affine(h3, l.w_mu, l.b_mu);
  Tape::Var lv = tape.affine(h3, l.w_lv, l.b_lv);
  return {mu, lv};
}

std::pair<Tensor, Tensor> encode_batch(const EtmModel& model, const Tensor& x) {
  if (x.rank() != 2 || x.shape[1] != model.vocab_size())
    throw ShapeMismatch("encode_batch: input " + shape_str(x));
  Tape tape(model.config.threads);
  EtmLeaves leaves = make_leaves(tape, model);
  auto [mu, lv] = encoder_forward(tape, leaves, tape.leaf(x));
  return {tape.value(mu), tape.value(lv)};
}

Posterior encode(const EtmModel& model, const Tensor& x) {
  if (x.rank() != 1 || x.shape[0] != model.vocab_size())
    throw ShapeMismatch("encode: input " + shape_str(x));
  Tensor batch = Tensor::matrix(1, x.shape[0], x.data);
  auto [mu, lv] = encode_batch(model, batch);
  return Posterior{mu.data, lv.data};
}

Tensor topics(const EtmModel& model) {
  Tensor logits = matmul(model.alpha.alpha, model.rho, model.config.threads);
  std::size_t k = logits.shape[0], v = logits.shape[1];
  for (std::size_t i = 0; i < k; ++i) softmax_row_inplace(&logits.data[i * v], v);
  check_finite(logits, "topics");
  return logits;
}

double word_likelihood(std::span<const double> theta, const Tensor& beta, TermId v) {
  std::size_t k = beta.shape[0];
  if (theta.size() != k) throw ShapeMismatch("word_likelihood: theta length != K");
  if (v >= beta.shape[1]) throw ShapeMismatch("word_likelihood: term id out of range");
  double sum = 0.0, p = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sum += theta[i];
    p += theta[i] * beta.at(i, v);
  }
  if (std::abs(sum - 1.0) > 1e-8)
    throw ShapeMismatch("word_likelihood: theta is not on the simplex");
  return p;
}

std::vector<double> infer_theta(const EtmModel& model, const BowDocument& doc) {
  Posterior post = encode(model, normalize_bow(doc, model.vocab_size()));
  std::vector<double> theta = std::move(post.mu);
  softmax_row_inplace(theta.data(), theta.size());
  return theta;
}

EtmGraph build_elbo_graph(Tape& tape, const EtmLeaves& leaves, const Tensor& x_norm,
                          const Tensor& counts, double scale, const Tensor& eps) {
  EtmGraph g;
  Tape::Var beta_logits = tape.matmul(leaves.alpha, leaves.rho);  // {K, V}
  g.beta = tape.softmax(beta_logits);
  auto [mu, lv] = encoder_forward(tape, leaves, tape.leaf(x_norm));
  g.mu = mu;
  g.log_var = lv;
  Tape::Var delta = tape.reparam_sample(mu, lv, eps);
  g.theta = tape.softmax(delta);
  Tape::Var probs = tape.matmul(g.theta, g.beta);  // {B, V}
  g.loglik = tape.weighted_sum(tape.log_clamped(probs, kLogFloor), counts);
  g.kl_sum = tape.sum(tape.gaussian_kl_diag(mu, lv));
  g.elbo = tape.scale(tape.sub(g.loglik, g.kl_sum), scale);
  return g;
}

ElboParts elbo_minibatch(const EtmModel& model, std::span<const BowDocument> batch,
                         std::size_t corpus_size, const Tensor& eps) {
  if (batch.empty()) throw EmptyMinibatch("elbo_minibatch: empty minibatch");
  std::size_t v = model.vocab_size(), k = model.topic_count();
  if (eps.rank() != 2 || eps.shape[0] != batch.size() || eps.shape[1] != k)
    throw ShapeMismatch("elbo_minibatch: eps must be {B, K}, got " + shape_str(eps));
  Tensor x = normalize_bow_batch(batch, v);
  Tensor counts = counts_matrix(batch, v);
  double scale = static_cast<double>(corpus_size) / static_cast<double>(batch.size());
  Tape tape(model.config.threads);
  EtmLeaves leaves = make_leaves(tape, model);
  EtmGraph g = build_elbo_graph(tape, leaves, x, counts, scale, eps);
  ElboParts parts;
  parts.elbo = tape.value(g.elbo).data[0];
  parts.loglik = tape.value(g.loglik).data[0] * scale;
  parts.kl = tape.value(g.kl_sum).data[0] * scale;
  return parts;
}

namespace {

// Validation ELBO at the variational mean (eps = 0); deterministic,
// used only for the early-stopping signal.
double validation_elbo(const EtmModel& model, std::span<const BowDocument> docs,
                       std::size_t minibatch) {
  double total = 0.0;
  std::size_t done = 0;
  while (done < docs.size()) {
    std::size_t count = std::min(minibatch, docs.size() - done);
    auto chunk = docs.subspan(done, count);
    Tensor eps = Tensor::zeros({count, model.topic_count()});
    ElboParts parts = elbo_minibatch(model, chunk, count, eps);
    total += parts.elbo;
    done += count;
  }
  return total;
}

}  // namespace

std::vector<EpochRecord> train(EtmModel& model, const SplitCorpus& corpus,
                               const TrainingConfig& config) {
  validate_config(config);
  if (config.topics != model.topic_count() || config.embed_dim != model.embed_dim() ||
      config.hidden_dim != model.encoder.hidden_dim())
    throw ConfigError("train: config dimensions do not match the model");
  if (config.mode == TrainMode::labeled && model.rho_trainable)
    throw ConfigError("train: labeled mode requires a model with frozen embeddings");
  model.config = config;

  std::vector<const BowDocument*> train_docs;
  for (const BowDocument& d : corpus.train)
    if (d.total_tokens > 0) train_docs.push_back(&d);
  if (train_docs.empty()) throw InsufficientDocuments("train: no non-empty documents");

  std::vector<BowDocument> validation;
  for (const BowDocument& d : corpus.validation)
    if (d.total_tokens > 0) validation.push_back(d);

  std::vector<EpochRecord> trace;
  if (config.epochs == 0) return trace;

  ParamRefs params = trainable_params(model, config.mode);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  adam_cfg.weight_decay = config.weight_decay;
  std::vector<const Tensor*> cparams(params.values.begin(), params.values.end());
  AdamState state(adam_cfg, cparams, params.decay);

  Rng shuffle = Rng::stream(config.seed, "shuffle");
  Rng eps_rng = Rng::stream(config.seed, "eps");
  std::size_t d_total = train_docs.size();
  std::size_t k = model.topic_count(), v = model.vocab_size();

  std::vector<std::size_t> order(d_total);
  for (std::size_t i = 0; i < d_total; ++i) order[i] = i;

  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t iteration = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle.shuffle(order);
    double epoch_elbo = 0.0, epoch_kl = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < d_total; start += config.minibatch) {
      ++iteration;
      std::size_t count = std::min(config.minibatch, d_total - start);
      std::vector<BowDocument> batch;
      batch.reserve(count);
      for (std::size_t i = 0; i < count; ++i) batch.push_back(*train_docs[order[start + i]]);
      Tensor eps = Tensor::zeros({count, k});
      for (double& x : eps.data) x = eps_rng.normal();
      double scale = static_cast<double>(d_total) / static_cast<double>(count);
      try {
        Tensor x_norm = normalize_bow_batch(batch, v);
        Tensor counts = counts_matrix(batch, v);
        Tape tape(config.threads);
        EtmLeaves leaves = make_leaves(tape, model);
        EtmGraph g = build_elbo_graph(tape, leaves, x_norm, counts, scale, eps);
        Tape::Var loss = tape.scale(g.elbo, -1.0);
        epoch_elbo += tape.value(g.elbo).data[0];
        epoch_kl += tape.value(g.kl_sum).data[0] * scale;
        std::vector<Tape::Var> vars = leaf_vars(leaves, config.mode);
        Tape::GradResult grads = tape.backward(loss, vars);
        adam_step(params.values, grads.grads, state);
      } catch (const NonFinite& e) {
        throw NonFinite(std::string(e.what()) + " (training iteration " +
                        std::to_string(iteration) + ")");
      }
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.elbo = epoch_elbo / static_cast<double>(batches);
    rec.kl = epoch_kl / static_cast<double>(batches);
    bool stop = false;
    if (!validation.empty()) {
      try {
        rec.val_elbo = validation_elbo(model, validation, config.minibatch);
      } catch (const NonFinite& e) {
        throw NonFinite(std::string(e.what()) + " (validation after training iteration " +
                        std::to_string(iteration) + ")");
      }
      if (config.patience > 0) {
        if (*rec.val_elbo > best_val) {
          best_val = *rec.val_elbo;
          since_best = 0;
        } else if (++since_best >= config.patience) {
          stop = true;
        }
      }
    }
    trace.push_back(rec);
    if (stop) break;
  }
  return trace;
}

}  // namespace etm
