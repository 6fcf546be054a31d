#include "etm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace etm {

std::size_t CooccurrenceStats::count(TermId t) const {
  auto it = term_docs.find(t);
  if (it == term_docs.end()) throw UnknownTerm("term id " + std::to_string(t));
  return it->second;
}

std::size_t CooccurrenceStats::joint(TermId i, TermId j) const {
  if (!covers(i)) throw UnknownTerm("term id " + std::to_string(i));
  if (!covers(j)) throw UnknownTerm("term id " + std::to_string(j));
  if (i > j) std::swap(i, j);
  auto it = pair_docs.find({i, j});
  return it == pair_docs.end() ? 0 : it->second;
}

CooccurrenceStats build_cooccurrence(std::span<const BowDocument> reference,
                                     const std::set<TermId>& candidates) {
  if (reference.empty()) throw EmptyReference();
  CooccurrenceStats stats;
  stats.doc_count = reference.size();
  for (TermId t : candidates) stats.term_docs[t] = 0;
  std::vector<TermId> present;
  for (const BowDocument& doc : reference) {
    present.clear();
    for (const auto& [id, count] : doc.counts)
      if (count > 0 && candidates.count(id)) present.push_back(id);
    for (std::size_t a = 0; a < present.size(); ++a) {
      stats.term_docs[present[a]] += 1;
      for (std::size_t b = a + 1; b < present.size(); ++b)
        stats.pair_docs[{present[a], present[b]}] += 1;
    }
  }
  return stats;
}

double npmi(const CooccurrenceStats& stats, TermId w_i, TermId w_j) {
  std::size_t joint = stats.joint(w_i, w_j);
  if (joint == 0) return -1.0;
  double d = static_cast<double>(stats.doc_count);
  double pij = static_cast<double>(joint) / d;
  if (pij >= 1.0) return 0.0;  // -log P(i,j) vanishes with the numerator
  double pi = static_cast<double>(stats.count(w_i)) / d;
  double pj = static_cast<double>(stats.count(w_j)) / d;
  return std::log(pij / (pi * pj)) / (-std::log(pij));
}

std::vector<TermId> top_terms(const Tensor& beta, std::size_t topic, std::size_t n) {
  std::size_t v = beta.shape[1];
  std::vector<TermId> ids(v);
  for (TermId j = 0; j < v; ++j) ids[j] = j;
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n, v)),
                    ids.end(), [&](TermId a, TermId b) {
                      double pa = beta.at(topic, a), pb = beta.at(topic, b);
                      if (pa != pb) return pa > pb;
                      return a < b;
                    });
  ids.resize(std::min(n, v));
  return ids;
}

double topic_coherence(const Tensor& beta, const CooccurrenceStats& stats) {
  std::size_t k = beta.shape[0];
  std::vector<std::string> uncovered;
  double total = 0.0;
  for (std::size_t topic = 0; topic < k; ++topic) {
    std::vector<TermId> top = top_terms(beta, topic, 10);
    for (TermId t : top)
      if (!stats.covers(t)) uncovered.push_back(std::to_string(t));
    if (!uncovered.empty()) continue;
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < top.size(); ++i)
      for (std::size_t j = i + 1; j < top.size(); ++j) {
        acc += npmi(stats, top[i], top[j]);
        ++pairs;
      }
    total += acc / static_cast<double>(pairs);
  }
  if (!uncovered.empty())
    throw MissingStats(uncovered, "topic_coherence: co-occurrence stats missing " +
                                      std::to_string(uncovered.size()) + " top terms");
  return total / static_cast<double>(k);
}

double topic_diversity(const Tensor& beta) {
  std::size_t k = beta.shape[0], v = beta.shape[1];
  if (v < 25)
    throw VocabularyTooSmall("topic_diversity: vocabulary has " + std::to_string(v) +
                             " terms, need at least 25");
  std::set<TermId> unique;
  for (std::size_t topic = 0; topic < k; ++topic)
    for (TermId t : top_terms(beta, topic, 25)) unique.insert(t);
  return static_cast<double>(unique.size()) / static_cast<double>(25 * k);
}

double topic_quality(double coherence, double diversity) {
  return coherence * diversity;
}

CompletionResult document_completion(const EtmModel& model,
                                     std::span<const CompletionPair> pairs) {
  if (pairs.empty()) throw EmptyHeldOut("document_completion: no completion pairs");
  Tensor beta = topics(model);
  double total = 0.0;
  std::uint64_t tokens = 0;
  for (const CompletionPair& pair : pairs) {
    if (pair.held_out_half.total_tokens == 0) throw EmptyHeldOut();
    std::vector<double> theta = infer_theta(model, pair.observed_half);
    for (const auto& [id, count] : pair.held_out_half.counts) {
      double p = word_likelihood(theta, beta, id);
      total += static_cast<double>(count) * std::log(std::max(p, kLogFloor));
      tokens += count;
    }
  }
  CompletionResult result;
  result.loglik = total / static_cast<double>(tokens);
  result.perplexity = std::exp(-result.loglik);
  result.normalized_ppl =
      result.perplexity / static_cast<double>(model.vocab_size());
  return result;
}

}  // namespace etm
