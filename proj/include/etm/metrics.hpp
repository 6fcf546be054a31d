#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "etm/corpus.hpp"
#include "etm/model.hpp"

namespace etm {

// Presence-based document co-occurrence counts over a candidate term
// set: a term counts once per document regardless of multiplicity.
struct CooccurrenceStats {
  std::size_t doc_count = 0;                          // D
  std::map<TermId, std::size_t> term_docs;            // docs containing term
  std::map<std::pair<TermId, TermId>, std::size_t> pair_docs;  // i < j

  bool covers(TermId t) const { return term_docs.count(t) > 0; }
  std::size_t count(TermId t) const;
  std::size_t joint(TermId i, TermId j) const;
};

CooccurrenceStats build_cooccurrence(std::span<const BowDocument> reference,
                                     const std::set<TermId>& candidates);

// Normalized pointwise mutual information in [-1, 1], natural log.
// Never co-occurring pairs give -1; pairs present in every document
// give 0 (both limits of the formula).
double npmi(const CooccurrenceStats& stats, TermId w_i, TermId w_j);

// Top-n term ids of one topic row by probability, ties broken by
// lower term id.
std::vector<TermId> top_terms(const Tensor& beta, std::size_t topic, std::size_t n);

// Mean NPMI over the 45 unordered pairs of each topic's top-10 terms,
// averaged over topics. Throws MissingStats when the stats do not
// cover some top term (message lists the ids).
double topic_coherence(const Tensor& beta, const CooccurrenceStats& stats);

// Fraction of unique terms among all topics' top-25 lists.
double topic_diversity(const Tensor& beta);

double topic_quality(double coherence, double diversity);

struct CompletionResult {
  double loglik = 0.0;          // mean per held-out token, natural log
  double perplexity = 1.0;      // exp(-loglik)
  double normalized_ppl = 0.0;  // perplexity / V
};

// Infers theta from each observed half at the variational mean and
// scores the held-out half. Throws EmptyHeldOut.
CompletionResult document_completion(const EtmModel& model,
                                     std::span<const CompletionPair> pairs);

struct MetricsReport {
  double coherence = 0.0;
  double diversity = 0.0;
  double quality = 0.0;
  double completion_loglik = 0.0;
  double completion_ppl = 0.0;
  double normalized_ppl = 0.0;
};

}  // namespace etm
