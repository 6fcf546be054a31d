#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace etm {

// Error category, used by the CLI to pick an exit code
// (config -> 2, data -> 3, numeric -> 4).
enum class ErrorKind { config, data, numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

// --- corpus ---
struct EmptyVocabulary : Error {
  explicit EmptyVocabulary(const std::string& w = "no term survived vocabulary pruning")
      : Error(ErrorKind::data, w) {}
};
struct InsufficientDocuments : Error {
  explicit InsufficientDocuments(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct TooShort : Error {
  explicit TooShort(const std::string& w = "document has fewer than 2 tokens")
      : Error(ErrorKind::data, w) {}
};

// --- tensorcore ---
struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct NonFinite : Error {
  explicit NonFinite(const std::string& w) : Error(ErrorKind::numeric, w) {}
};

// --- embeddings ---
struct EmptyCorpus : Error {
  explicit EmptyCorpus(const std::string& w = "corpus is empty")
      : Error(ErrorKind::data, w) {}
};
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct MissingTerms : Error {
  MissingTerms(std::vector<std::string> terms, const std::string& w)
      : Error(ErrorKind::data, w), missing(std::move(terms)) {}
  std::vector<std::string> missing;
};
struct UnknownTerm : Error {
  explicit UnknownTerm(const std::string& term)
      : Error(ErrorKind::data, "unknown term: " + term) {}
};

// --- etm ---
struct EmptyDocument : Error {
  explicit EmptyDocument(const std::string& w = "document has no in-vocabulary tokens")
      : Error(ErrorKind::data, w) {}
};
struct EmptyMinibatch : Error {
  explicit EmptyMinibatch(const std::string& w = "minibatch is empty")
      : Error(ErrorKind::data, w) {}
};
struct VersionMismatch : Error {
  explicit VersionMismatch(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct CorruptFile : Error {
  explicit CorruptFile(const std::string& w) : Error(ErrorKind::data, w) {}
};

// --- metrics ---
struct EmptyReference : Error {
  explicit EmptyReference(const std::string& w = "reference corpus is empty")
      : Error(ErrorKind::data, w) {}
};
struct MissingStats : Error {
  MissingStats(std::vector<std::string> terms, const std::string& w)
      : Error(ErrorKind::data, w), uncovered(std::move(terms)) {}
  std::vector<std::string> uncovered;
};
struct VocabularyTooSmall : Error {
  explicit VocabularyTooSmall(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct EmptyHeldOut : Error {
  explicit EmptyHeldOut(const std::string& w = "held-out half is empty")
      : Error(ErrorKind::data, w) {}
};

}  // namespace etm
