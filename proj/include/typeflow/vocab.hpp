#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "typeflow/errors.hpp"

namespace typeflow {

inline constexpr const char* kUnknownToken = "<UNKNOWN>";
inline constexpr const char* kWordEnd = "</w>";

// Splits an identifier into lowercase subtokens. Boundaries: underscores
// (dropped), lower/digit followed by upper ("parseDoc" -> parse, doc), and the
// last upper of an acronym run followed by lowers ("parseHTMLDoc" -> parse,
// html, doc). Digits stay attached to what precedes them ("base64Enc" ->
// base64, enc). A name made only of underscores yields a single "_".
std::vector<std::string> split_subtokens(const std::string& name);

// Byte pair encoding over subtoken words. A word is seeded as one symbol per
// character with the end marker attached to the last one ("aab" -> a, a,
// b</w>). Training repeatedly merges the most frequent adjacent symbol pair,
// breaking count ties toward the lexicographically smaller pair.
struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
};

std::vector<std::string> bpe_seed_symbols(const std::string& word);
BpeModel bpe_train(const std::map<std::string, long long>& word_counts,
                   int num_merges);
std::vector<std::string> bpe_encode(const BpeModel& model,
                                    const std::string& word);
// All symbols encoding can produce from the training corpus: seed characters
// observed in the corpus (sorted) followed by merge outputs in merge order,
// deduplicated keeping the first occurrence.
std::vector<std::string> bpe_inventory(
    const BpeModel& model, const std::map<std::string, long long>& word_counts);

std::string bpe_to_json(const BpeModel& model);
BpeModel bpe_from_json(const std::string& json_text);

// A frozen string-to-id table. Ids are dense from zero; the optional unknown
// entry is always last.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> entries, bool has_unknown);

  int id_of(const std::string& s) const;       // throws MissingVocabEntry
  int id_or_unknown(const std::string& s) const;  // falls back to unknown id
  bool contains(const std::string& s) const;
  const std::string& at(int id) const;
  int size() const { return static_cast<int>(id_to_str_.size()); }
  bool has_unknown() const { return unknown_ >= 0; }
  int unknown_id() const;  // throws MissingVocabEntry if absent
  const std::vector<std::string>& entries() const { return id_to_str_; }

 private:
  std::vector<std::string> id_to_str_;
  std::unordered_map<std::string, int> str_to_id_;
  int unknown_ = -1;
};

// Orders entries by count descending, ties lexicographically ascending, keeps
// at most max_size (0 = unlimited), then appends the unknown entry if asked.
// Throws EmptyCorpus when counts is empty.
Vocabulary build_vocab(const std::map<std::string, long long>& counts,
                       std::size_t max_size, bool with_unknown);

std::string vocab_to_json(const Vocabulary& v);
Vocabulary vocab_from_json(const std::string& json_text);

}  // namespace typeflow
