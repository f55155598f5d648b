#include "typeflow/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

namespace typeflow {

namespace {

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)); }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)); }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<std::string> split_subtokens(const std::string& name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(to_lower(cur));
      cur.clear();
    }
  };
  const std::size_t n = name.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = name[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (!cur.empty()) {
      const char prev = cur.back();
      const bool case_boundary = is_upper(c) && (is_lower(prev) || is_digit(prev));
      const bool acronym_end = is_upper(c) && is_upper(prev) && i + 1 < n &&
                               is_lower(name[i + 1]);
      if (case_boundary || acronym_end) flush();
    }
    cur.push_back(c);
  }
  flush();
  if (out.empty() && !name.empty()) out.push_back("_");
  return out;
}

std::vector<std::string> bpe_seed_symbols(const std::string& word) {
  std::vector<std::string> syms;
  syms.reserve(word.size());
  for (char c : word) syms.emplace_back(1, c);
  if (!syms.empty()) syms.back() += kWordEnd;
  return syms;
}

namespace {

using SymbolPair = std::pair<std::string, std::string>;

std::vector<std::string> apply_merge(const std::vector<std::string>& syms,
                                     const SymbolPair& pair) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  std::size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == pair.first && syms[i + 1] == pair.second) {
      out.push_back(pair.first + pair.second);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

BpeModel bpe_train(const std::map<std::string, long long>& word_counts,
                   int num_merges) {
  std::vector<std::pair<std::vector<std::string>, long long>> words;
  words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    if (word.empty() || count <= 0) continue;
    words.emplace_back(bpe_seed_symbols(word), count);
  }
  BpeModel model;
  for (int step = 0; step < num_merges; ++step) {
    std::map<SymbolPair, long long> pair_counts;
    for (const auto& [syms, count] : words) {
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        pair_counts[{syms[i], syms[i + 1]}] += count;
      }
    }
    if (pair_counts.empty()) break;
    // Map order is pair-ascending, so keeping strictly larger counts leaves
    // the lexicographically smallest pair among ties.
    SymbolPair best;
    long long best_count = -1;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    }
    model.merges.push_back(best);
    for (auto& [syms, count] : words) syms = apply_merge(syms, best);
  }
  return model;
}

std::vector<std::string> bpe_encode(const BpeModel& model,
                                    const std::string& word) {
  std::vector<std::string> syms = bpe_seed_symbols(word);
  if (syms.size() < 2) return syms;
  std::map<SymbolPair, int> rank;
  for (std::size_t i = 0; i < model.merges.size(); ++i) {
    rank.emplace(model.merges[i], static_cast<int>(i));
  }
  while (syms.size() >= 2) {
    int best_rank = -1;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = rank.find({syms[i], syms[i + 1]});
      if (it != rank.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
      }
    }
    if (best_rank < 0) break;
    syms = apply_merge(syms, model.merges[static_cast<std::size_t>(best_rank)]);
  }
  return syms;
}

std::vector<std::string> bpe_inventory(
    const BpeModel& model,
    const std::map<std::string, long long>& word_counts) {
  std::set<std::string> seeds;
  for (const auto& [word, count] : word_counts) {
    if (word.empty() || count <= 0) continue;
    for (const std::string& s : bpe_seed_symbols(word)) seeds.insert(s);
  }
  std::vector<std::string> out(seeds.begin(), seeds.end());
  std::set<std::string> seen(seeds.begin(), seeds.end());
  for (const auto& [a, b] : model.merges) {
    std::string merged = a + b;
    if (seen.insert(merged).second) out.push_back(std::move(merged));
  }
  return out;
}

std::string bpe_to_json(const BpeModel& model) {
  nlohmann::ordered_json j;
  j["merges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : model.merges) {
    j["merges"].push_back(nlohmann::ordered_json::array({a, b}));
  }
  return j.dump(2) + "\n";
}

BpeModel bpe_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.is_object() || !j.contains("merges") || !j["merges"].is_array()) {
    throw SchemaError("expected an object with a 'merges' array", "$");
  }
  BpeModel model;
  for (std::size_t i = 0; i < j["merges"].size(); ++i) {
    const auto& m = j["merges"][i];
    if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string()) {
      throw SchemaError("merge entries must be [string, string]",
                        "$.merges[" + std::to_string(i) + "]");
    }
    model.merges.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
  }
  return model;
}

Vocabulary::Vocabulary(std::vector<std::string> entries, bool has_unknown)
    : id_to_str_(std::move(entries)) {
  for (std::size_t i = 0; i < id_to_str_.size(); ++i) {
    auto [it, inserted] = str_to_id_.emplace(id_to_str_[i], static_cast<int>(i));
    if (!inserted) {
      throw SchemaError("duplicate vocabulary entry '" + id_to_str_[i] + "'",
                        "$.entries[" + std::to_string(i) + "]");
    }
  }
  if (has_unknown) {
    if (id_to_str_.empty() || id_to_str_.back() != kUnknownToken) {
      throw SchemaError("unknown-entry vocabulary must end with the unknown token",
                        "$.entries");
    }
    unknown_ = static_cast<int>(id_to_str_.size()) - 1;
  }
}

int Vocabulary::id_of(const std::string& s) const {
  auto it = str_to_id_.find(s);
  if (it == str_to_id_.end()) throw MissingVocabEntry(s);
  return it->second;
}

int Vocabulary::id_or_unknown(const std::string& s) const {
  auto it = str_to_id_.find(s);
  if (it != str_to_id_.end()) return it->second;
  if (unknown_ < 0) throw MissingVocabEntry(s);
  return unknown_;
}

bool Vocabulary::contains(const std::string& s) const {
  return str_to_id_.count(s) != 0;
}

const std::string& Vocabulary::at(int id) const {
  if (id < 0 || id >= size()) {
    throw InternalError("vocabulary id out of range: " + std::to_string(id));
  }
  return id_to_str_[static_cast<std::size_t>(id)];
}

int Vocabulary::unknown_id() const {
  if (unknown_ < 0) throw MissingVocabEntry(kUnknownToken);
  return unknown_;
}

Vocabulary build_vocab(const std::map<std::string, long long>& counts,
                       std::size_t max_size, bool with_unknown) {
  if (counts.empty()) throw EmptyCorpus("no entries to build a vocabulary from");
  std::vector<std::pair<std::string, long long>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_size != 0 && items.size() > max_size) items.resize(max_size);
  std::vector<std::string> entries;
  entries.reserve(items.size() + (with_unknown ? 1 : 0));
  for (auto& [s, c] : items) entries.push_back(std::move(s));
  if (with_unknown) entries.push_back(kUnknownToken);
  return Vocabulary(std::move(entries), with_unknown);
}

std::string vocab_to_json(const Vocabulary& v) {
  nlohmann::ordered_json j;
  j["entries"] = v.entries();
  j["has_unknown"] = v.has_unknown();
  return j.dump(2) + "\n";
}

Vocabulary vocab_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array() ||
      !j.contains("has_unknown") || !j["has_unknown"].is_boolean()) {
    throw SchemaError("expected {entries: [...], has_unknown: bool}", "$");
  }
  std::vector<std::string> entries;
  for (std::size_t i = 0; i < j["entries"].size(); ++i) {
    if (!j["entries"][i].is_string()) {
      throw SchemaError("vocabulary entries must be strings",
                        "$.entries[" + std::to_string(i) + "]");
    }
    entries.push_back(j["entries"][i].get<std::string>());
  }
  return Vocabulary(std::move(entries), j["has_unknown"].get<bool>());
}

}  // namespace typeflow
