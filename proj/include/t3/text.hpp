/* Copyright 2026 The T3 Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


// Corpus ingestion and word-level vocabulary.

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "t3/error.hpp"
#include "t3/model.hpp"

namespace t3 {

struct CorpusExample {
  std::string id;
  std::string text;
  std::size_t label = 0;
  std::string split = "train";  // "train" or "validation"

  bool operator==(const CorpusExample&) const = default;
};

struct Corpus {
  std::vector<CorpusExample> examples;
  std::vector<std::string> label_names;

  std::size_t size() const { return examples.size(); }
  bool operator==(const Corpus&) const = default;
};

/// Parses newline-delimited {"id","text","label"[,"split"]} records. Labels
/// are class indices or names from `label_names`; when no table is given,
/// integer labels define one ("0", "1", ...).
inline Corpus parse_corpus(std::istream& in, const std::vector<std::string>& label_names = {}) {
  Corpus corpus;
  corpus.label_names = label_names;
  std::unordered_set<std::string> ids;
  std::size_t max_label = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::kIngest, "corpus line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      bad(std::string("malformed JSON (") + e.what() + ")");
    }
    if (!j.is_object()) bad("record is not a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (key != "id" && key != "text" && key != "label" && key != "split") bad("unknown field '" + key + "'");
    }
    if (!j.contains("id") || !j["id"].is_string()) bad("missing string field 'id'");
    if (!j.contains("text") || !j["text"].is_string()) bad("missing string field 'text'");
    if (!j.contains("label")) bad("missing field 'label'");

    CorpusExample ex;
    ex.id = j["id"].get<std::string>();
    ex.text = j["text"].get<std::string>();
    if (!ids.insert(ex.id).second) bad("duplicate id '" + ex.id + "'");

    const auto& lab = j["label"];
    if (lab.is_number_integer()) {
      const auto v = lab.get<long long>();
      if (v < 0) bad("negative label");
      ex.label = static_cast<std::size_t>(v);
      if (!label_names.empty() && ex.label >= label_names.size())
        bad("unknown label " + std::to_string(v) + " (" + std::to_string(label_names.size()) + " classes)");
    } else if (lab.is_string()) {
      const auto name = lab.get<std::string>();
      const auto it = std::find(label_names.begin(), label_names.end(), name);
      if (it == label_names.end()) bad("unknown label '" + name + "'");
      ex.label = static_cast<std::size_t>(it - label_names.begin());
    } else {
      bad("label must be an integer or a label name");
    }
    if (j.contains("split")) {
      if (!j["split"].is_string()) bad("'split' must be a string");
      ex.split = j["split"].get<std::string>();
      if (ex.split != "train" && ex.split != "validation") bad("split must be 'train' or 'validation'");
    }
    max_label = std::max(max_label, ex.label);
    any = true;
    corpus.examples.push_back(std::move(ex));
  }
  if (corpus.label_names.empty() && any) {
    for (std::size_t k = 0; k <= max_label; ++k) corpus.label_names.push_back(std::to_string(k));
  }
  return corpus;
}

inline Corpus ingest_corpus(const std::string& path, const std::vector<std::string>& label_names = {}) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIngest, "cannot open corpus file '" + path + "'");
  return parse_corpus(in, label_names);
}

inline std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus.examples) {
    nlohmann::json j{{"id", ex.id}, {"text", ex.text}, {"label", ex.label}};
    if (ex.split != "train") j["split"] = ex.split;
    out += j.dump() + "\n";
  }
  return out;
}

/// Lowercased words; every ASCII punctuation character is its own token.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (const char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 128 && std::isspace(u)) {
      flush();
    } else if (u < 128 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return out;
}

class Vocabulary {
 public:
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kCls = "[CLS]";

  Vocabulary() : tokens_{kPad, kUnk, kCls} { reindex(); }

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    require(tokens_.size() >= 3 && tokens_[0] == kPad && tokens_[1] == kUnk && tokens_[2] == kCls,
            ErrorKind::kInput, "vocabulary must start with [PAD], [UNK], [CLS]");
    reindex();
    require(index_.size() == tokens_.size(), ErrorKind::kInput, "vocabulary contains duplicate tokens");
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::int32_t id(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }

  /// [CLS] followed by the text's tokens, truncated to max_len.
  TokenSequence encode(const std::string& text, std::size_t max_len) const {
    std::vector<std::int32_t> ids{kClsId};
    for (const auto& t : tokenize(text)) {
      if (ids.size() >= max_len) break;
      ids.push_back(id(t));
    }
    return TokenSequence::unpadded(std::move(ids));
  }

  std::vector<std::string> decode(const TokenSequence& seq) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < seq.valid_len; ++i) out.push_back(token(seq.ids[i]));
    return out;
  }

  /// One token per line, in id order.
  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) out += t + "\n";
    return out;
  }

  static Vocabulary parse(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return Vocabulary(std::move(tokens));
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Frequency-ranked vocabulary (ties broken lexicographically) of at most
/// `max_size` entries including the three reserved tokens.
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count = 1, std::size_t max_size = 30000) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : corpus.examples)
    for (const auto& t : tokenize(ex.text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != Vocabulary::kPad && tok != Vocabulary::kUnk && tok != Vocabulary::kCls)
      ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens{Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kCls};
  for (const auto& [tok, _] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace t3
