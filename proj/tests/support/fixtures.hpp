#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include "t3/store.hpp"

namespace t3::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("t3-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Short sentences over three topics; every third example is held out for
/// validation when `with_validation` is set.
inline Corpus topic_corpus(std::size_t n, std::uint64_t seed, bool with_validation = false) {
  static const std::vector<std::vector<std::string>> cues{
      {"goal", "match", "team", "coach", "score"},
      {"vote", "senate", "law", "party", "mayor"},
      {"chip", "code", "robot", "laptop", "server"}};
  static const std::vector<std::string> filler{"the", "a", "of", "and", "today", "new", "big", "was"};
  Rng rng(seed);
  Corpus c;
  c.label_names = {"sports", "politics", "tech"};
  for (std::size_t i = 0; i < n; ++i) {
    CorpusExample ex;
    ex.id = "ex" + std::to_string(i);
    ex.label = i % 3;
    const std::size_t len = 4 + rng.below(6);
    for (std::size_t w = 0; w < len; ++w) {
      if (!ex.text.empty()) ex.text += ' ';
      ex.text += w % 2 == 0 ? cues[ex.label][rng.below(cues[ex.label].size())] : filler[rng.below(filler.size())];
    }
    ex.text += rng.below(2) == 0 ? "." : "!";
    if (with_validation && i % 3 == 2) ex.split = "validation";
    c.examples.push_back(std::move(ex));
  }
  return c;
}

inline RunConfig small_run_config(std::size_t epochs = 2) {
  RunConfig rc;
  rc.model.d_model = 16;
  rc.model.n_layers = 2;
  rc.model.n_heads = 4;
  rc.model.d_ff = 32;
  rc.model.max_seq_len = 12;
  rc.model.seed = 7;
  rc.train.epochs = epochs;
  rc.train.batch_size = 4;
  rc.train.learning_rate = 0.2;
  rc.train.seed = 3;
  rc.projection.perplexity = 5;
  rc.projection.iterations = 300;
  rc.attention_size = 8;
  return rc;
}

}  // namespace t3::testing
