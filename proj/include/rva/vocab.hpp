#ifndef RVA_VOCAB_HPP_
#define RVA_VOCAB_HPP_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "rva/dialog.hpp"
#include "rva/tensor.hpp"

namespace rva {

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  // pad, unk, then every generator token in Lexicon order.
  static Vocabulary standard();

  // Returns the existing index when the token is already present.
  std::size_t add(const std::string& token);
  std::size_t index(const std::string& token) const;  // unk when absent
  const std::string& token(std::size_t index) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::size_t size() const { return tokens_.size(); }
  std::vector<std::size_t> encode(const Tokens& tokens) const;

  // One token per line, index order.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads "token v1 ... vD" lines into rows of `table` ([V, D]) for tokens in
// the vocabulary. Returns the number of rows overwritten. The pad row is never
// written. Malformed lines throw ValidationError with the 1-based line number.
template <typename T>
std::size_t load_embedding_file(const std::string& path, const Vocabulary& vocab, Tensor<T>& table);

}  // namespace rva

#endif  // RVA_VOCAB_HPP_
