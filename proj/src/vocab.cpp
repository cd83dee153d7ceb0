#include "rva/vocab.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rva/errors.hpp"

namespace rva {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::standard() {
  Vocabulary v;
  for (const auto& tok : Lexicon::all_tokens()) v.add(tok);
  return v;
}

std::size_t Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) {
    throw ValidationError("token index " + std::to_string(index) + " out of range");
  }
  return tokens_[index];
}

std::vector<std::size_t> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write vocabulary: " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read vocabulary: " + path);
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) throw ValidationError("vocabulary line " + std::to_string(v.size() + 1) + " is empty");
    if (v.contains(line)) throw ValidationError("duplicate vocabulary token '" + line + "'");
    v.add(line);
  }
  if (v.size() < 2 || v.tokens_[kPad] != "<pad>" || v.tokens_[kUnk] != "<unk>") {
    throw ValidationError("vocabulary must start with <pad> and <unk>");
  }
  return v;
}

template <typename T>
std::size_t load_embedding_file(const std::string& path, const Vocabulary& vocab, Tensor<T>& table) {
  if (table.rank() != 2 || table.rows() != vocab.size()) {
    throw ValidationError("embedding table shape " + shape_str(table.shape()) +
                          " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read embedding file: " + path);
  const std::size_t dim = table.cols();
  std::string line;
  std::size_t line_no = 0, written = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<T> values;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw ValidationError("embedding file line " + std::to_string(line_no) + ": bad number '" + field + "'");
      }
      values.push_back(static_cast<T>(v));
    }
    if (values.size() != dim) {
      throw ValidationError("embedding file line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dim) + " values, found " + std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    const std::size_t row = vocab.index(token);
    if (row == Vocabulary::kPad) continue;
    std::copy(values.begin(), values.end(), table.row(row).begin());
    ++written;
  }
  return written;
}

template std::size_t load_embedding_file<float>(const std::string&, const Vocabulary&, Tensor<float>&);
template std::size_t load_embedding_file<double>(const std::string&, const Vocabulary&, Tensor<double>&);

}  // namespace rva
