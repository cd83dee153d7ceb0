#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "rva/encoder.hpp"
#include "rva/gradcheck.hpp"
#include "rva/vocab.hpp"

namespace rva {
namespace {

constexpr std::size_t kVocab = 12;
constexpr std::size_t kEmb = 5;
constexpr std::size_t kHidden = 4;

struct Fixture {
  ParameterSet<double> params;
  Parameter<double>* table = nullptr;
  BiLstm<double> question;
  BiLstm<double> history;
  SelfAttention<double> ref;

  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed);
    table = &params.add_uniform("embedding", "embedding", {kVocab, kEmb}, 0.5, rng);
    for (std::size_t c = 0; c < kEmb; ++c) table->value.at(0, c) = 0.0;
    question = BiLstm<double>::make(params, "q", "question", kEmb, kHidden, rng);
    history = BiLstm<double>::make(params, "h", "history", kEmb, kHidden, rng);
    ref = SelfAttention<double>::make(params, "ref", "attention", 2 * kHidden, rng);
  }

  std::vector<std::vector<double>> codes(const BiLstm<double>& lstm, const std::vector<std::vector<std::size_t>>& s) {
    Graph<double> g(false);
    const auto enc = encode_sentences(lstm, g.parameter(*table), s);
    std::vector<std::vector<double>> out;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const auto r = enc.codes.value().row(j);
      out.emplace_back(r.begin(), r.end());
    }
    return out;
  }

  // q* and word weights for each sentence.
  std::pair<Tensor<double>, std::vector<Tensor<double>>> attend(const std::vector<std::vector<std::size_t>>& s) {
    Graph<double> g(false);
    Var<double> t = g.parameter(*table);
    const auto enc = encode_sentences(question, t, s);
    std::vector<std::size_t> words;
    for (std::size_t j = 0; j < s.size(); ++j) {
      words.insert(words.end(), s[j].begin(), s[j].begin() + static_cast<std::ptrdiff_t>(enc.lengths[j]));
    }
    const auto att = self_attend(ref, word_states(enc), embedding_lookup(t, words), enc.lengths, ForwardContext{});
    std::vector<Tensor<double>> weights;
    for (const auto& w : att.weights) weights.push_back(w.value());
    return {att.features.value(), weights};
  }
};

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM step from a zero state, written directly from the cell equations.
std::vector<double> one_step(const LstmDirection<double>& d, const Tensor<double>& table, std::size_t token) {
  const std::size_t H = kHidden;
  std::vector<double> gates(4 * H);
  for (std::size_t j = 0; j < 4 * H; ++j) {
    double acc = (*d.bias).value[j];
    for (std::size_t k = 0; k < kEmb; ++k) acc += table.at(token, k) * d.wx->value.at(k, j);
    gates[j] = acc;
  }
  std::vector<double> h(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double c = sigm(gates[j]) * std::tanh(gates[2 * H + j]);
    h[j] = sigm(gates[3 * H + j]) * std::tanh(c);
  }
  return h;
}

TEST(TextEncoder, SingleTokenCode) {
  Fixture f(1);
  const auto code = f.codes(f.question, {{7}})[0];
  const auto fwd = one_step(f.question.forward, f.table->value, 7);
  const auto bwd = one_step(f.question.backward, f.table->value, 7);
  for (std::size_t j = 0; j < kHidden; ++j) {
    EXPECT_NEAR(code[j], fwd[j], 1e-12);
    EXPECT_NEAR(code[kHidden + j], bwd[j], 1e-12);
  }
}

TEST(TextEncoder, PaddingInvarianceIsExact) {
  Fixture f(2);
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng.below(6);
    std::vector<std::size_t> s(len);
    for (auto& tok : s) tok = 1 + rng.below(kVocab - 1);
    std::vector<std::size_t> padded = s;
    padded.resize(len + 1 + rng.below(5), 0);
    std::vector<std::size_t> other(1 + rng.below(8));
    for (auto& tok : other) tok = 1 + rng.below(kVocab - 1);
    const auto alone = f.codes(f.question, {s})[0];
    ASSERT_EQ(alone, f.codes(f.question, {padded})[0]);
    ASSERT_EQ(alone, f.codes(f.question, {other, padded})[1]);
    const auto a = f.attend({s});
    const auto b = f.attend({other, padded});
    for (std::size_t c = 0; c < kEmb; ++c) ASSERT_EQ(a.first.at(0, c), b.first.at(1, c));
    ASSERT_EQ(a.second[0], b.second[1]);
  }
}

TEST(TextEncoder, OrderMatters) {
  Fixture f(4);
  const auto c = f.codes(f.question, {{3, 5}, {5, 3}});
  EXPECT_NE(c[0], c[1]);
}

TEST(TextEncoder, HistoryRounds) {
  Fixture f(5);
  const std::vector<std::size_t> caption = {2, 3, 4};
  const std::vector<std::size_t> q = {5, 6}, a = {7};
  std::vector<std::size_t> qa = q, aq = a;
  qa.insert(qa.end(), a.begin(), a.end());
  aq.insert(aq.end(), q.begin(), q.end());
  const auto c = f.codes(f.history, {caption, qa, qa, aq});
  EXPECT_EQ(c[0], f.codes(f.history, {caption})[0]);
  EXPECT_EQ(c[1], c[2]);
  EXPECT_NE(c[1], c[3]);
}

TEST(TextEncoder, InputErrors) {
  Fixture f(6);
  EXPECT_THROW(f.codes(f.question, {{}}), ValidationError);
  EXPECT_THROW(f.codes(f.question, {{0, 0}}), ValidationError);
  EXPECT_THROW(f.codes(f.question, {{kVocab}}), ValidationError);
  EXPECT_THROW(f.codes(f.question, {{3, 0, 4}}), ValidationError);
}

TEST(TextEncoder, SingleWordAttention) {
  Fixture f(7);
  const auto [q, w] = f.attend({{9}});
  ASSERT_EQ(w[0].size(), 1u);
  EXPECT_EQ(w[0][0], 1.0);
  for (std::size_t c = 0; c < kEmb; ++c) EXPECT_EQ(q.at(0, c), f.table->value.at(9, c));
}

TEST(TextEncoder, EqualLogitsGiveMeanEmbedding) {
  Fixture f(8);
  f.ref.score.weight->value.fill(0.0);
  const std::vector<std::size_t> s = {2, 4, 6};
  const auto [q, w] = f.attend({s});
  for (std::size_t c = 0; c < kEmb; ++c) {
    double mean = 0.0;
    for (auto tok : s) mean += f.table->value.at(tok, c) / 3.0;
    EXPECT_NEAR(q.at(0, c), mean, 1e-12);
  }
}

TEST(TextEncoder, AttentionOnSimplex) {
  Fixture f(9);
  Rng rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::vector<std::size_t>> batch(1 + rng.below(3));
    for (auto& s : batch) {
      s.resize(1 + rng.below(7));
      for (auto& tok : s) tok = 1 + rng.below(kVocab - 1);
    }
    for (const auto& w : f.attend(batch).second) {
      double total = 0.0;
      for (double v : w.values()) {
        ASSERT_GE(v, 0.0);
        total += v;
      }
      ASSERT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(TextEncoder, ParameterSeparation) {
  Fixture f(11);
  const std::vector<std::vector<std::size_t>> s = {{1, 2, 3}, {4, 5}};
  const auto q_before = f.codes(f.question, s);
  const auto h_before = f.codes(f.history, s);
  f.history.forward.wx->value[0] += 0.25;
  EXPECT_EQ(q_before, f.codes(f.question, s));
  EXPECT_NE(h_before, f.codes(f.history, s));
  const auto h_now = f.codes(f.history, s);
  f.question.backward.wh->value[3] -= 0.25;
  EXPECT_EQ(h_now, f.codes(f.history, s));
}

TEST(TextEncoder, GradientThroughEncoderAndSelfAttention) {
  Fixture f(12);
  const std::vector<std::vector<std::size_t>> s = {{1, 2, 3, 0}, {4, 5}, {6}};
  const Tensor<double> target = [] {
    Rng rng(13);
    Tensor<double> t({3, kEmb});
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
  }();
  auto loss = [&](Graph<double>& g) {
    Var<double> t = g.parameter(*f.table);
    const auto enc = encode_sentences(f.question, t, s);
    std::vector<std::size_t> words = {1, 2, 3, 4, 5, 6};
    const auto att = self_attend(f.ref, word_states(enc), embedding_lookup(t, words), enc.lengths, ForwardContext{});
    Var<double> codes = enc.codes;
    return add(sum(hadamard(att.features, g.constant(target))), sum(tanh(codes)));
  };
  const GradCheckReport report = finite_diff_check(loss, f.params, 1e-5);
  EXPECT_LT(report.max_rel_error, 1e-4);
}

TEST(Vocabulary, StandardAndRoundTrip) {
  const Vocabulary v = Vocabulary::standard();
  EXPECT_EQ(v.index("<pad>"), Vocabulary::kPad);
  EXPECT_EQ(v.index("<unk>"), Vocabulary::kUnk);
  EXPECT_EQ(v.index("zebra"), Vocabulary::kUnk);
  for (const auto& tok : Lexicon::all_tokens()) EXPECT_EQ(v.token(v.index(tok)), tok);
  const auto path = (std::filesystem::temp_directory_path() / "rva_vocab.txt").string();
  v.save(path);
  EXPECT_EQ(Vocabulary::load(path), v);
  std::filesystem::remove(path);
}

TEST(Vocabulary, EmbeddingFile) {
  Vocabulary v;
  v.add("red");
  v.add("cup");
  const auto path = (std::filesystem::temp_directory_path() / "rva_emb.txt").string();
  std::ofstream(path) << "red 1 2 3\nzebra 4 5 6\ncup 0.5 -1 2e-1\n";
  Tensor<double> table({4, 3}, 9.0);
  EXPECT_EQ(load_embedding_file(path, v, table), 2u);
  EXPECT_EQ(table.at(2, 1), 2.0);
  EXPECT_EQ(table.at(3, 2), 0.2);
  EXPECT_EQ(table.at(1, 0), 9.0);
  std::ofstream(path, std::ios::trunc) << "red 1 2 3\ncup 1 x 3\n";
  try {
    load_embedding_file(path, v, table);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::ofstream(path, std::ios::trunc) << "red 1 2\n";
  EXPECT_THROW(load_embedding_file(path, v, table), ValidationError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace rva
