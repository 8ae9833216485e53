#include "lctc/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lctc/errors.hpp"

namespace lctc {

NGramLM::NGramLM(std::size_t vocab_size, std::size_t order, double add_k)
    : vocab_size_(vocab_size), order_(order), add_k_(add_k) {
  if (order < 1) throw InvalidArgument("ngram: order must be >= 1");
  if (!(add_k > 0.0)) throw InvalidArgument("ngram: add_k must be > 0");
  if (vocab_size < 1) throw InvalidArgument("ngram: vocab_size must be >= 1");
}

NGramLM NGramLM::train(const std::vector<LabelSequence>& corpus, std::size_t vocab_size,
                       std::size_t order, double add_k) {
  NGramLM lm(vocab_size, order, add_k);
  if (corpus.empty()) throw InvalidArgument("ngram: empty training corpus");
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i <= seq.size(); ++i) {
      const Label w = i < seq.size() ? seq[i] : lm.end_symbol();
      lm.check_symbol(w, i == seq.size());
      Context ctx = lm.context_of(std::span<const Label>(seq).first(i));
      ++lm.counts_[ctx][w];
      ++lm.totals_[ctx];
    }
  }
  return lm;
}

void NGramLM::check_symbol(Label w, bool allow_end) const {
  const bool ok = (w >= 1 && static_cast<std::size_t>(w) <= vocab_size_) ||
                  (allow_end && w == end_symbol());
  if (!ok) throw InvalidArgument("ngram: symbol " + std::to_string(w) + " is out of vocabulary");
}

NGramLM::Context NGramLM::context_of(std::span<const Label> history) const {
  const std::size_t n = order_ - 1;
  Context ctx(n, kBegin);
  const std::size_t take = std::min(n, history.size());
  for (std::size_t i = 0; i < take; ++i) ctx[n - take + i] = history[history.size() - take + i];
  return ctx;
}

std::uint64_t NGramLM::count(const Context& ctx, Label w) const {
  auto it = counts_.find(ctx);
  if (it == counts_.end()) return 0;
  auto jt = it->second.find(w);
  return jt == it->second.end() ? 0 : jt->second;
}

std::uint64_t NGramLM::context_count(const Context& ctx) const {
  auto it = totals_.find(ctx);
  return it == totals_.end() ? 0 : it->second;
}

double NGramLM::conditional_logprob(std::span<const Label> history, Label next) const {
  check_symbol(next, true);
  for (Label h : history) check_symbol(h, false);
  const Context ctx = context_of(history);
  const double events = static_cast<double>(vocab_size_ + 1);
  const double num = static_cast<double>(count(ctx, next)) + add_k_;
  const double den = static_cast<double>(context_count(ctx)) + add_k_ * events;
  return std::log(num / den);
}

double NGramLM::logprob(std::span<const Label> sequence) const {
  double total = 0.0;
  for (Label s : sequence) check_symbol(s, false);
  for (std::size_t i = 0; i <= sequence.size(); ++i) {
    const Label w = i < sequence.size() ? sequence[i] : end_symbol();
    total += conditional_logprob(sequence.first(i), w);
  }
  return total;
}

double NGramLM::perplexity(std::span<const Label> sequence) const {
  return std::exp(-logprob(sequence) / static_cast<double>(sequence.size() + 1));
}

namespace {

std::string token(Label l, Label end) {
  if (l == NGramLM::kBegin) return "<s>";
  if (l == end) return "</s>";
  return std::to_string(l);
}

Label parse_token(const std::string& t, Label end) {
  if (t == "<s>") return NGramLM::kBegin;
  if (t == "</s>") return end;
  try {
    std::size_t pos = 0;
    int v = std::stoi(t, &pos);
    if (pos != t.size()) throw FormatError("");
    return v;
  } catch (const std::exception&) {
    throw FormatError("ngram: bad token '" + t + "'");
  }
}

std::string expect_field(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("ngram: missing '" + key + "' line");
  std::istringstream ls(line);
  std::string k, v;
  ls >> k >> v;
  if (k != key || v.empty()) throw FormatError("ngram: expected '" + key + "', got '" + line + "'");
  return v;
}

}  // namespace

void NGramLM::save(std::ostream& out) const {
  std::size_t entries = 0;
  for (const auto& [ctx, row] : counts_) entries += row.size();
  out << "lctc-ngram 1\n";
  out << "order " << order_ << '\n';
  out << "vocab_size " << vocab_size_ << '\n';
  out << "add_k " << format_real(add_k_) << '\n';
  out << "entries " << entries << '\n';
  for (const auto& [ctx, row] : counts_) {
    std::string ctx_text;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (i) ctx_text += ' ';
      ctx_text += token(ctx[i], end_symbol());
    }
    if (ctx.empty()) ctx_text = "-";
    for (const auto& [w, c] : row) out << ctx_text << '\t' << token(w, end_symbol()) << '\t' << c << '\n';
  }
}

NGramLM NGramLM::load(std::istream& in) {
  if (expect_field(in, "lctc-ngram") != "1") throw FormatError("ngram: unsupported version");
  const auto order = std::stoul(expect_field(in, "order"));
  const auto vocab = std::stoul(expect_field(in, "vocab_size"));
  const double k = parse_real(expect_field(in, "add_k"));
  const auto entries = std::stoul(expect_field(in, "entries"));
  NGramLM lm(vocab, order, k);
  std::string line;
  for (std::size_t e = 0; e < entries; ++e) {
    if (!std::getline(in, line)) throw FormatError("ngram: truncated count table");
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw FormatError("ngram: malformed entry '" + line + "'");
    }
    Context ctx;
    const std::string ctx_text = line.substr(0, t1);
    if (ctx_text != "-") {
      std::istringstream cs(ctx_text);
      std::string tok;
      while (cs >> tok) ctx.push_back(parse_token(tok, lm.end_symbol()));
    }
    if (ctx.size() != order - 1) throw FormatError("ngram: context length mismatch in '" + line + "'");
    const Label w = parse_token(line.substr(t1 + 1, t2 - t1 - 1), lm.end_symbol());
    lm.check_symbol(w, true);
    const std::uint64_t c = std::stoull(line.substr(t2 + 1));
    lm.counts_[ctx][w] += c;
    lm.totals_[ctx] += c;
  }
  return lm;
}

}  // namespace lctc
