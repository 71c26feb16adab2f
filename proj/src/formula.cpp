#include "exergm/formula.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

namespace exergm {

FormulaError::FormulaError(std::size_t position, const std::string& message)
    : std::invalid_argument("formula error at position " + std::to_string(position) +
                            ": " + message),
      position_(position) {}

namespace {

enum class Tok { ident, number, lparen, rparen, comma, plus, star, slash, ge, le, eqeq, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::comma: return "','";
    case Tok::plus: return "'+'";
    case Tok::star: return "'*'";
    case Tok::slash: return "'/'";
    case Tok::ge: return "'>='";
    case Tok::le: return "'<='";
    case Tok::eqeq: return "'=='";
    case Tok::end: return "end of input";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) ||
                              s[i] == '_' || s[i] == '.')) {
        ++i;
      }
      out.push_back({Tok::ident, std::string(s.substr(start, i - start)), start});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
      ++i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) ||
                              s[i] == '.' || s[i] == 'e' || s[i] == 'E' ||
                              ((s[i] == '-' || s[i] == '+') &&
                               (s[i - 1] == 'e' || s[i - 1] == 'E')))) {
        ++i;
      }
      out.push_back({Tok::number, std::string(s.substr(start, i - start)), start});
      continue;
    }
    auto two = [&](char a, char b) { return c == a && i + 1 < s.size() && s[i + 1] == b; };
    if (two('>', '=')) { out.push_back({Tok::ge, ">=", start}); i += 2; continue; }
    if (two('<', '=')) { out.push_back({Tok::le, "<=", start}); i += 2; continue; }
    if (two('=', '=')) { out.push_back({Tok::eqeq, "==", start}); i += 2; continue; }
    Tok k;
    switch (c) {
      case '(': k = Tok::lparen; break;
      case ')': k = Tok::rparen; break;
      case ',': k = Tok::comma; break;
      case '+': k = Tok::plus; break;
      case '*': k = Tok::star; break;
      case '/': k = Tok::slash; break;
      default:
        throw FormulaError(start, std::string("unexpected character '") + c + "'");
    }
    out.push_back({k, std::string(1, c), start});
    ++i;
  }
  out.push_back({Tok::end, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  ModelSpec formula() {
    ModelSpec m;
    item(m);
    while (peek().kind == Tok::plus) {
      ++at_;
      item(m);
    }
    expect(Tok::end);
    if (m.terms.empty()) throw FormulaError(0, "model has no free terms");
    for (std::size_t a = 0; a < m.terms.size(); ++a) {
      for (std::size_t b = 0; b < a; ++b) {
        if (m.terms[a] == m.terms[b]) {
          throw FormulaError(term_pos_[a], "duplicate term '" + m.terms[a].display_name() + "'");
        }
      }
    }
    return m;
  }

 private:
  const Token& peek() const { return toks_[at_]; }

  const Token& expect(Tok kind) {
    const Token& t = peek();
    if (t.kind != kind) {
      throw FormulaError(t.pos, std::string("expected ") + tok_name(kind) + " but found " +
                                    (t.kind == Tok::end ? "end of input" : "'" + t.text + "'"));
    }
    ++at_;
    return t;
  }

  const Token& expect_word(const char* word) {
    const Token& t = peek();
    if (t.kind != Tok::ident || t.text != word) {
      throw FormulaError(t.pos, std::string("expected '") + word + "' but found " +
                                    (t.kind == Tok::end ? "end of input" : "'" + t.text + "'"));
    }
    ++at_;
    return t;
  }

  double number() {
    const Token& t = peek();
    if (t.kind != Tok::number) expect(Tok::number);
    double v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size() || !std::isfinite(v)) {
      throw FormulaError(t.pos, "malformed number '" + t.text + "'");
    }
    ++at_;
    return v;
  }

  void item(ModelSpec& m) {
    const Token& t = peek();
    if (t.kind == Tok::ident && t.text == "offset") {
      ++at_;
      expect(Tok::lparen);
      OffsetSpec o;
      o.kind = OffsetSpec::Kind::term;
      o.term = term();
      expect(Tok::rparen);
      m.offsets.push_back(o);
      return;
    }
    if (t.kind == Tok::ident && t.text == "constraint") {
      ++at_;
      expect(Tok::lparen);
      OffsetSpec o;
      o.kind = OffsetSpec::Kind::constraint;
      o.term = term();
      const Token& op = peek();
      if (op.kind == Tok::ge) {
        o.op = ConstraintOp::at_least;
      } else if (op.kind == Tok::le) {
        o.op = ConstraintOp::at_most;
      } else {
        throw FormulaError(op.pos, "expected '>=' or '<=' in constraint");
      }
      ++at_;
      o.bound = number();
      expect(Tok::rparen);
      m.offsets.push_back(o);
      return;
    }
    term_pos_.push_back(t.pos);
    m.terms.push_back(term());
  }

  TermSpec term() {
    TermSpec t = transformed();
    if (peek().kind == Tok::star) {
      ++at_;
      const Token& w = peek();
      if (w.kind == Tok::ident && w.text == "I") {
        ++at_;
        expect(Tok::lparen);
        expect_word("n");
        expect(Tok::eqeq);
        const Token& k = peek();
        const double v = number();
        if (v != std::floor(v) || v < 1) throw FormulaError(k.pos, "size indicator needs a positive integer");
        t.interaction = Interaction::size_indicator;
        t.size_k = static_cast<int>(v);
        expect(Tok::rparen);
      } else if (w.kind == Tok::ident && w.text == "log") {
        ++at_;
        expect(Tok::lparen);
        const Token& one = peek();
        if (number() != 1.0) throw FormulaError(one.pos, "expected log(1/n)");
        expect(Tok::slash);
        expect_word("n");
        expect(Tok::rparen);
        t.interaction = Interaction::log_inverse_size;
      } else {
        throw FormulaError(w.pos, "unknown interaction '" + w.text +
                                      "', expected I(n == k) or log(1/n)");
      }
    }
    return t;
  }

  TermSpec transformed() {
    const Token& t = peek();
    if (t.kind == Tok::ident) {
      Transform tr = Transform::identity;
      if (t.text == "sqrt") tr = Transform::sqrt;
      else if (t.text == "log") tr = Transform::log;
      else if (t.text == "pow") tr = Transform::power;
      else if (t.text == "scale") tr = Transform::scale;
      if (tr != Transform::identity) {
        ++at_;
        expect(Tok::lparen);
        TermSpec s = base();
        s.transform = tr;
        if (tr == Transform::power || tr == Transform::scale) {
          expect(Tok::comma);
          s.transform_arg = number();
        }
        expect(Tok::rparen);
        return s;
      }
    }
    return base();
  }

  TermSpec base() {
    const Token& t = peek();
    if (t.kind != Tok::ident) {
      throw FormulaError(t.pos, "expected a term but found " +
                                    (t.kind == Tok::end ? std::string("end of input") : "'" + t.text + "'"));
    }
    static const std::pair<const char*, BaseStat> kBases[] = {
        {"edges", BaseStat::edges},         {"mutual", BaseStat::mutual},
        {"ttriad", BaseStat::ttriad},       {"fourcycle", BaseStat::fourcycle},
        {"nodematch", BaseStat::nodematch}, {"nodeicov", BaseStat::nodeicov},
        {"nodeocov", BaseStat::nodeocov}};
    for (const auto& [name, b] : kBases) {
      if (t.text != name) continue;
      ++at_;
      TermSpec s;
      s.base = b;
      if (base_needs_attribute(b)) {
        expect(Tok::lparen);
        s.attribute = expect(Tok::ident).text;
        expect(Tok::rparen);
      }
      return s;
    }
    throw FormulaError(t.pos, "unknown term '" + t.text + "'");
  }

  std::vector<Token> toks_;
  std::size_t at_ = 0;
  std::vector<std::size_t> term_pos_;
};

}  // namespace

ModelSpec parse_formula(std::string_view text) {
  return Parser(text).formula();
}

std::string print_formula(const ModelSpec& model) {
  std::string out;
  auto append = [&](const std::string& s) {
    if (!out.empty()) out += " + ";
    out += s;
  };
  for (const auto& t : model.terms) append(t.display_name());
  for (const auto& o : model.offsets) append(o.display_name());
  return out;
}

}  // namespace exergm
