#include "syntax/python_parser.hpp"

#include <cctype>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace codegrag::syntax {
namespace {

enum class Tok { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Lexed {
  std::vector<Token> toks;
  bool indent_error = false;
};

bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  for (char c : word) {
    const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
  }
  return true;
}

Lexed lex(std::string_view src) {
  static const std::vector<std::string> ops = {
      "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=",
      "-=",  "*=",  "/=",  "%=",  "&=",  "|=", "^=", "@=", "(",  ")",  "[",  "]",  "{",  "}",  ",",  ":",
      ".",   ";",   "@",   "=",   "+",   "-",  "*",  "/",  "%",  "&",  "|",  "^",  "~",  "<",  ">",  "!"};
  Lexed out;
  std::vector<int> indents{0};
  int depth = 0;
  bool at_line_start = true;
  std::size_t i = 0;
  const std::size_t n = src.size();
  while (i < n) {
    if (at_line_start && depth == 0) {
      int col = 0;
      std::size_t j = i;
      while (j < n && (src[j] == ' ' || src[j] == '\t' || src[j] == '\f')) {
        col = src[j] == '\t' ? (col / 8 + 1) * 8 : col + 1;
        ++j;
      }
      if (j >= n) break;
      if (src[j] == '\n' || src[j] == '\r' || src[j] == '#') {
        // Blank or comment-only line.
        while (j < n && src[j] != '\n') ++j;
        i = j + 1;
        continue;
      }
      if (col > indents.back()) {
        indents.push_back(col);
        out.toks.push_back({Tok::Indent, ""});
      } else {
        while (col < indents.back()) {
          indents.pop_back();
          out.toks.push_back({Tok::Dedent, ""});
        }
        if (col != indents.back()) {
          out.indent_error = true;
          indents.push_back(col);
          out.toks.push_back({Tok::Indent, ""});
        }
      }
      at_line_start = false;
      i = j;
      continue;
    }
    const char c = src[i];
    if (c == '\n') {
      if (depth == 0) {
        if (!out.toks.empty() && out.toks.back().kind != Tok::Newline) out.toks.push_back({Tok::Newline, ""});
        at_line_start = true;
      }
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
      ++i;
      continue;
    }
    if (c == '\\' && i + 1 < n && (src[i + 1] == '\n' || src[i + 1] == '\r')) {
      i += src[i + 1] == '\r' && i + 2 < n && src[i + 2] == '\n' ? 3 : 2;
      continue;
    }
    if (c == '#') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    std::size_t quote_at = std::string_view::npos;
    if (c == '"' || c == '\'') {
      quote_at = i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80) {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                       static_cast<unsigned char>(src[j]) >= 0x80))
        ++j;
      if (j < n && (src[j] == '"' || src[j] == '\'') && is_string_prefix(src.substr(i, j - i))) {
        quote_at = j;
      } else {
        out.toks.push_back({Tok::Name, std::string(src.substr(i, j - i))});
        i = j;
        continue;
      }
    }
    if (quote_at != std::string_view::npos) {
      const char q = src[quote_at];
      const bool triple = quote_at + 2 < n && src[quote_at + 1] == q && src[quote_at + 2] == q;
      std::size_t j = quote_at + (triple ? 3 : 1);
      while (j < n) {
        if (src[j] == '\\') {
          j += 2;
          continue;
        }
        if (triple) {
          if (src[j] == q && j + 2 < n && src[j + 1] == q && src[j + 2] == q) {
            j += 3;
            break;
          }
        } else if (src[j] == q) {
          ++j;
          break;
        } else if (src[j] == '\n') {
          break;
        }
        ++j;
      }
      if (j > n) j = n;
      out.toks.push_back({Tok::String, std::string(src.substr(i, j - i))});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < n) {
        const char d = src[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '_') {
          ++j;
        } else if ((d == '+' || d == '-') && (src[j - 1] == 'e' || src[j - 1] == 'E') &&
                   !(j - i >= 2 && (src[i + 1] == 'x' || src[i + 1] == 'X'))) {
          ++j;
        } else {
          break;
        }
      }
      out.toks.push_back({Tok::Number, std::string(src.substr(i, j - i))});
      i = j;
      continue;
    }
    bool matched = false;
    for (const auto& op : ops) {
      if (src.substr(i, op.size()) == op) {
        if (op == "(" || op == "[" || op == "{") ++depth;
        if ((op == ")" || op == "]" || op == "}") && depth > 0) --depth;
        out.toks.push_back({Tok::Op, op});
        i += op.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.toks.push_back({Tok::Op, std::string(1, c)});
      ++i;
    }
  }
  if (!out.toks.empty() && out.toks.back().kind != Tok::Newline) out.toks.push_back({Tok::Newline, ""});
  while (indents.size() > 1) {
    indents.pop_back();
    out.toks.push_back({Tok::Dedent, ""});
  }
  out.toks.push_back({Tok::End, ""});
  return out;
}

const std::set<std::string>& keywords() {
  static const std::set<std::string> k = {
      "False",  "None",   "True",     "and",    "as",    "assert", "async",  "await", "break",
      "class",  "continue", "def",    "del",    "elif",  "else",   "except", "finally", "for",
      "from",   "global", "if",       "import", "in",    "is",     "lambda", "nonlocal", "not",
      "or",     "pass",   "raise",    "return", "try",   "while",  "with",   "yield"};
  return k;
}

class PythonParser {
 public:
  explicit PythonParser(std::string_view src) {
    auto lexed = lex(src);
    toks_ = std::move(lexed.toks);
    unit_.partial = lexed.indent_error;
  }

  TranslationUnit run() {
    parse_suite_items(/*top=*/true, nullptr);
    return std::move(unit_);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  TranslationUnit unit_;

  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is_op(std::string_view text, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Op && peek(ahead).text == text;
  }
  bool is_kw(std::string_view text, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Name && peek(ahead).text == text;
  }
  bool is_name(std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Name && !keywords().count(peek(ahead).text);
  }
  const Token& advance() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool accept_op(std::string_view text) {
    if (is_op(text)) {
      advance();
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view text) {
    if (is_kw(text)) {
      advance();
      return true;
    }
    return false;
  }
  void expect_op(std::string_view text) {
    if (!accept_op(text)) throw ParseError("expected '" + std::string(text) + "' got '" + peek().text + "'");
  }
  void expect_kw(std::string_view text) {
    if (!accept_kw(text)) throw ParseError("expected '" + std::string(text) + "'");
  }
  std::string expect_name() {
    if (!is_name()) throw ParseError("expected name got '" + peek().text + "'");
    return advance().text;
  }
  void expect_newline() {
    if (peek().kind == Tok::Newline) {
      advance();
      return;
    }
    if (at_end() || peek().kind == Tok::Dedent) return;
    throw ParseError("expected newline got '" + peek().text + "'");
  }

  // Skips the rest of the logical line, and an indented block below it.
  void recover() {
    unit_.partial = true;
    while (!at_end() && peek().kind != Tok::Newline && peek().kind != Tok::Dedent && peek().kind != Tok::Indent)
      advance();
    if (peek().kind == Tok::Newline) advance();
    if (peek().kind == Tok::Indent) {
      int depth = 0;
      do {
        if (peek().kind == Tok::Indent) ++depth;
        if (peek().kind == Tok::Dedent) --depth;
        advance();
      } while (!at_end() && depth > 0);
    }
  }

  // Parses statements until the enclosing block ends. At top level and in
  // class bodies only definitions are kept; `out` receives function-body
  // statements otherwise.
  void parse_suite_items(bool top, std::vector<StmtPtr>* out) {
    while (!at_end()) {
      if (peek().kind == Tok::Dedent) {
        if (top) {
          advance();  // stray dedent after an indentation error
          continue;
        }
        return;
      }
      if (peek().kind == Tok::Newline) {
        advance();
        continue;
      }
      if (peek().kind == Tok::Indent) {
        // Unexpected indentation: parse it as part of the current block.
        unit_.partial = true;
        advance();
        parse_suite_items(false, out);
        if (peek().kind == Tok::Dedent) advance();
        continue;
      }
      const std::size_t start = pos_;
      try {
        if (out) {
          parse_statement(*out);
        } else {
          parse_definition_level();
        }
      } catch (const ParseError&) {
        pos_ = start;
        recover();
      }
      if (pos_ == start) {
        unit_.partial = true;
        advance();
      }
    }
  }

  void skip_decorators() {
    while (is_op("@")) {
      while (!at_end() && peek().kind != Tok::Newline) advance();
      expect_newline();
    }
  }

  void parse_definition_level() {
    skip_decorators();
    accept_kw("async");
    if (is_kw("def")) {
      parse_def();
      return;
    }
    if (is_kw("class")) {
      parse_class();
      return;
    }
    // Any other module-level statement is parsed for well-formedness and dropped.
    std::vector<StmtPtr> discard;
    parse_statement(discard);
  }

  void parse_class() {
    expect_kw("class");
    unit_.declared_functions.push_back(expect_name());
    unit_.declared_return_types.emplace_back();
    if (is_op("(")) skip_group();
    expect_op(":");
    if (peek().kind != Tok::Newline) {
      std::vector<StmtPtr> discard;
      parse_simple_line(discard);
      return;
    }
    advance();
    if (peek().kind != Tok::Indent) throw ParseError("expected indented class body");
    advance();
    parse_suite_items(/*top=*/false, nullptr);
    if (peek().kind == Tok::Dedent) advance();
  }

  void skip_group() {
    const std::string open = peek().text;
    const std::string close = open == "(" ? ")" : open == "[" ? "]" : "}";
    int depth = 0;
    while (!at_end()) {
      if (is_op(open)) ++depth;
      if (is_op(close)) {
        --depth;
        if (depth == 0) {
          advance();
          return;
        }
      }
      advance();
    }
    throw ParseError("unbalanced group");
  }

  // def name(params) [-> ann]: body. Returns the function name.
  std::string parse_def() {
    expect_kw("def");
    Function fn;
    fn.name = expect_name();
    unit_.declared_functions.push_back(fn.name);
    unit_.declared_return_types.emplace_back();
    expect_op("(");
    while (!is_op(")")) {
      if (accept_op("*") || accept_op("**")) {
        if (!is_name()) {
          expect_op(",");
          continue;
        }
      }
      if (accept_op("/")) {
        if (!accept_op(",")) break;
        continue;
      }
      Param p;
      p.name = expect_name();
      if (accept_op(":")) p.type = expr_text(parse_test());
      if (accept_op("=")) parse_test();
      fn.params.push_back(std::move(p));
      if (!accept_op(",")) break;
    }
    expect_op(")");
    if (accept_op("->")) fn.return_type = expr_text(parse_test());
    expect_op(":");
    const std::size_t slot = unit_.functions.size();
    unit_.functions.emplace_back();  // keep definition order: outer before nested
    fn.body = parse_block(&fn);
    unit_.functions[slot] = std::move(fn);
    return unit_.functions[slot].name;
  }

  static std::string expr_text(const ExprPtr& e) { return e && e->kind == ExprKind::Name ? e->text : ""; }

  Function* current_fn_ = nullptr;

  std::vector<StmtPtr> parse_block(Function* fn = nullptr) {
    Function* saved = current_fn_;
    if (fn) current_fn_ = fn;
    std::vector<StmtPtr> body;
    if (peek().kind != Tok::Newline) {
      parse_simple_line(body);
    } else {
      advance();
      if (peek().kind != Tok::Indent) {
        current_fn_ = saved;
        throw ParseError("expected indented block");
      }
      advance();
      parse_suite_items(false, &body);
      if (peek().kind == Tok::Dedent) advance();
    }
    current_fn_ = saved;
    return body;
  }

  void parse_statement(std::vector<StmtPtr>& out) {
    skip_decorators();
    if (is_kw("async") && (is_kw("def", 1) || is_kw("for", 1) || is_kw("with", 1))) advance();
    if (is_kw("if")) {
      out.push_back(parse_if());
      return;
    }
    if (is_kw("while")) {
      advance();
      auto s = make_stmt(StmtKind::While, "While", "while");
      s->expr = parse_namedexpr();
      expect_op(":");
      s->body = parse_block();
      if (accept_kw("else")) {
        expect_op(":");
        s->orelse = parse_block();
      }
      out.push_back(std::move(s));
      return;
    }
    if (is_kw("for")) {
      advance();
      auto s = make_stmt(StmtKind::RangeFor, "For", "for");
      s->target = parse_target_list();
      expect_kw("in");
      s->expr = parse_testlist();
      expect_op(":");
      s->body = parse_block();
      if (accept_kw("else")) {
        expect_op(":");
        s->orelse = parse_block();
      }
      out.push_back(std::move(s));
      return;
    }
    if (is_kw("try")) {
      out.push_back(parse_try());
      return;
    }
    if (is_kw("with")) {
      out.push_back(parse_with());
      return;
    }
    if (is_kw("def")) {
      auto s = make_stmt(StmtKind::Simple, "FunctionDef", "def");
      s->bound_names.push_back(parse_def());
      out.push_back(std::move(s));
      return;
    }
    if (is_kw("class")) {
      auto s = make_stmt(StmtKind::Simple, "ClassDef", "class");
      s->bound_names.push_back(peek(1).text);
      parse_class();
      out.push_back(std::move(s));
      return;
    }
    if (is_kw("match") && is_name(1)) {
      // Structural pattern matching is not modelled.
      throw ParseError("match statement");
    }
    parse_simple_line(out);
  }

  StmtPtr parse_if() {
    advance();  // if / elif
    auto s = make_stmt(StmtKind::If, "If", "if");
    s->expr = parse_namedexpr();
    expect_op(":");
    s->body = parse_block();
    if (is_kw("elif")) {
      s->orelse.push_back(parse_if());
    } else if (accept_kw("else")) {
      expect_op(":");
      s->orelse = parse_block();
    }
    return s;
  }

  StmtPtr parse_try() {
    advance();
    auto s = make_stmt(StmtKind::Try, "Try", "try");
    expect_op(":");
    s->body = parse_block();
    while (is_kw("except")) {
      advance();
      auto head = make_stmt(StmtKind::Simple, "ExceptHandler", "except");
      accept_op("*");
      if (!is_op(":")) {
        head->expr = parse_test();
        if (accept_kw("as")) head->bound_names.push_back(expect_name());
        else if (accept_op(",")) parse_test();
      }
      expect_op(":");
      std::vector<StmtPtr> handler;
      handler.push_back(std::move(head));
      auto body = parse_block();
      for (auto& b : body) handler.push_back(std::move(b));
      s->handlers.push_back(std::move(handler));
    }
    if (accept_kw("else")) {
      expect_op(":");
      s->orelse = parse_block();
    }
    if (accept_kw("finally")) {
      expect_op(":");
      s->finally_body = parse_block();
    }
    return s;
  }

  StmtPtr parse_with() {
    advance();
    std::vector<std::pair<ExprPtr, ExprPtr>> items;
    const bool paren = is_op("(") && !looks_like_call_paren();
    if (paren) advance();
    while (true) {
      auto e = parse_test();
      ExprPtr target;
      if (accept_kw("as")) target = parse_target();
      items.emplace_back(std::move(e), std::move(target));
      if (!accept_op(",")) break;
      if (paren && is_op(")")) break;
    }
    if (paren) expect_op(")");
    expect_op(":");
    auto body = parse_block();
    // `with a as x, b as y:` nests like separate with statements.
    StmtPtr inner;
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
      auto s = make_stmt(StmtKind::With, "With", "with");
      s->expr = std::move(it->first);
      s->target = std::move(it->second);
      if (inner) s->body.push_back(std::move(inner));
      else s->body = std::move(body);
      inner = std::move(s);
    }
    return inner;
  }

  // `with (open(x)) as f:` vs `with (a as b, c as d):`
  bool looks_like_call_paren() const {
    int depth = 0;
    for (std::size_t k = pos_; k < toks_.size(); ++k) {
      const Token& t = toks_[k];
      if (t.kind == Tok::Op && (t.text == "(" || t.text == "[" || t.text == "{")) ++depth;
      if (t.kind == Tok::Op && (t.text == ")" || t.text == "]" || t.text == "}")) {
        --depth;
        if (depth == 0) {
          const Token& next = k + 1 < toks_.size() ? toks_[k + 1] : toks_.back();
          return !(next.kind == Tok::Op && next.text == ":");
        }
      }
      if (depth == 1 && t.kind == Tok::Name && t.text == "as") return false;
    }
    return true;
  }

  void parse_simple_line(std::vector<StmtPtr>& out) {
    while (true) {
      out.push_back(parse_small_statement());
      if (!accept_op(";")) break;
      if (peek().kind == Tok::Newline) break;
    }
    expect_newline();
  }

  StmtPtr parse_small_statement() {
    if (accept_kw("pass")) return make_stmt(StmtKind::Empty, "Pass", "pass");
    if (accept_kw("break")) return make_stmt(StmtKind::Break, "Break", "break");
    if (accept_kw("continue")) return make_stmt(StmtKind::Continue, "Continue", "continue");
    if (accept_kw("return")) {
      auto s = make_stmt(StmtKind::Return, "Return", "return");
      if (!at_stmt_end()) s->expr = parse_testlist_star();
      return s;
    }
    if (accept_kw("raise")) {
      auto s = make_stmt(StmtKind::Raise, "Raise", "raise");
      if (!at_stmt_end()) {
        s->expr = parse_test();
        if (accept_kw("from")) s->extra = parse_test();
      }
      return s;
    }
    if (accept_kw("assert")) {
      auto s = make_stmt(StmtKind::Assert, "Assert", "assert");
      s->expr = parse_test();
      if (accept_op(",")) s->extra = parse_test();
      return s;
    }
    if (is_kw("global") || is_kw("nonlocal")) {
      const bool global = advance().text == "global";
      auto s = make_stmt(StmtKind::Simple, global ? "Global" : "Nonlocal", global ? "global" : "nonlocal");
      while (true) {
        const std::string name = expect_name();
        if (current_fn_) current_fn_->nonlocal_names.push_back(name);
        if (!accept_op(",")) break;
      }
      return s;
    }
    if (accept_kw("del")) {
      auto s = make_stmt(StmtKind::Expr, "Delete", "del");
      s->expr = parse_testlist();
      return s;
    }
    if (is_kw("import") || is_kw("from")) {
      const bool from = advance().text == "from";
      auto s = make_stmt(StmtKind::Simple, from ? "ImportFrom" : "Import", "import");
      if (from) {
        while (!at_end() && !is_kw("import")) advance();
        expect_kw("import");
      }
      const bool paren = accept_op("(");
      while (!at_stmt_end() && !is_op(")")) {
        std::string name = expect_name();
        while (accept_op(".")) name = expect_name();
        if (accept_kw("as")) name = expect_name();
        s->bound_names.push_back(name);
        if (!accept_op(",")) break;
        if (accept_op("*")) break;
      }
      if (accept_op("*")) {}
      if (paren) expect_op(")");
      return s;
    }
    // Expression, assignment, augmented or annotated assignment.
    auto first = parse_testlist_star();
    if (is_op(":") ) {
      advance();
      auto s = make_stmt(StmtKind::Expr, "AnnAssign", "annassign");
      parse_test();  // annotation
      if (accept_op("=")) {
        auto a = make_expr(ExprKind::Assign, "=");
        a->kids.push_back(std::move(first));
        a->kids.push_back(parse_testlist_star());
        s->expr = std::move(a);
      } else {
        // Annotation only: a definition without a value.
        auto d = make_stmt(StmtKind::Decl, "AnnAssign", "annassign");
        Declarator decl;
        decl.name = expr_text(first);
        if (decl.name.empty()) throw ParseError("annotated non-name");
        d->decls.push_back(std::move(decl));
        return d;
      }
      return s;
    }
    static const std::set<std::string> aug = {"+=", "-=", "*=", "/=", "//=", "%=", "**=",
                                              ">>=", "<<=", "&=", "|=", "^=", "@="};
    if (peek().kind == Tok::Op && aug.count(peek().text)) {
      const std::string op = advance().text;
      auto s = make_stmt(StmtKind::Expr, "AugAssign", "augassign");
      auto a = make_expr(ExprKind::CompoundAssign, op);
      a->kids.push_back(std::move(first));
      a->kids.push_back(parse_testlist_star());
      s->expr = std::move(a);
      return s;
    }
    if (is_op("=")) {
      auto s = make_stmt(StmtKind::Expr, "Assign", "assign");
      auto a = make_expr(ExprKind::Assign, "=");
      a->kids.push_back(std::move(first));
      while (accept_op("=")) a->kids.push_back(parse_testlist_star());
      s->expr = std::move(a);
      return s;
    }
    auto s = make_stmt(StmtKind::Expr, "Expr", "expr");
    s->expr = std::move(first);
    return s;
  }

  bool at_stmt_end() const {
    return peek().kind == Tok::Newline || peek().kind == Tok::End || peek().kind == Tok::Dedent || is_op(";");
  }

  // ---- expressions -------------------------------------------------------
  ExprPtr tuple_of(std::vector<ExprPtr> items) {
    auto t = make_expr(ExprKind::Sequence, "Tuple");
    t->kids = std::move(items);
    return t;
  }

  ExprPtr parse_testlist_star() {
    auto first = is_op("*") ? parse_star() : parse_namedexpr();
    if (!is_op(",")) return first;
    std::vector<ExprPtr> items;
    items.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_stmt_end() || is_op("=") || is_op(")") || is_op(":")) break;
      items.push_back(is_op("*") ? parse_star() : parse_namedexpr());
    }
    return tuple_of(std::move(items));
  }

  ExprPtr parse_testlist() { return parse_testlist_star(); }

  ExprPtr parse_star() {
    expect_op("*");
    auto e = make_expr(ExprKind::Other, "Starred");
    e->kids.push_back(parse_expr());
    return e;
  }

  ExprPtr parse_target() {
    if (is_op("(") || is_op("[")) {
      auto e = parse_atom_expr();
      return e;
    }
    if (is_op("*")) return parse_star();
    return parse_expr();
  }

  ExprPtr parse_target_list() {
    auto first = parse_target();
    if (!is_op(",")) return first;
    std::vector<ExprPtr> items;
    items.push_back(std::move(first));
    while (accept_op(",")) {
      if (is_kw("in") || is_op("=")) break;
      items.push_back(parse_target());
    }
    return tuple_of(std::move(items));
  }

  ExprPtr parse_namedexpr() {
    if (is_name() && is_op(":=", 1)) {
      auto target = make_expr(ExprKind::Name, "", advance().text);
      advance();
      auto a = make_expr(ExprKind::Assign, "=");
      a->kids.push_back(std::move(target));
      a->kids.push_back(parse_test());
      return a;
    }
    return parse_test();
  }

  ExprPtr parse_test() {
    if (is_kw("lambda")) {
      advance();
      int depth = 0;
      while (!at_end()) {
        if (is_op("(") || is_op("[") || is_op("{")) ++depth;
        if (is_op(")") || is_op("]") || is_op("}")) --depth;
        if (depth == 0 && is_op(":")) break;
        advance();
      }
      expect_op(":");
      parse_test();  // lambda bodies are not analysed
      return make_expr(ExprKind::Lambda, "Lambda", "lambda");
    }
    auto body = parse_or();
    if (is_kw("if") ) {
      // Conditional expression; a comprehension `if` never reaches here
      // because comprehension conditions are parsed with parse_or.
      advance();
      auto cond = parse_or();
      expect_kw("else");
      auto orelse = parse_test();
      auto e = make_expr(ExprKind::Conditional, "IfExp");
      e->kids.push_back(std::move(cond));
      e->kids.push_back(std::move(body));
      e->kids.push_back(std::move(orelse));
      return e;
    }
    return body;
  }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (accept_kw("or")) {
      auto e = make_expr(ExprKind::Binary, "or");
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(parse_and());
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    auto lhs = parse_not();
    while (accept_kw("and")) {
      auto e = make_expr(ExprKind::Binary, "and");
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(parse_not());
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (accept_kw("not")) {
      auto e = make_expr(ExprKind::Unary, "not");
      e->kids.push_back(parse_not());
      return e;
    }
    return parse_comparison();
  }

  std::string peek_comp_op() const {
    const Token& t = peek();
    if (t.kind == Tok::Op &&
        (t.text == "<" || t.text == ">" || t.text == "==" || t.text == ">=" || t.text == "<=" || t.text == "!="))
      return t.text;
    if (is_kw("in")) return "in";
    if (is_kw("not") && is_kw("in", 1)) return "notin";
    if (is_kw("is")) return is_kw("not", 1) ? "isnot" : "is";
    return "";
  }

  ExprPtr parse_comparison() {
    auto first = parse_expr();
    std::vector<std::string> ops;
    std::vector<ExprPtr> operands;
    operands.push_back(std::move(first));
    while (true) {
      const std::string op = peek_comp_op();
      if (op.empty()) break;
      advance();
      if (op == "notin" || op == "isnot") advance();
      ops.push_back(op);
      operands.push_back(parse_expr());
    }
    if (ops.empty()) return std::move(operands[0]);
    if (ops.size() == 1) {
      auto e = make_expr(ExprKind::Binary, ops[0]);
      e->kids = std::move(operands);
      return e;
    }
    auto e = make_expr(ExprKind::Other, "Compare");
    e->kids = std::move(operands);
    return e;
  }

  static int precedence(const std::string& op) {
    if (op == "|") return 1;
    if (op == "^") return 2;
    if (op == "&") return 3;
    if (op == "<<" || op == ">>") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "//" || op == "%" || op == "@") return 6;
    return -1;
  }

  ExprPtr parse_expr(int min_prec = 1) {
    auto lhs = parse_factor();
    while (peek().kind == Tok::Op) {
      const std::string op = peek().text;
      const int prec = precedence(op);
      if (prec < 0 || prec < min_prec) break;
      advance();
      auto rhs = parse_expr(prec + 1);
      auto e = make_expr(ExprKind::Binary, op);
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_factor() {
    if (is_op("-") || is_op("+") || is_op("~")) {
      const std::string op = advance().text;
      auto e = make_expr(ExprKind::Unary, op == "-" ? "neg" : op == "+" ? "pos" : "~");
      e->kids.push_back(parse_factor());
      return e;
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    accept_kw("await");
    auto base = parse_atom_expr();
    if (accept_op("**")) {
      auto e = make_expr(ExprKind::Binary, "**");
      e->kids.push_back(std::move(base));
      e->kids.push_back(parse_factor());
      return e;
    }
    return base;
  }

  void parse_call_args(Expr& call) {
    while (!is_op(")")) {
      if (accept_op("**") || accept_op("*")) {
        call.kids.push_back(parse_test());
      } else if (is_name() && is_op("=", 1)) {
        advance();
        advance();
        call.kids.push_back(parse_test());
      } else {
        auto arg = parse_namedexpr();
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) arg = parse_comprehension(std::move(arg), "GeneratorExp");
        call.kids.push_back(std::move(arg));
      }
      if (!accept_op(",")) break;
    }
    expect_op(")");
  }

  ExprPtr parse_subscript_item() {
    ExprPtr lower;
    if (!is_op(":")) {
      lower = parse_namedexpr();
      if (!is_op(":")) return lower;
    }
    auto slice = make_expr(ExprKind::Slice, "Slice");
    advance();  // ':'
    ExprPtr upper;
    ExprPtr step;
    if (!is_op("]") && !is_op(",") && !is_op(":")) upper = parse_test();
    if (accept_op(":")) {
      if (!is_op("]") && !is_op(",")) step = parse_test();
    }
    slice->kids.push_back(std::move(lower));
    slice->kids.push_back(std::move(upper));
    slice->kids.push_back(std::move(step));
    return slice;
  }

  ExprPtr parse_atom_expr() {
    auto e = parse_atom();
    while (true) {
      if (is_op("(")) {
        advance();
        ExprPtr call;
        if (e->kind == ExprKind::Name) {
          call = make_expr(ExprKind::Call, "", e->text);
        } else if (e->kind == ExprKind::Member) {
          call = make_expr(ExprKind::MethodCall, "", e->text);
          call->kids.push_back(std::move(e->kids[0]));
        } else {
          call = make_expr(ExprKind::Call);
          call->callee = std::move(e);
        }
        parse_call_args(*call);
        e = std::move(call);
      } else if (is_op("[")) {
        advance();
        auto s = make_expr(ExprKind::Subscript);
        s->kids.push_back(std::move(e));
        std::vector<ExprPtr> items;
        items.push_back(parse_subscript_item());
        bool tuple = false;
        while (accept_op(",")) {
          tuple = true;
          if (is_op("]")) break;
          items.push_back(parse_subscript_item());
        }
        expect_op("]");
        s->kids.push_back(tuple ? tuple_of(std::move(items)) : std::move(items[0]));
        e = std::move(s);
      } else if (is_op(".")) {
        advance();
        auto m = make_expr(ExprKind::Member, "", expect_name());
        m->kids.push_back(std::move(e));
        e = std::move(m);
      } else {
        return e;
      }
    }
  }

  // `elt for target in iter [if cond]...` with elt already parsed.
  ExprPtr parse_comprehension(ExprPtr elt, const std::string& kind, ExprPtr value = nullptr) {
    auto c = make_expr(ExprKind::Comprehension, kind);
    c->kids.push_back(std::move(elt));
    if (value) c->kids.push_back(std::move(value));
    while (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
      accept_kw("async");
      expect_kw("for");
      c->targets.push_back(parse_target_list());
      expect_kw("in");
      c->iters.push_back(parse_or());
      while (accept_kw("if")) c->conds.push_back(parse_or());
    }
    return c;
  }

  ExprPtr parse_atom() {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      return make_expr(ExprKind::Literal, "Constant", advance().text);
    }
    if (t.kind == Tok::String) {
      std::string text = advance().text;
      while (peek().kind == Tok::String) text += " " + advance().text;
      return make_expr(ExprKind::Literal, "Constant", text);
    }
    if (t.kind == Tok::Name) {
      if (t.text == "True" || t.text == "False" || t.text == "None")
        return make_expr(ExprKind::Literal, "Constant", advance().text);
      if (t.text == "yield") {
        advance();
        auto e = make_expr(ExprKind::Other, "Yield");
        accept_kw("from");
        if (!is_op(")") && !at_stmt_end()) e->kids.push_back(parse_testlist_star());
        return e;
      }
      if (keywords().count(t.text)) throw ParseError("unexpected keyword '" + t.text + "'");
      return make_expr(ExprKind::Name, "", advance().text);
    }
    if (t.kind == Tok::Op) {
      if (t.text == "...") {
        advance();
        return make_expr(ExprKind::Literal, "Constant", "...");
      }
      if (t.text == "(") {
        advance();
        if (accept_op(")")) return tuple_of({});
        if (is_kw("yield")) {
          auto y = parse_atom();
          expect_op(")");
          return y;
        }
        auto first = is_op("*") ? parse_star() : parse_namedexpr();
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
          auto g = parse_comprehension(std::move(first), "GeneratorExp");
          expect_op(")");
          return g;
        }
        if (accept_op(")")) return first;
        std::vector<ExprPtr> items;
        items.push_back(std::move(first));
        while (accept_op(",")) {
          if (is_op(")")) break;
          items.push_back(is_op("*") ? parse_star() : parse_namedexpr());
        }
        expect_op(")");
        return tuple_of(std::move(items));
      }
      if (t.text == "[") {
        advance();
        auto list = make_expr(ExprKind::Sequence, "List");
        if (accept_op("]")) return list;
        auto first = is_op("*") ? parse_star() : parse_namedexpr();
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
          auto c = parse_comprehension(std::move(first), "ListComp");
          expect_op("]");
          return c;
        }
        list->kids.push_back(std::move(first));
        while (accept_op(",")) {
          if (is_op("]")) break;
          list->kids.push_back(is_op("*") ? parse_star() : parse_namedexpr());
        }
        expect_op("]");
        return list;
      }
      if (t.text == "{") {
        advance();
        if (accept_op("}")) return make_expr(ExprKind::Sequence, "Dict");
        if (accept_op("**")) {
          auto d = make_expr(ExprKind::Sequence, "Dict");
          d->kids.push_back(parse_expr());
          while (accept_op(",")) {
            if (is_op("}")) break;
            if (accept_op("**")) {
              d->kids.push_back(parse_expr());
              continue;
            }
            d->kids.push_back(parse_test());
            expect_op(":");
            d->kids.push_back(parse_test());
          }
          expect_op("}");
          return d;
        }
        auto first = is_op("*") ? parse_star() : parse_test();
        if (accept_op(":")) {
          auto value = parse_test();
          if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
            auto c = parse_comprehension(std::move(first), "DictComp", std::move(value));
            expect_op("}");
            return c;
          }
          auto d = make_expr(ExprKind::Sequence, "Dict");
          d->kids.push_back(std::move(first));
          d->kids.push_back(std::move(value));
          while (accept_op(",")) {
            if (is_op("}")) break;
            if (accept_op("**")) {
              d->kids.push_back(parse_expr());
              continue;
            }
            d->kids.push_back(parse_test());
            expect_op(":");
            d->kids.push_back(parse_test());
          }
          expect_op("}");
          return d;
        }
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
          auto c = parse_comprehension(std::move(first), "SetComp");
          expect_op("}");
          return c;
        }
        auto set = make_expr(ExprKind::Sequence, "Set");
        set->kids.push_back(std::move(first));
        while (accept_op(",")) {
          if (is_op("}")) break;
          set->kids.push_back(is_op("*") ? parse_star() : parse_test());
        }
        expect_op("}");
        return set;
      }
    }
    throw ParseError("unexpected token '" + t.text + "'");
  }
};

}  // namespace

TranslationUnit parse_python(std::string_view code) { return PythonParser(code).run(); }

}  // namespace codegrag::syntax
