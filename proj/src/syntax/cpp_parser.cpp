#include "syntax/cpp_parser.hpp"

#include <cctype>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace codegrag::syntax {
namespace {

enum class Tok { Ident, Number, String, Char, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  // For '>' only: the next token is adjacent (lexer splits ">>" and ">>=").
  bool joined = false;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& punctuators() {
  // Longest first. ">>" and ">>=" are deliberately absent (see Token::joined).
  static const std::vector<std::string> p = {
      "<<=", "<=>", "...", "->*", "::", "->", "++", "--", "<<", "<=", ">=", "==", "!=", "&&", "||",
      "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", ".*", "{", "}", "[", "]", "(", ")", ";", ":",
      ",", ".", "?", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "=", "<", ">", "#", "@", "$", "\\"};
  return p;
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = src.size();
  bool line_start = true;
  while (i < n) {
    const char c = src[i];
    if (c == '\n') {
      line_start = true;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '#' && line_start) {
      // Preprocessor line, with backslash continuations.
      while (i < n && src[i] != '\n') {
        if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') i += 2;
        else ++i;
      }
      continue;
    }
    line_start = false;
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      const auto end = src.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      std::string word(src.substr(i, j - i));
      // Raw and prefixed string literals.
      if (j < n && src[j] == '"' && (word == "R" || word == "u8R" || word == "LR" || word == "uR" || word == "UR")) {
        const auto paren = src.find('(', j);
        if (paren != std::string_view::npos) {
          const std::string delim = ")" + std::string(src.substr(j + 1, paren - j - 1)) + "\"";
          const auto end = src.find(delim, paren);
          const std::size_t stop = end == std::string_view::npos ? n : end + delim.size();
          out.push_back({Tok::String, std::string(src.substr(i, stop - i))});
          i = stop;
          continue;
        }
      }
      if (j < n && (src[j] == '"' || src[j] == '\'') && (word == "L" || word == "u" || word == "U" || word == "u8")) {
        i = j;  // prefix is dropped; the literal itself is lexed below
        continue;
      }
      out.push_back({Tok::Ident, std::move(word)});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < n) {
        const char d = src[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '\'') {
          ++j;
        } else if ((d == '+' || d == '-') && j > i && (src[j - 1] == 'e' || src[j - 1] == 'E') &&
                   !(src.substr(i, 2) == "0x" || src.substr(i, 2) == "0X")) {
          ++j;
        } else {
          break;
        }
      }
      out.push_back({Tok::Number, std::string(src.substr(i, j - i))});
      i = j;
      continue;
    }
    if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < n && src[j] != c && src[j] != '\n') {
        if (src[j] == '\\' && j + 1 < n) ++j;
        ++j;
      }
      if (j < n && src[j] == c) ++j;
      out.push_back({c == '"' ? Tok::String : Tok::Char, std::string(src.substr(i, j - i))});
      i = j;
      continue;
    }
    if (c == '>') {
      if (i + 1 < n && src[i + 1] == '>') {
        out.push_back({Tok::Punct, ">", true});
        if (i + 2 < n && src[i + 2] == '=') {
          out.push_back({Tok::Punct, ">="});
          i += 3;
        } else {
          out.push_back({Tok::Punct, ">"});
          i += 2;
        }
        continue;
      }
    }
    bool matched = false;
    for (const auto& p : punctuators()) {
      if (src.substr(i, p.size()) == p) {
        out.push_back({Tok::Punct, p});
        i += p.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back({Tok::Punct, std::string(1, c)});
      ++i;
    }
  }
  out.push_back({Tok::End, ""});
  return out;
}

const std::set<std::string>& builtin_type_words() {
  static const std::set<std::string> s = {"void",  "bool",   "char",     "short",    "int",      "long",
                                          "float", "double", "unsigned", "signed",   "auto",     "wchar_t",
                                          "char8_t", "char16_t", "char32_t"};
  return s;
}

const std::set<std::string>& library_types() {
  static const std::set<std::string> s = {
      "string",         "vector",        "map",           "set",          "unordered_map", "unordered_set",
      "multiset",       "multimap",      "pair",          "tuple",        "deque",         "queue",
      "stack",          "priority_queue", "list",         "array",        "bitset",        "size_t",
      "ptrdiff_t",      "int8_t",        "int16_t",       "int32_t",      "int64_t",       "uint8_t",
      "uint16_t",       "uint32_t",      "uint64_t",      "stringstream", "istringstream", "ostringstream",
      "function",       "optional",      "string_view",   "iterator",     "const_iterator", "numeric_limits",
      "greater",        "less",          "ostream",       "istream",      "wstring",       "size_type",
      "forward_list",   "valarray",      "complex",       "any",          "variant"};
  return s;
}

const std::set<std::string>& template_types() {
  static const std::set<std::string> s = {
      "vector", "map",   "set",    "unordered_map",  "unordered_set", "multiset", "multimap",       "pair",
      "tuple",  "deque", "queue",  "stack",          "priority_queue", "list",    "array",          "bitset",
      "function", "optional", "numeric_limits", "greater", "less", "forward_list", "valarray", "complex",
      "variant", "basic_string"};
  return s;
}

const std::set<std::string>& decl_qualifiers() {
  static const std::set<std::string> s = {"const",   "static",   "constexpr", "inline",   "volatile",
                                          "extern",  "register", "mutable",   "typename", "struct",
                                          "enum",    "thread_local", "consteval", "constinit"};
  return s;
}

std::string last_component(const std::string& qualified) {
  const auto pos = qualified.rfind("::");
  return pos == std::string::npos ? qualified : qualified.substr(pos + 2);
}

class CppParser {
 public:
  explicit CppParser(std::string_view src) : toks_(lex(src)) {}

  TranslationUnit run() {
    while (!at_end()) {
      const std::size_t start = pos_;
      try {
        parse_top_level();
      } catch (const ParseError&) {
        unit_.partial = true;
        pos_ = start;
        recover_top_level();
      }
      if (pos_ == start) {
        unit_.partial = true;
        advance();
      }
    }
    return std::move(unit_);
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  TranslationUnit unit_;
  std::set<std::string> user_types_;

  // ---- token helpers -----------------------------------------------------
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is(std::string_view text, std::size_t ahead = 0) const {
    const auto& t = peek(ahead);
    return t.kind != Tok::End && t.kind != Tok::String && t.kind != Tok::Char && t.text == text;
  }
  bool is_ident(std::size_t ahead = 0) const { return peek(ahead).kind == Tok::Ident; }
  const Token& advance() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool accept(std::string_view text) {
    if (is(text)) {
      advance();
      return true;
    }
    return false;
  }
  void expect(std::string_view text) {
    if (!accept(text)) throw ParseError("expected '" + std::string(text) + "' got '" + peek().text + "'");
  }
  std::string expect_ident() {
    if (!is_ident()) throw ParseError("expected identifier got '" + peek().text + "'");
    return advance().text;
  }

  // Skips a balanced (), [], {} group starting at the current opener.
  void skip_balanced() {
    const std::string open = peek().text;
    const std::string close = open == "(" ? ")" : open == "[" ? "]" : "}";
    int depth = 0;
    while (!at_end()) {
      if (is(open)) ++depth;
      else if (is(close)) {
        --depth;
        if (depth == 0) {
          advance();
          return;
        }
      }
      advance();
    }
    throw ParseError("unbalanced " + open);
  }

  void recover_top_level() {
    int depth = 0;
    while (!at_end()) {
      if (is("{")) {
        ++depth;
      } else if (is("}")) {
        --depth;
        if (depth <= 0) {
          advance();
          if (accept(";")) {}
          return;
        }
      } else if (is(";") && depth == 0) {
        advance();
        return;
      }
      advance();
    }
  }

  // ---- types -------------------------------------------------------------
  bool is_known_type_name(const std::string& name) const {
    const std::string base = last_component(name);
    return builtin_type_words().count(base) || library_types().count(base) || user_types_.count(name) ||
           user_types_.count(base);
  }

  // Consumes a template argument list starting at '<'. Fails on tokens that
  // cannot appear inside one.
  std::string parse_template_args() {
    std::string text = "<";
    advance();
    int depth = 1;
    while (!at_end()) {
      const Token& t = peek();
      if (t.kind == Tok::Punct) {
        if (t.text == ";" || t.text == "{" || t.text == "}") throw ParseError("bad template args");
        if (t.text == "<") ++depth;
        if (t.text == ">") {
          --depth;
          text += ">";
          advance();
          if (depth == 0) return text;
          continue;
        }
        if (t.text == "(") {
          const std::size_t b = pos_;
          skip_balanced();
          for (std::size_t k = b; k < pos_; ++k) text += toks_[k].text;
          continue;
        }
      }
      if (!text.empty() && text.back() != '<' && text.back() != ',' && t.kind == Tok::Ident &&
          (std::isalnum(static_cast<unsigned char>(text.back())) || text.back() == '_'))
        text += " ";
      text += t.text;
      advance();
    }
    throw ParseError("unterminated template args");
  }

  // Parses a type. When strict, the base name must be a known type.
  std::optional<std::string> try_parse_type(bool strict) {
    const std::size_t save = pos_;
    try {
      auto t = parse_type(strict);
      if (t) return t;
    } catch (const ParseError&) {
    }
    pos_ = save;
    return std::nullopt;
  }

  std::optional<std::string> parse_type(bool strict) {
    std::string text;
    bool saw_base = false;
    while (is_ident() && decl_qualifiers().count(peek().text)) {
      const std::string q = advance().text;
      if (q == "const") text += "const ";
    }
    if (is_ident() && builtin_type_words().count(peek().text)) {
      while (is_ident() && (builtin_type_words().count(peek().text) || peek().text == "const")) {
        text += advance().text + " ";
      }
      saw_base = true;
    } else if (is_ident() || (is("::") && is_ident(1))) {
      std::string name;
      if (accept("::")) name = "::";
      name += advance().text;
      while (is("::") && is_ident(1)) {
        advance();
        name += "::" + advance().text;
      }
      if (strict && !is_known_type_name(name)) return std::nullopt;
      text += name;
      if (is("<") && (template_types().count(last_component(name)) || user_types_.count(name))) {
        text += parse_template_args();
        while (is("::") && is_ident(1)) {
          advance();
          text += "::" + advance().text;
        }
      }
      text += " ";
      saw_base = true;
    }
    if (!saw_base) return std::nullopt;
    while (true) {
      if (is("const") || is("volatile")) {
        text += advance().text + " ";
      } else if (is("*") || is("&") || is("&&")) {
        text += advance().text;
      } else {
        break;
      }
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    return text;
  }

  // Whether the tokens at the cursor start a declaration.
  bool looks_like_declaration() {
    const std::size_t save = pos_;
    bool result = false;
    if (is_ident() && (decl_qualifiers().count(peek().text) || builtin_type_words().count(peek().text))) {
      result = !(peek().text == "struct" && is("{", 2));
      if (result && builtin_type_words().count(peek().text) && is("(", 1)) result = false;  // int(x)
    } else if (is_ident() || is("::")) {
      auto t = try_parse_type(false);
      if (t) {
        // `T name` or `T *name` / `T &name` followed by a declarator end.
        if (is("[") && is_ident(1)) {
          result = last_component(*t) == "auto";  // structured binding
        } else if (is_ident()) {
          const std::string& next = peek(1).text;
          result = peek(1).kind == Tok::Punct &&
                   (next == "=" || next == ";" || next == "," || next == "[" || next == "(" || next == "{" ||
                    next == ":" || next == ")");
          if (result && next == "(" && !is_known_type_name(*t) && t->find('<') == std::string::npos) {
            // `foo bar(...)` with unknown foo is most likely still a declaration
            result = true;
          }
        }
      }
    }
    pos_ = save;
    return result;
  }

  // ---- top level ---------------------------------------------------------
  void parse_top_level() {
    if (accept(";")) return;
    if (is("}")) {  // closing brace of a namespace
      advance();
      return;
    }
    if (is("using")) {
      advance();
      if (is_ident() && is("=", 1)) user_types_.insert(peek().text);
      skip_to_semicolon();
      return;
    }
    if (is("typedef")) {
      advance();
      std::string last;
      while (!at_end() && !is(";")) {
        if (is("{")) skip_balanced();
        else {
          if (is_ident()) last = peek().text;
          advance();
        }
      }
      accept(";");
      if (!last.empty()) user_types_.insert(last);
      return;
    }
    if (is("namespace")) {
      advance();
      while (is_ident() || is("::")) advance();
      if (accept("=")) {
        skip_to_semicolon();
        return;
      }
      expect("{");  // contents are parsed as top-level declarations
      return;
    }
    if (is("extern") && peek(1).kind == Tok::String) {
      advance();
      advance();
      if (is("{")) advance();
      return;
    }
    if (is("template")) {
      advance();
      if (is("<")) {
        // Record template parameter names as types.
        advance();
        int depth = 1;
        while (!at_end() && depth > 0) {
          if (is("<")) ++depth;
          else if (is(">")) --depth;
          else if ((is("typename") || is("class")) && is_ident(1)) user_types_.insert(peek(1).text);
          advance();
        }
      }
      return;
    }
    if ((is("struct") || is("class") || is("union") || is("enum")) && (is_ident(1) || is("{", 1))) {
      advance();
      if (is("class") || is("struct")) advance();  // enum class
      std::string name;
      if (is_ident()) {
        name = advance().text;
        user_types_.insert(name);
      }
      // `struct X x;` falls through to a declaration.
      if (is_ident() || is("*") || is("&")) {
        skip_to_semicolon();
        return;
      }
      while (!at_end() && !is("{") && !is(";")) advance();
      if (is("{")) skip_balanced();
      skip_to_semicolon();
      return;
    }
    parse_function_or_global();
  }

  void skip_to_semicolon() {
    while (!at_end() && !is(";")) {
      if (is("{") || is("(") || is("[")) skip_balanced();
      else advance();
    }
    accept(";");
  }

  void parse_function_or_global() {
    const std::size_t start = pos_;
    std::string ret;
    // Constructors or macros without a return type are not supported.
    auto t = parse_type(false);
    if (!t) throw ParseError("expected declaration");
    ret = *t;
    std::string name;
    if (is("operator")) {
      advance();
      name = "operator";
      while (!at_end() && !is("(")) name += advance().text;
      if (name == "operator" && is("(")) {  // operator()
        advance();
        expect(")");
        name += "()";
      }
    } else {
      if (!is_ident()) {
        // `int main ()` style is covered; everything else is unsupported here.
        throw ParseError("expected function name");
      }
      name = advance().text;
      while (is("::") && (is_ident(1) || is("~", 1))) {
        advance();
        if (accept("~")) name += "::~";
        else name += "::";
        name += advance().text;
      }
    }
    if (!is("(")) {
      // Global variable.
      pos_ = start;
      skip_to_semicolon();
      return;
    }
    Function fn;
    fn.name = name;
    fn.return_type = ret;
    advance();
    parse_params(fn);
    while (is("const") || is("noexcept") || is("override") || is("final") || is("mutable")) {
      advance();
      if (is("(")) skip_balanced();
    }
    if (accept("->")) {
      auto trailing = parse_type(false);
      if (trailing) fn.return_type = *trailing;
    }
    unit_.declared_functions.push_back(last_component(name));
    unit_.declared_return_types.push_back(fn.return_type);
    if (accept(";")) return;
    if (accept("=")) {  // = default / = delete
      skip_to_semicolon();
      return;
    }
    if (accept(":")) {  // constructor initializer list
      while (!at_end() && !is("{")) {
        if (is("(")) skip_balanced();
        else advance();
      }
    }
    if (!is("{")) throw ParseError("expected function body");
    advance();
    fn.body = parse_block_body();
    unit_.functions.push_back(std::move(fn));
  }

  void parse_params(Function& fn) {
    if (accept(")")) return;
    if (is("void") && is(")", 1)) {
      advance();
      advance();
      return;
    }
    while (true) {
      if (accept("...")) {
        expect(")");
        return;
      }
      auto t = parse_type(false);
      if (!t) throw ParseError("expected parameter type");
      Param p;
      p.type = *t;
      if (is_ident()) p.name = advance().text;
      while (is("[")) {
        skip_balanced();
        p.type += "[]";
      }
      if (accept("=")) {
        int depth = 0;
        while (!at_end()) {
          if (depth == 0 && (is(",") || is(")"))) break;
          if (is("(") || is("{") || is("[")) ++depth;
          if (is(")") || is("}") || is("]")) --depth;
          advance();
        }
      }
      if (!p.name.empty()) fn.params.push_back(std::move(p));
      if (accept(")")) return;
      expect(",");
    }
  }

  // ---- statements --------------------------------------------------------
  // Parses statements up to the closing '}' (consumed). Bad statements are
  // skipped; a missing '}' at end of input marks the unit partial.
  std::vector<StmtPtr> parse_block_body() {
    std::vector<StmtPtr> out;
    while (true) {
      if (at_end()) {
        unit_.partial = true;
        return out;
      }
      if (accept("}")) return out;
      const std::size_t start = pos_;
      try {
        if (auto s = parse_statement()) out.push_back(std::move(s));
      } catch (const ParseError&) {
        unit_.partial = true;
        pos_ = start;
        recover_statement();
      }
      if (pos_ == start) {
        unit_.partial = true;
        advance();
      }
    }
  }

  void recover_statement() {
    while (!at_end()) {
      if (is(";")) {
        advance();
        return;
      }
      if (is("}")) return;
      if (is("{")) {
        try {
          skip_balanced();
        } catch (const ParseError&) {
        }
        return;
      }
      if (is("(") || is("[")) {
        try {
          skip_balanced();
        } catch (const ParseError&) {
          return;
        }
        continue;
      }
      advance();
    }
  }

  std::vector<StmtPtr> parse_sub_statement() {
    std::vector<StmtPtr> out;
    if (auto s = parse_statement()) out.push_back(std::move(s));
    return out;
  }

  StmtPtr parse_statement() {
    if (accept("{")) {
      auto s = make_stmt(StmtKind::Block, "CompoundStmt", "block");
      s->body = parse_block_body();
      return s;
    }
    if (accept(";")) return make_stmt(StmtKind::Empty, "NullStmt", "null");
    if (is("if")) return parse_if();
    if (is("for")) return parse_for();
    if (is("while")) {
      advance();
      auto s = make_stmt(StmtKind::While, "WhileStmt", "while");
      expect("(");
      s->expr = parse_expression();
      expect(")");
      s->body = parse_sub_statement();
      return s;
    }
    if (is("do")) {
      advance();
      auto s = make_stmt(StmtKind::DoWhile, "DoStmt", "do");
      s->body = parse_sub_statement();
      expect("while");
      expect("(");
      s->expr = parse_expression();
      expect(")");
      expect(";");
      return s;
    }
    if (is("return") || is("co_return")) {
      advance();
      auto s = make_stmt(StmtKind::Return, "ReturnStmt", "return");
      if (!is(";")) s->expr = is("{") ? parse_init_list() : parse_expression();
      expect(";");
      return s;
    }
    if (is("break")) {
      advance();
      expect(";");
      return make_stmt(StmtKind::Break, "BreakStmt", "break");
    }
    if (is("continue")) {
      advance();
      expect(";");
      return make_stmt(StmtKind::Continue, "ContinueStmt", "continue");
    }
    if (is("switch")) return parse_switch();
    if (is("try")) return parse_try();
    if (is("throw")) {
      advance();
      auto s = make_stmt(StmtKind::Raise, "CXXThrowExpr", "throw");
      if (!is(";")) s->expr = parse_expression();
      expect(";");
      return s;
    }
    if (is("goto")) {
      advance();
      expect_ident();
      expect(";");
      return make_stmt(StmtKind::Simple, "GotoStmt", "goto");
    }
    if (is_ident() && is(":", 1) && !is("default")) {  // label
      advance();
      advance();
      return nullptr;
    }
    if (is("using") || is("typedef")) {
      if (is("using") && is_ident(1) && is("=", 2)) user_types_.insert(peek(1).text);
      if (is("typedef")) {
        std::size_t k = pos_;
        while (k < toks_.size() && toks_[k].text != ";") ++k;
        if (k > 0 && toks_[k - 1].kind == Tok::Ident) user_types_.insert(toks_[k - 1].text);
      }
      skip_to_semicolon();
      return nullptr;
    }
    if ((is("struct") || is("class")) && is_ident(1) && is("{", 2)) {
      advance();
      user_types_.insert(advance().text);
      skip_balanced();
      skip_to_semicolon();
      return nullptr;
    }
    if (is("static_assert")) {
      skip_to_semicolon();
      return nullptr;
    }
    if (looks_like_declaration()) {
      auto s = parse_declaration();
      expect(";");
      return s;
    }
    auto s = make_stmt(StmtKind::Expr, "", "expr");
    s->expr = parse_expression();
    expect(";");
    return s;
  }

  StmtPtr parse_if() {
    advance();
    accept("constexpr");
    auto s = make_stmt(StmtKind::If, "IfStmt", "if");
    expect("(");
    s->expr = parse_expression();
    expect(")");
    s->body = parse_sub_statement();
    if (accept("else")) s->orelse = parse_sub_statement();
    return s;
  }

  StmtPtr parse_for() {
    advance();
    expect("(");
    // Range-for: `for (decl : expr)`.
    {
      const std::size_t save = pos_;
      bool range = false;
      try {
        auto t = parse_type(false);
        if (t) {
          std::vector<std::string> names;
          if (is("[")) {
            advance();
            while (is_ident()) {
              names.push_back(advance().text);
              if (!accept(",")) break;
            }
            expect("]");
          } else if (is_ident()) {
            names.push_back(advance().text);
          }
          if (!names.empty() && accept(":")) {
            range = true;
            auto s = make_stmt(StmtKind::RangeFor, "CXXForRangeStmt", "for");
            for (auto& nm : names) {
              Declarator d;
              d.name = nm;
              d.type = *t;
              s->decls.push_back(std::move(d));
            }
            s->expr = is("{") ? parse_init_list() : parse_expression();
            expect(")");
            s->body = parse_sub_statement();
            return s;
          }
        }
      } catch (const ParseError&) {
        if (range) throw;
      }
      pos_ = save;
    }
    auto s = make_stmt(StmtKind::For, "ForStmt", "for");
    if (!accept(";")) {
      if (looks_like_declaration()) {
        s->init = parse_declaration();
      } else {
        s->init = make_stmt(StmtKind::Expr, "", "expr");
        s->init->expr = parse_expression();
      }
      expect(";");
    }
    if (!is(";")) s->expr = parse_expression();
    expect(";");
    if (!is(")")) s->extra = parse_expression();
    expect(")");
    s->body = parse_sub_statement();
    return s;
  }

  StmtPtr parse_switch() {
    advance();
    auto s = make_stmt(StmtKind::Switch, "SwitchStmt", "switch");
    expect("(");
    s->expr = parse_expression();
    expect(")");
    expect("{");
    while (!at_end() && !is("}")) {
      if (is("case") || is("default")) {
        SwitchCase c;
        if (accept("default")) {
          c.is_default = true;
        } else {
          advance();
          c.label = parse_conditional();
        }
        expect(":");
        while (!at_end() && !is("case") && !is("default") && !is("}")) {
          const std::size_t start = pos_;
          try {
            if (auto st = parse_statement()) c.body.push_back(std::move(st));
          } catch (const ParseError&) {
            unit_.partial = true;
            pos_ = start;
            recover_statement();
          }
          if (pos_ == start) advance();
        }
        s->cases.push_back(std::move(c));
      } else {
        // Statements before the first label are unreachable; skip them.
        unit_.partial = true;
        recover_statement();
      }
    }
    expect("}");
    return s;
  }

  StmtPtr parse_try() {
    advance();
    auto s = make_stmt(StmtKind::Try, "CXXTryStmt", "try");
    expect("{");
    s->body = parse_block_body();
    while (accept("catch")) {
      expect("(");
      int depth = 1;
      while (!at_end() && depth > 0) {
        if (is("(")) ++depth;
        if (is(")")) --depth;
        advance();
      }
      expect("{");
      s->handlers.push_back(parse_block_body());
    }
    return s;
  }

  StmtPtr parse_declaration() {
    auto s = make_stmt(StmtKind::Decl, "DeclStmt", "decl");
    auto t = parse_type(false);
    if (!t) throw ParseError("expected type");
    const std::string base = *t;
    if (is("[")) {  // structured binding
      advance();
      s->structured_binding = true;
      while (is_ident()) {
        Declarator d;
        d.name = advance().text;
        d.type = base;
        s->decls.push_back(std::move(d));
        if (!accept(",")) break;
      }
      expect("]");
      if (s->decls.empty()) throw ParseError("empty structured binding");
      if (accept("=")) s->decls[0].init = is("{") ? parse_init_list() : parse_assignment();
      else if (is("{")) s->decls[0].init = parse_init_list();
      else throw ParseError("structured binding needs initializer");
      return s;
    }
    while (true) {
      Declarator d;
      d.type = base;
      while (is("*") || is("&") || is("&&")) d.type += advance().text;
      d.name = expect_ident();
      while (is("[")) {
        advance();
        if (!is("]")) d.array_dims.push_back(parse_expression());
        expect("]");
        d.type += "[]";
      }
      if (accept("=")) {
        d.init = is("{") ? parse_init_list() : parse_assignment();
      } else if (is("(")) {
        advance();
        auto c = make_expr(ExprKind::Construct, "CXXConstructExpr", base);
        parse_args(*c, ")");
        d.init = std::move(c);
      } else if (is("{")) {
        d.init = parse_init_list();
      }
      s->decls.push_back(std::move(d));
      if (!accept(",")) break;
    }
    return s;
  }

  // ---- expressions -------------------------------------------------------
  ExprPtr parse_expression() {
    auto e = parse_assignment();
    while (is(",")) {
      advance();
      auto rhs = parse_assignment();
      auto c = make_expr(ExprKind::Binary, ",");
      c->kids.push_back(std::move(e));
      c->kids.push_back(std::move(rhs));
      e = std::move(c);
    }
    return e;
  }

  static bool is_assign_op(const std::string& s) {
    return s == "=" || s == "+=" || s == "-=" || s == "*=" || s == "/=" || s == "%=" || s == "&=" || s == "|=" ||
           s == "^=" || s == "<<=";
  }

  ExprPtr parse_assignment() {
    auto lhs = parse_conditional();
    std::string op;
    if (is(">") && peek().joined && is(">=", 1)) {
      advance();
      advance();
      op = ">>=";
    } else if (peek().kind == Tok::Punct && is_assign_op(peek().text)) {
      op = advance().text;
    }
    if (op.empty()) return lhs;
    auto rhs = is("{") ? parse_init_list() : parse_assignment();
    if (op == "=") {
      auto a = make_expr(ExprKind::Assign, "=");
      a->kids.push_back(std::move(lhs));
      a->kids.push_back(std::move(rhs));
      return a;
    }
    auto a = make_expr(ExprKind::CompoundAssign, op);
    a->kids.push_back(std::move(lhs));
    a->kids.push_back(std::move(rhs));
    return a;
  }

  ExprPtr parse_conditional() {
    auto cond = parse_binary(0);
    if (!is("?")) return cond;
    advance();
    auto a = parse_assignment();
    expect(":");
    auto b = parse_assignment();
    auto e = make_expr(ExprKind::Conditional, "ConditionalOperator");
    e->kids.push_back(std::move(cond));
    e->kids.push_back(std::move(a));
    e->kids.push_back(std::move(b));
    return e;
  }

  // Returns the binary operator at the cursor and its token count.
  std::pair<std::string, int> peek_binary_op() const {
    const Token& t = peek();
    if (t.kind != Tok::Punct) {
      if (t.kind == Tok::Ident && (t.text == "and" || t.text == "or")) return {t.text == "and" ? "&&" : "||", 1};
      return {"", 0};
    }
    if (t.text == ">" && t.joined) {
      if (is(">", 1)) return {">>", 2};
      return {"", 0};  // ">>=" is an assignment
    }
    return {t.text, 1};
  }

  static int precedence(const std::string& op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "|") return 3;
    if (op == "^") return 4;
    if (op == "&") return 5;
    if (op == "==" || op == "!=") return 6;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 7;
    if (op == "<=>") return 8;
    if (op == "<<" || op == ">>") return 9;
    if (op == "+" || op == "-") return 10;
    if (op == "*" || op == "/" || op == "%") return 11;
    return -1;
  }

  ExprPtr parse_binary(int min_prec) {
    auto lhs = parse_unary();
    while (true) {
      auto [op, width] = peek_binary_op();
      const int prec = op.empty() ? -1 : precedence(op);
      if (prec < 0 || prec < min_prec) break;
      for (int k = 0; k < width; ++k) advance();
      auto rhs = parse_binary(prec + 1);
      auto e = make_expr(ExprKind::Binary, op);
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    const Token& t = peek();
    if (t.kind == Tok::Punct) {
      static const std::vector<std::pair<std::string, std::string>> unary = {
          {"!", "!"}, {"~", "~"}, {"-", "neg"}, {"+", "pos"}, {"*", "deref"}, {"&", "addr"}};
      for (const auto& [tok, name] : unary) {
        if (t.text == tok) {
          advance();
          auto e = make_expr(ExprKind::Unary, name);
          e->kids.push_back(parse_unary());
          return e;
        }
      }
      if (t.text == "++" || t.text == "--") {
        const std::string op = advance().text;
        auto e = make_expr(ExprKind::IncDec, op);
        e->kids.push_back(parse_unary());
        return e;
      }
      if (t.text == "(") {
        // C-style cast: '(' known-type ')' operand
        const std::size_t save = pos_;
        advance();
        auto type = try_parse_type(true);
        if (type && is(")")) {
          advance();
          const Token& n = peek();
          const bool operand_follows = n.kind == Tok::Ident || n.kind == Tok::Number || n.kind == Tok::String ||
                                       n.kind == Tok::Char || n.text == "(" || n.text == "!" || n.text == "~" ||
                                       n.text == "-" || n.text == "+" || n.text == "*" || n.text == "&";
          if (operand_follows) {
            auto e = make_expr(ExprKind::Cast, "CStyleCastExpr", *type);
            e->kids.push_back(parse_unary());
            return e;
          }
        }
        pos_ = save;
      }
    }
    if (t.kind == Tok::Ident) {
      if (t.text == "not") {
        advance();
        auto e = make_expr(ExprKind::Unary, "!");
        e->kids.push_back(parse_unary());
        return e;
      }
      if (t.text == "sizeof" || t.text == "alignof") {
        advance();
        auto e = make_expr(ExprKind::Other, "UnaryExprOrTypeTraitExpr");
        if (is("(")) {
          const std::size_t save = pos_;
          advance();
          auto type = try_parse_type(true);
          if (type && accept(")")) return e;
          pos_ = save;
        }
        e->kids.push_back(parse_unary());
        return e;
      }
      if (t.text == "new") {
        advance();
        auto e = make_expr(ExprKind::Other, "CXXNewExpr");
        auto type = parse_type(false);
        if (is("[")) {
          advance();
          e->kids.push_back(parse_expression());
          expect("]");
        } else if (is("(")) {
          advance();
          parse_args(*e, ")");
        } else if (is("{")) {
          advance();
          parse_args(*e, "}");
        }
        return e;
      }
      if (t.text == "delete") {
        advance();
        if (is("[")) {
          advance();
          expect("]");
        }
        auto e = make_expr(ExprKind::Other, "CXXDeleteExpr");
        e->kids.push_back(parse_unary());
        return e;
      }
    }
    return parse_postfix(parse_primary());
  }

  void parse_args(Expr& call, std::string_view close) {
    if (accept(close)) return;
    while (true) {
      call.kids.push_back(is("{") ? parse_init_list() : parse_assignment());
      if (accept(close)) return;
      expect(",");
    }
  }

  ExprPtr parse_postfix(ExprPtr e) {
    while (true) {
      if (is("(")) {
        advance();
        ExprPtr call;
        if (e->kind == ExprKind::Name) {
          call = make_expr(ExprKind::Call, "", e->text);
        } else if (e->kind == ExprKind::Member) {
          call = make_expr(ExprKind::MethodCall, "", e->text);
          call->kids.push_back(std::move(e->kids[0]));
        } else {
          call = make_expr(ExprKind::Call, "", "");
          call->callee = std::move(e);
        }
        parse_args(*call, ")");
        e = std::move(call);
      } else if (is("[")) {
        advance();
        auto s = make_expr(ExprKind::Subscript);
        s->kids.push_back(std::move(e));
        s->kids.push_back(is("{") ? parse_init_list() : parse_expression());
        expect("]");
        e = std::move(s);
      } else if (is(".") || is("->")) {
        advance();
        accept("template");
        std::string member;
        if (accept("~")) member = "~";
        member += expect_ident();
        auto m = make_expr(ExprKind::Member, "", member);
        m->kids.push_back(std::move(e));
        e = std::move(m);
      } else if (is("++") || is("--")) {
        auto inc = make_expr(ExprKind::IncDec, advance().text);
        inc->kids.push_back(std::move(e));
        e = std::move(inc);
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_init_list() {
    expect("{");
    auto e = make_expr(ExprKind::Sequence, "InitListExpr");
    if (accept("}")) return e;
    while (true) {
      e->kids.push_back(is("{") ? parse_init_list() : parse_assignment());
      if (accept("}")) return e;
      expect(",");
      if (accept("}")) return e;
    }
  }

  ExprPtr parse_lambda() {
    skip_balanced();  // capture list
    if (is("(")) skip_balanced();
    while (!at_end() && !is("{")) {
      if (is(";") || is("}")) throw ParseError("bad lambda");
      advance();
    }
    skip_balanced();
    return make_expr(ExprKind::Lambda, "LambdaExpr", "lambda");
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: {
        const std::string text = advance().text;
        const bool hex = text.size() > 1 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X');
        const bool floating = !hex && (text.find('.') != std::string::npos || text.find('e') != std::string::npos ||
                                       text.find('E') != std::string::npos);
        return make_expr(ExprKind::Literal, floating ? "FloatingLiteral" : "IntegerLiteral", text);
      }
      case Tok::String: {
        std::string text = advance().text;
        while (peek().kind == Tok::String) text += advance().text;
        return make_expr(ExprKind::Literal, "StringLiteral", text);
      }
      case Tok::Char:
        return make_expr(ExprKind::Literal, "CharacterLiteral", advance().text);
      case Tok::End:
        throw ParseError("unexpected end of input");
      case Tok::Punct:
        if (t.text == "(") {
          advance();
          auto e = parse_expression();
          expect(")");
          return e;
        }
        if (t.text == "{") return parse_init_list();
        if (t.text == "[") return parse_lambda();
        if (t.text == "::" && is_ident(1)) break;
        throw ParseError("unexpected '" + t.text + "'");
      case Tok::Ident:
        break;
    }
    if (t.text == "true" || t.text == "false")
      return make_expr(ExprKind::Literal, "CXXBoolLiteralExpr", advance().text);
    if (t.text == "nullptr" || t.text == "NULL")
      return make_expr(ExprKind::Literal, "CXXNullPtrLiteralExpr", advance().text);
    if (t.text == "this") return make_expr(ExprKind::Name, "", advance().text);
    if (t.text == "static_cast" || t.text == "dynamic_cast" || t.text == "reinterpret_cast" ||
        t.text == "const_cast") {
      const std::string kind = t.text;
      advance();
      std::string type = "?";
      if (is("<")) {
        type = parse_template_args();
        type = type.substr(1, type.size() - 2);
      }
      expect("(");
      auto e = make_expr(ExprKind::Cast,
                         kind == "static_cast"    ? "CXXStaticCastExpr"
                         : kind == "dynamic_cast" ? "CXXDynamicCastExpr"
                         : kind == "const_cast"   ? "CXXConstCastExpr"
                                                  : "CXXReinterpretCastExpr",
                         type);
      e->kids.push_back(parse_expression());
      expect(")");
      return e;
    }
    if (builtin_type_words().count(t.text)) {
      // Functional cast `int(x)` / `double{x}`.
      auto type = parse_type(true);
      if (!type || (!is("(") && !is("{"))) throw ParseError("unexpected type name");
      const bool brace = is("{");
      advance();
      auto e = make_expr(ExprKind::Cast, "CXXFunctionalCastExpr", *type);
      if (!(brace ? accept("}") : accept(")"))) {
        e->kids.push_back(parse_assignment());
        expect(brace ? "}" : ")");
      }
      return e;
    }
    // (Qualified) name, possibly a templated type used as a constructor.
    std::string name;
    if (accept("::")) name = "::";
    name += advance().text;
    while (is("::") && is_ident(1)) {
      advance();
      name += "::" + advance().text;
    }
    if (is("<") && template_types().count(last_component(name))) {
      name += parse_template_args();
      while (is("::") && is_ident(1)) {
        advance();
        name += "::" + advance().text;
      }
    }
    if (is_known_type_name(name.substr(0, name.find('<'))) && (is("(") || is("{")) &&
        !builtin_type_words().count(name)) {
      const bool brace = is("{");
      advance();
      auto e = make_expr(ExprKind::Construct, "CXXConstructExpr", name);
      parse_args(*e, brace ? "}" : ")");
      return e;
    }
    return make_expr(ExprKind::Name, "", name);
  }
};

}  // namespace

TranslationUnit parse_cpp(std::string_view code) { return CppParser(code).run(); }

}  // namespace codegrag::syntax
