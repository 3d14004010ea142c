#include "syntax/graph_builder.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace codegrag::syntax {
namespace {

constexpr NodeId kNone = -1;

enum class TypeClass { Unknown, Integral, Floating, Pointer, Class };

std::string strip_qualifiers(std::string t) {
  for (const char* word : {"const ", "volatile ", "static ", "constexpr ", "inline ", "mutable ", "std::"}) {
    for (std::size_t p; (p = t.find(word)) != std::string::npos;) t.erase(p, std::string(word).size());
  }
  while (!t.empty() && (t.back() == '&' || t.back() == ' ')) t.pop_back();
  while (!t.empty() && t.front() == ' ') t.erase(t.begin());
  if (t.size() > 6 && t.compare(t.size() - 6, 6, " const") == 0) t.resize(t.size() - 6);
  while (!t.empty() && (t.back() == '&' || t.back() == ' ')) t.pop_back();
  return t;
}

TypeClass classify(const std::string& raw) {
  const std::string t = strip_qualifiers(raw);
  if (t.empty() || t == "auto" || t == "void") return TypeClass::Unknown;
  if (t == "@stream") return TypeClass::Class;
  if (t.back() == '*' || (t.size() >= 2 && t.compare(t.size() - 2, 2, "[]") == 0)) return TypeClass::Pointer;
  static const std::set<std::string> integral = {
      "int",      "long",     "short",    "char",    "bool",     "unsigned", "signed",   "size_t",
      "ssize_t",  "ptrdiff_t", "wchar_t", "char8_t", "char16_t", "char32_t", "int8_t",   "int16_t",
      "int32_t",  "int64_t",  "uint8_t",  "uint16_t", "uint32_t", "uint64_t", "intmax_t", "uintmax_t"};
  static const std::set<std::string> floating = {"float", "double", "long"};
  std::istringstream words(t);
  bool all_integral = true;
  bool all_floating = true;
  bool any_float_word = false;
  for (std::string w; words >> w;) {
    if (!integral.count(w)) all_integral = false;
    if (!floating.count(w)) all_floating = false;
    if (w == "float" || w == "double") any_float_word = true;
  }
  if (all_floating && any_float_word) return TypeClass::Floating;
  if (all_integral) return TypeClass::Integral;
  return TypeClass::Class;
}

std::vector<std::string> template_args(const std::string& t) {
  std::vector<std::string> args;
  const auto open = t.find('<');
  if (open == std::string::npos) return args;
  int depth = 0;
  std::string cur;
  for (std::size_t i = open + 1; i < t.size(); ++i) {
    const char c = t[i];
    if (c == '<') ++depth;
    if (c == '>') {
      if (depth == 0) break;
      --depth;
    }
    if (c == ',' && depth == 0) {
      args.push_back(strip_qualifiers(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  args.push_back(strip_qualifiers(cur));
  return args;
}

// Type produced by subscripting (for_each=false) or iterating a value.
std::string element_type(const std::string& raw, bool for_each = false) {
  std::string t = strip_qualifiers(raw);
  switch (classify(t)) {
    case TypeClass::Pointer:
      if (t.back() == '*') return t.substr(0, t.size() - 1);
      return t.substr(0, t.size() - 2);
    case TypeClass::Class: {
      const std::string base = t.substr(0, t.find('<'));
      if (base == "string" || base == "string_view" || base == "wstring") return "char";
      const auto args = template_args(t);
      if (args.empty()) return "";
      if (base == "map" || base == "unordered_map" || base == "multimap") {
        if (for_each) return "pair<" + args[0] + "," + (args.size() > 1 ? args[1] : "") + ">";
        return args.size() > 1 ? args[1] : "";
      }
      return args[0];
    }
    default:
      return "";
  }
}

bool is_mutating_method(Language lang, const std::string& name) {
  static const std::set<std::string> cpp = {"push_back", "pop_back",  "insert",    "erase",  "clear",
                                            "emplace_back", "emplace", "push",    "pop",    "push_front",
                                            "pop_front", "resize",    "assign",    "swap",   "sort",
                                            "reverse",   "emplace_front", "append", "replace"};
  static const std::set<std::string> py = {"append",  "extend",     "insert",  "remove",     "pop",
                                           "clear",   "sort",       "reverse", "add",        "update",
                                           "discard", "setdefault", "popitem", "appendleft", "popleft",
                                           "extendleft", "rotate"};
  return lang == Language::cpp ? cpp.count(name) > 0 : py.count(name) > 0;
}

bool is_stream_object(const std::string& name) {
  static const std::set<std::string> streams = {"cout", "cerr", "cin", "clog", "endl",
                                                "std::cout", "std::cerr", "std::cin", "std::clog", "std::endl"};
  return streams.count(name) > 0;
}

struct Exit {
  NodeId node;
  const char* label;
};
using Exits = std::vector<Exit>;

struct Flow {
  NodeId entry = kNone;  // kNone: the statement produced no CFG node
  Exits exits;
};

struct LoopContext {
  bool is_loop = true;
  Exits breaks;
  std::vector<NodeId> continues;
};

class Builder {
 public:
  Builder(const TranslationUnit& unit, Language lang, ComposedSyntaxGraph& g) : unit_(unit), lang_(lang), g_(g) {
    for (std::size_t i = 0; i < unit.declared_functions.size(); ++i) {
      user_fns_.insert(unit.declared_functions[i]);
      if (i < unit.declared_return_types.size() && !unit.declared_return_types[i].empty())
        user_returns_[unit.declared_functions[i]] = unit.declared_return_types[i];
    }
  }

  void build_function(const Function& fn) {
    vars_.clear();
    var_types_.clear();
    locals_.clear();
    loops_.clear();
    const bool cpp = lang_ == Language::cpp;
    fn_node_ = g_.add_node(cpp ? "FunctionDecl" : "FunctionDef", fn.name);
    for (const auto& p : fn.params) {
      if (p.name.empty() || vars_.count(p.name)) continue;
      const NodeId v = g_.add_node(cpp ? "ParmVarDecl" : "arg", p.name);
      vars_[p.name] = v;
      var_types_[p.name] = p.type;
      g_.add_edge(fn_node_, v, "write");
    }
    collect_locals(fn.body);
    for (const auto& n : fn.nonlocal_names) locals_.erase(n);
    lower_block(fn.body);
  }

 private:
  const TranslationUnit& unit_;
  Language lang_;
  ComposedSyntaxGraph& g_;
  std::set<std::string> user_fns_;
  std::map<std::string, std::string> user_returns_;

  NodeId fn_node_ = kNone;
  NodeId stmt_ = kNone;
  std::map<std::string, NodeId> vars_;
  std::map<std::string, std::string> var_types_;
  std::set<std::string> locals_;
  std::vector<LoopContext> loops_;
  int temp_count_ = 0;

  bool cpp() const { return lang_ == Language::cpp; }

  // ---- scope ---------------------------------------------------------------
  void collect_target_names(const Expr* e) {
    if (!e) return;
    switch (e->kind) {
      case ExprKind::Name:
        locals_.insert(e->text);
        break;
      case ExprKind::Sequence:
        for (const auto& k : e->kids) collect_target_names(k.get());
        break;
      case ExprKind::Other:
        if (e->op == "Starred") collect_target_names(e->kids[0].get());
        break;
      default:
        break;
    }
  }

  void collect_expr(const Expr* e) {
    if (!e) return;
    if (!cpp()) {
      if (e->kind == ExprKind::Assign) {
        for (std::size_t i = 0; i + 1 < e->kids.size(); ++i) collect_target_names(e->kids[i].get());
      } else if (e->kind == ExprKind::CompoundAssign) {
        collect_target_names(e->kids[0].get());
      } else if (e->kind == ExprKind::Comprehension) {
        for (const auto& t : e->targets) collect_target_names(t.get());
      }
    }
    for (const auto& k : e->kids) collect_expr(k.get());
    collect_expr(e->callee.get());
    for (const auto& k : e->iters) collect_expr(k.get());
    for (const auto& k : e->conds) collect_expr(k.get());
  }

  void collect_locals(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) collect_stmt(s.get());
  }

  void collect_stmt(const Stmt* s) {
    if (!s) return;
    for (const auto& d : s->decls) {
      locals_.insert(d.name);
      collect_expr(d.init.get());
      for (const auto& dim : d.array_dims) collect_expr(dim.get());
    }
    for (const auto& n : s->bound_names) locals_.insert(n);
    if (!cpp()) collect_target_names(s->target.get());
    collect_expr(s->expr.get());
    collect_expr(s->target.get());
    collect_expr(s->extra.get());
    collect_stmt(s->init.get());
    collect_locals(s->body);
    collect_locals(s->orelse);
    for (const auto& h : s->handlers) collect_locals(h);
    collect_locals(s->finally_body);
    for (const auto& c : s->cases) collect_locals(c.body);
  }

  NodeId var(const std::string& name) {
    if (auto it = vars_.find(name); it != vars_.end()) return it->second;
    if (!locals_.count(name)) return kNone;
    const NodeId v = g_.add_node(cpp() ? "DeclStmt" : "Name", name);
    vars_[name] = v;
    return v;
  }

  // ---- graph primitives ------------------------------------------------------
  NodeId temp() { return g_.add_node("temp", "t" + std::to_string(temp_count_++), true); }

  void edge(NodeId src, NodeId dst, const std::string& label) {
    if (src != kNone && dst != kNone) g_.add_edge(src, dst, label);
  }

  void read(NodeId v) { edge(v, stmt_, "read"); }

  void write(NodeId value, NodeId target) { edge(value == kNone ? stmt_ : value, target, "write"); }

  using Operands = std::vector<std::pair<NodeId, std::string>>;

  NodeId operation(const Operands& ops) {
    const NodeId t = temp();
    for (const auto& [src, label] : ops) edge(src, t, label);
    return t;
  }

  // ---- typing (C++ only) -----------------------------------------------------
  std::string type_of(const Expr* e) {
    if (!e || !cpp()) return "";
    switch (e->kind) {
      case ExprKind::Name: {
        if (auto it = var_types_.find(e->text); it != var_types_.end()) return it->second;
        if (is_stream_object(e->text)) return "@stream";
        return "";
      }
      case ExprKind::Literal:
        if (e->op == "IntegerLiteral") return "int";
        if (e->op == "FloatingLiteral") return "double";
        if (e->op == "CharacterLiteral") return "char";
        if (e->op == "CXXBoolLiteralExpr") return "bool";
        if (e->op == "StringLiteral") return "const char*";
        if (e->op == "CXXNullPtrLiteralExpr") return "void*";
        return "";
      case ExprKind::Binary: {
        const std::string& op = e->op;
        if (op == ",") return type_of(e->kids[1].get());
        const std::string a = type_of(e->kids[0].get());
        const std::string b = type_of(e->kids[1].get());
        const TypeClass ca = classify(a);
        const TypeClass cb = classify(b);
        if (op == "<<" || op == ">>") {
          if (ca == TypeClass::Class) return a;
          return ca == TypeClass::Integral ? "int" : "";
        }
        if (op == "&&" || op == "||") return "bool";
        const bool compare = op == "==" || op == "!=" || op == "<" || op == ">" || op == "<=" || op == ">=";
        if (ca == TypeClass::Class || cb == TypeClass::Class) {
          if (compare) return "bool";
          const std::string sa = strip_qualifiers(a);
          const std::string sb = strip_qualifiers(b);
          if (sa == "string" || sb == "string") return "string";
          return "";
        }
        if (compare) return "bool";
        if (ca == TypeClass::Pointer) return a;
        if (cb == TypeClass::Pointer) return b;
        if (ca == TypeClass::Floating || cb == TypeClass::Floating) return "double";
        if (ca == TypeClass::Integral && cb == TypeClass::Integral) return "int";
        return "";
      }
      case ExprKind::Unary: {
        const std::string a = type_of(e->kids[0].get());
        if (e->op == "!") return "bool";
        if (e->op == "deref") return element_type(a);
        if (e->op == "addr") return a.empty() ? "" : a + "*";
        return a;
      }
      case ExprKind::IncDec:
      case ExprKind::Assign:
      case ExprKind::CompoundAssign:
        return type_of(e->kids[0].get());
      case ExprKind::Call: {
        if (auto it = user_returns_.find(e->text); it != user_returns_.end()) return it->second;
        std::string name = e->text;
        if (name.rfind("std::", 0) == 0) name = name.substr(5);
        static const std::set<std::string> floating = {"sqrt", "pow",  "exp",  "log",   "log2",  "log10",
                                                       "sin",  "cos",  "tan",  "atan",  "atan2", "asin",
                                                       "acos", "floor", "ceil", "round", "fabs",  "hypot",
                                                       "cbrt", "fmod", "stod", "stof",  "trunc"};
        if (floating.count(name)) return "double";
        if (name == "stoi" || name == "stol" || name == "stoll") return "int";
        if (name == "to_string") return "string";
        if ((name == "abs" || name == "max" || name == "min") && !e->kids.empty()) return type_of(e->kids[0].get());
        return "";
      }
      case ExprKind::MethodCall: {
        const std::string& m = e->text;
        if (m == "size" || m == "length" || m == "count") return "size_t";
        if (m == "substr") return "string";
        if (m == "front" || m == "back" || m == "at" || m == "top")
          return element_type(type_of(e->kids[0].get()));
        return "";
      }
      case ExprKind::Subscript:
        return element_type(type_of(e->kids[0].get()));
      case ExprKind::Conditional: {
        const std::string a = type_of(e->kids[1].get());
        return a.empty() ? type_of(e->kids[2].get()) : a;
      }
      case ExprKind::Cast:
      case ExprKind::Construct:
        return e->text;
      default:
        return "";
    }
  }

  bool is_class_valued(const Expr* e) { return classify(type_of(e)) == TypeClass::Class; }

  static bool is_scalar(TypeClass c) { return c == TypeClass::Integral || c == TypeClass::Floating; }

  // Wraps `value` in an integral/floating conversion when the types mix.
  NodeId convert(NodeId value, const std::string& from, const std::string& to) {
    if (!cpp() || value == kNone) return value;
    const TypeClass a = classify(from);
    const TypeClass b = classify(to);
    if (!is_scalar(a) || !is_scalar(b) || a == b) return value;
    return operation({{value, "ImplicitCastExpredge0"}});
  }

  // ---- expressions -----------------------------------------------------------
  std::string call_prefix() const { return cpp() ? "CallExpredge" : "Calledge"; }

  NodeId eval(const Expr* e) {
    if (!e) return kNone;
    switch (e->kind) {
      case ExprKind::Name: {
        const NodeId v = var(e->text);
        read(v);
        return v;
      }
      case ExprKind::Literal:
        return g_.add_node(e->op, e->text);
      case ExprKind::Binary:
        return eval_binary(e);
      case ExprKind::Unary: {
        const NodeId a = eval(e->kids[0].get());
        return operation({{a, e->op + "0"}});
      }
      case ExprKind::IncDec: {
        const NodeId a = eval(e->kids[0].get());
        const NodeId t = operation({{a, e->op + "0"}});
        write(t, base_var(e->kids[0].get()));
        return t;
      }
      case ExprKind::Assign:
        return eval_assign(e);
      case ExprKind::CompoundAssign: {
        const NodeId a = eval(e->kids[0].get());
        const NodeId b = eval(e->kids[1].get());
        const NodeId t = operation({{a, e->op + "0"}, {b, e->op + "1"}});
        write(t, base_var(e->kids[0].get()));
        return t;
      }
      case ExprKind::Call:
        return eval_call(e);
      case ExprKind::MethodCall: {
        const NodeId r = eval(e->kids[0].get());
        Operands ops;
        const std::string prefix = cpp() ? "CXXMemberCallExpredge" : "Calledge";
        ops.emplace_back(r, prefix + "0");
        for (std::size_t k = 1; k < e->kids.size(); ++k) ops.emplace_back(eval(e->kids[k].get()), prefix + std::to_string(k));
        const NodeId t = operation(ops);
        if (is_mutating_method(lang_, e->text)) {
          const NodeId target = base_var(e->kids[0].get());
          if (target != kNone) write(t, target);
        }
        return t;
      }
      case ExprKind::Member: {
        const NodeId o = eval(e->kids[0].get());
        if (o == kNone) return kNone;  // attribute of an external name
        return operation({{o, cpp() ? "MemberExpredge0" : "Attributeedge0"}});
      }
      case ExprKind::Subscript: {
        const NodeId b = eval(e->kids[0].get());
        const NodeId i = eval(e->kids[1].get());
        return subscript(e, b, i);
      }
      case ExprKind::Conditional:
      case ExprKind::Cast:
      case ExprKind::Sequence:
      case ExprKind::Construct:
        return generic(e, e->kind == ExprKind::Construct ? "CXXConstructExpr" : e->op);
      case ExprKind::Lambda:
        return temp();
      case ExprKind::Comprehension:
        return eval_comprehension(e);
      case ExprKind::Slice: {
        Operands ops;
        for (std::size_t k = 0; k < e->kids.size(); ++k)
          if (e->kids[k]) ops.emplace_back(eval(e->kids[k].get()), "Sliceedge" + std::to_string(k));
        return operation(ops);
      }
      case ExprKind::Other:
        if (e->op == "Starred") return eval(e->kids[0].get());
        if (e->op == "Yield") {
          if (!e->kids.empty()) edge(eval(e->kids[0].get()), fn_node_, "yield");
          return kNone;
        }
        return generic(e, e->op.empty() ? "Expr" : e->op);
    }
    return kNone;
  }

  NodeId generic(const Expr* e, const std::string& kind) {
    Operands ops;
    for (std::size_t k = 0; k < e->kids.size(); ++k)
      if (e->kids[k]) ops.emplace_back(eval(e->kids[k].get()), kind + "edge" + std::to_string(k));
    return operation(ops);
  }

  NodeId subscript(const Expr* e, NodeId base, NodeId index) {
    if (!cpp()) return operation({{base, "Subscriptedge0"}, {index, "Subscriptedge1"}});
    if (is_class_valued(e->kids[0].get()))
      return operation({{base, "CXXOperatorCallExpredge1"}, {index, "CXXOperatorCallExpredge2"}});
    return operation({{base, "ArraySubscriptExpredge0"}, {index, "ArraySubscriptExpredge1"}});
  }

  NodeId eval_binary(const Expr* e) {
    const std::string& op = e->op;
    if (op == ",") {
      eval(e->kids[0].get());
      return eval(e->kids[1].get());
    }
    NodeId a = eval(e->kids[0].get());
    NodeId b = eval(e->kids[1].get());
    if (cpp() && op != "&&" && op != "||") {
      if (is_class_valued(e->kids[0].get()) || is_class_valued(e->kids[1].get()))
        return operation({{a, "CXXOperatorCallExpredge1"}, {b, "CXXOperatorCallExpredge2"}});
      static const std::set<std::string> arithmetic = {"+", "-", "*", "/", "==", "!=", "<", ">", "<=", ">="};
      if (arithmetic.count(op)) {
        const std::string ta = type_of(e->kids[0].get());
        const std::string tb = type_of(e->kids[1].get());
        const TypeClass ca = classify(ta);
        const TypeClass cb = classify(tb);
        if (ca == TypeClass::Integral && cb == TypeClass::Floating) a = convert(a, ta, tb);
        if (ca == TypeClass::Floating && cb == TypeClass::Integral) b = convert(b, tb, ta);
      }
    }
    return operation({{a, op + "0"}, {b, op + "1"}});
  }

  NodeId eval_call(const Expr* e) {
    std::vector<NodeId> args;
    NodeId callee = kNone;
    const bool user = e->text.size() && user_fns_.count(e->text) > 0;
    if (e->callee) {
      callee = eval(e->callee.get());
    } else if (!user && !e->text.empty()) {
      callee = var(e->text);  // calling a parameter or local holding a callable
      read(callee);
    }
    for (const auto& a : e->kids) args.push_back(eval(a.get()));
    Operands ops;
    if (user) {
      for (NodeId a : args) ops.emplace_back(a, "UserDefineFun");
      return operation(ops);
    }
    ops.emplace_back(callee, call_prefix() + "0");
    for (std::size_t k = 0; k < args.size(); ++k) ops.emplace_back(args[k], call_prefix() + std::to_string(k + 1));
    return operation(ops);
  }

  NodeId eval_comprehension(const Expr* e) {
    Operands ops;
    const std::string& kind = e->op;
    for (std::size_t i = 0; i < e->iters.size(); ++i) {
      const NodeId it = eval(e->iters[i].get());
      ops.emplace_back(it, kind + "edge1");
      if (i < e->targets.size()) assign_target(e->targets[i].get(), it);
    }
    for (const auto& c : e->conds) ops.emplace_back(eval(c.get()), kind + "edge2");
    for (const auto& k : e->kids) ops.emplace_back(eval(k.get()), kind + "edge0");
    return operation(ops);
  }

  // Innermost variable an lvalue expression stores into, without emitting reads.
  NodeId base_var(const Expr* e) {
    while (e) {
      switch (e->kind) {
        case ExprKind::Name:
          return var(e->text);
        case ExprKind::Subscript:
        case ExprKind::Member:
        case ExprKind::Unary:
        case ExprKind::Cast:
          if (e->kind == ExprKind::Unary && e->op != "deref") return kNone;
          e = e->kids[0].get();
          break;
        default:
          return kNone;
      }
    }
    return kNone;
  }

  // Builds the address computation of an assignment target. The stored-to
  // variable itself is not read.
  NodeId eval_lvalue(const Expr* e) {
    switch (e->kind) {
      case ExprKind::Name:
        return var(e->text);
      case ExprKind::Subscript: {
        const NodeId b = eval_lvalue(e->kids[0].get());
        const NodeId i = eval(e->kids[1].get());
        return subscript(e, b, i);
      }
      case ExprKind::Member: {
        const NodeId o = eval_lvalue(e->kids[0].get());
        if (o == kNone) return kNone;
        return operation({{o, cpp() ? "MemberExpredge0" : "Attributeedge0"}});
      }
      case ExprKind::Unary:
        if (e->op == "deref") return operation({{eval_lvalue(e->kids[0].get()), "deref0"}});
        return eval(e);
      default:
        return eval(e);
    }
  }

  void assign_target(const Expr* target, NodeId value) {
    if (!target) return;
    switch (target->kind) {
      case ExprKind::Name:
        write(value, var(target->text));
        return;
      case ExprKind::Sequence:
        for (const auto& k : target->kids) assign_target(k.get(), value);
        return;
      case ExprKind::Other:
        if (target->op == "Starred") {
          assign_target(target->kids[0].get(), value);
          return;
        }
        break;
      default:
        break;
    }
    eval_lvalue(target);
    const NodeId base = base_var(target);
    if (base != kNone) write(value, base);
  }

  NodeId eval_assign(const Expr* e) {
    const Expr* value_expr = e->kids.back().get();
    const NodeId value = eval(value_expr);
    for (std::size_t i = 0; i + 1 < e->kids.size(); ++i) {
      const Expr* target = e->kids[i].get();
      assign_target(target, convert(value, type_of(value_expr), type_of(target)));
    }
    const Expr* first = e->kids.front().get();
    if (e->kids.size() == 2 && first->kind == ExprKind::Name) {
      const NodeId v = var(first->text);
      if (v != kNone) return v;
    }
    return value;
  }

  // ---- statements ------------------------------------------------------------
  std::string expr_stmt_type(const Expr* e) {
    if (!e) return "NullStmt";
    switch (e->kind) {
      case ExprKind::Assign:
        return is_class_valued(e->kids[0].get()) ? "CXXOperatorCallExpr" : "BinaryOperator";
      case ExprKind::CompoundAssign:
        return is_class_valued(e->kids[0].get()) ? "CXXOperatorCallExpr" : "CompoundAssignOperator";
      case ExprKind::Binary:
        if (e->op != "," && e->op != "&&" && e->op != "||" &&
            (is_class_valued(e->kids[0].get()) || is_class_valued(e->kids[1].get())))
          return "CXXOperatorCallExpr";
        return "BinaryOperator";
      case ExprKind::Unary:
        return "UnaryOperator";
      case ExprKind::IncDec:
        return is_class_valued(e->kids[0].get()) ? "CXXOperatorCallExpr" : "UnaryOperator";
      case ExprKind::Call:
        return "CallExpr";
      case ExprKind::MethodCall:
        return "CXXMemberCallExpr";
      case ExprKind::Name:
        return "DeclRefExpr";
      case ExprKind::Subscript:
        return is_class_valued(e->kids[0].get()) ? "CXXOperatorCallExpr" : "ArraySubscriptExpr";
      case ExprKind::Member:
        return "MemberExpr";
      case ExprKind::Lambda:
        return "LambdaExpr";
      case ExprKind::Construct:
        return "CXXConstructExpr";
      default:
        return e->op.empty() ? "Expr" : e->op;
    }
  }

  NodeId stmt_node(const Stmt* s) {
    std::string type = s->node_type;
    if (type.empty()) type = expr_stmt_type(s->expr.get());
    return g_.add_node(type, s->keyword);
  }

  NodeId expr_node(const Expr* e) { return g_.add_node(cpp() ? expr_stmt_type(e) : "Expr", "expr"); }

  void connect(const Exits& from, NodeId to) {
    for (const auto& x : from) g_.add_edge(x.node, to, x.label);
  }

  Flow lower_block(const std::vector<StmtPtr>& body) {
    Flow block;
    Exits cur;
    bool started = false;
    for (const auto& s : body) {
      Flow f = lower_stmt(s.get());
      if (f.entry == kNone) continue;
      if (!started) {
        block.entry = f.entry;
        started = true;
      } else {
        connect(cur, f.entry);
      }
      cur = std::move(f.exits);
    }
    block.exits = std::move(cur);
    return block;
  }

  // Links a sub-block after `head` along `label`. Returns the block exits,
  // or the head exit itself when the block is empty.
  Exits attach(NodeId head, const char* label, Flow body) {
    if (body.entry == kNone) return {{head, label}};
    g_.add_edge(head, body.entry, label);
    return std::move(body.exits);
  }

  Flow single(NodeId n) { return Flow{n, {{n, "next"}}}; }

  Flow lower_stmt(const Stmt* s) {
    if (!s) return {};
    switch (s->kind) {
      case StmtKind::Block:
        return lower_block(s->body);
      case StmtKind::Empty:
        if (cpp()) return {};
        return single(stmt_node(s));
      case StmtKind::Decl: {
        stmt_ = stmt_node(s);
        lower_decl(s);
        return single(stmt_);
      }
      case StmtKind::Expr: {
        stmt_ = stmt_node(s);
        eval(s->expr.get());
        return single(stmt_);
      }
      case StmtKind::Return: {
        stmt_ = stmt_node(s);
        edge(eval(s->expr.get()), fn_node_, "return");
        return Flow{stmt_, {}};
      }
      case StmtKind::Raise: {
        stmt_ = stmt_node(s);
        eval(s->expr.get());
        eval(s->extra.get());
        return Flow{stmt_, {}};
      }
      case StmtKind::Assert: {
        stmt_ = stmt_node(s);
        eval(s->expr.get());
        eval(s->extra.get());
        return single(stmt_);
      }
      case StmtKind::Simple: {
        stmt_ = stmt_node(s);
        eval(s->expr.get());
        for (const auto& n : s->bound_names) {
          const NodeId v = var(n);
          if (v != kNone) write(kNone, v);
        }
        return single(stmt_);
      }
      case StmtKind::Break: {
        const NodeId n = stmt_node(s);
        if (!loops_.empty()) loops_.back().breaks.push_back({n, "next"});
        return Flow{n, {}};
      }
      case StmtKind::Continue: {
        const NodeId n = stmt_node(s);
        for (auto it = loops_.rbegin(); it != loops_.rend(); ++it) {
          if (it->is_loop) {
            it->continues.push_back(n);
            break;
          }
        }
        return Flow{n, {}};
      }
      case StmtKind::If:
        return lower_if(s);
      case StmtKind::While:
        return lower_while(s);
      case StmtKind::For:
        return lower_for(s);
      case StmtKind::RangeFor:
        return lower_range_for(s);
      case StmtKind::DoWhile:
        return lower_do(s);
      case StmtKind::Switch:
        return lower_switch(s);
      case StmtKind::Try:
        return lower_try(s);
      case StmtKind::With: {
        stmt_ = stmt_node(s);
        const NodeId head = stmt_;
        const NodeId ctx = eval(s->expr.get());
        assign_target(s->target.get(), ctx);
        return Flow{head, attach(head, "next", lower_block(s->body))};
      }
    }
    return {};
  }

  void lower_decl(const Stmt* s) {
    if (s->structured_binding) {
      const NodeId value = eval(s->decls[0].init.get());
      for (const auto& d : s->decls) write(value, var(d.name));
      return;
    }
    for (const auto& d : s->decls) {
      for (const auto& dim : d.array_dims) eval(dim.get());
      std::string type = d.type;
      if (classify(type) == TypeClass::Unknown && d.init) {
        const std::string inferred = type_of(d.init.get());
        if (!inferred.empty()) type = inferred;
      }
      if (cpp()) var_types_[d.name] = type;
      NodeId value = eval(d.init.get());
      if (d.init) value = convert(value, type_of(d.init.get()), type);
      write(value, var(d.name));
    }
  }

  Flow lower_if(const Stmt* s) {
    stmt_ = stmt_node(s);
    const NodeId head = stmt_;
    eval(s->expr.get());
    Exits exits = attach(head, "trueNext", lower_block(s->body));
    Exits other = attach(head, "falseNext", lower_block(s->orelse));
    exits.insert(exits.end(), other.begin(), other.end());
    return Flow{head, std::move(exits)};
  }

  // Body and back edge of a loop whose condition lives in `head`.
  Exits loop_body(NodeId head, NodeId continue_target, const std::vector<StmtPtr>& body, const Expr* inc,
                  const std::vector<StmtPtr>& orelse) {
    loops_.push_back(LoopContext{});
    Flow f = lower_block(body);
    Exits tails;
    if (f.entry == kNone) {
      tails.push_back({head, "trueNext"});
    } else {
      g_.add_edge(head, f.entry, "trueNext");
      tails = std::move(f.exits);
    }
    LoopContext ctx = std::move(loops_.back());
    loops_.pop_back();
    NodeId target = head;
    if (inc) {
      stmt_ = expr_node(inc);
      eval(inc);
      connect(tails, stmt_);
      g_.add_edge(stmt_, head, "next");
      target = stmt_;
    } else {
      connect(tails, head);
    }
    for (NodeId c : ctx.continues) g_.add_edge(c, continue_target == kNone ? target : continue_target, "next");
    Exits exits = attach(head, "falseNext", lower_block(orelse));
    exits.insert(exits.end(), ctx.breaks.begin(), ctx.breaks.end());
    return exits;
  }

  Flow lower_while(const Stmt* s) {
    stmt_ = stmt_node(s);
    const NodeId head = stmt_;
    eval(s->expr.get());
    return Flow{head, loop_body(head, head, s->body, nullptr, s->orelse)};
  }

  Flow lower_for(const Stmt* s) {
    Flow init = lower_stmt(s->init.get());
    stmt_ = stmt_node(s);
    const NodeId head = stmt_;
    eval(s->expr.get());
    if (init.entry != kNone) connect(init.exits, head);
    Exits exits = loop_body(head, kNone, s->body, s->extra.get(), s->orelse);
    return Flow{init.entry != kNone ? init.entry : head, std::move(exits)};
  }

  Flow lower_range_for(const Stmt* s) {
    stmt_ = stmt_node(s);
    const NodeId head = stmt_;
    const NodeId iterable = eval(s->expr.get());
    if (cpp()) {
      const std::string elem = element_type(type_of(s->expr.get()), true);
      for (const auto& d : s->decls) {
        var_types_[d.name] = classify(d.type) == TypeClass::Unknown ? elem : d.type;
        write(iterable, var(d.name));
      }
    } else {
      assign_target(s->target.get(), iterable);
    }
    return Flow{head, loop_body(head, head, s->body, nullptr, s->orelse)};
  }

  Flow lower_do(const Stmt* s) {
    loops_.push_back(LoopContext{});
    Flow body = lower_block(s->body);
    LoopContext ctx = std::move(loops_.back());
    loops_.pop_back();
    stmt_ = stmt_node(s);
    const NodeId cond = stmt_;
    eval(s->expr.get());
    if (body.entry == kNone) {
      g_.add_edge(cond, cond, "trueNext");
    } else {
      connect(body.exits, cond);
      g_.add_edge(cond, body.entry, "trueNext");
    }
    for (NodeId c : ctx.continues) g_.add_edge(c, cond, "next");
    Exits exits{{cond, "falseNext"}};
    exits.insert(exits.end(), ctx.breaks.begin(), ctx.breaks.end());
    return Flow{body.entry != kNone ? body.entry : cond, std::move(exits)};
  }

  Flow lower_switch(const Stmt* s) {
    stmt_ = stmt_node(s);
    const NodeId head = stmt_;
    eval(s->expr.get());
    LoopContext ctx;
    ctx.is_loop = false;
    loops_.push_back(std::move(ctx));
    Exits pending;
    bool has_default = false;
    for (const auto& c : s->cases) {
      has_default = has_default || c.is_default;
      Flow f = lower_block(c.body);
      if (f.entry == kNone) continue;
      g_.add_edge(head, f.entry, "next");
      connect(pending, f.entry);
      pending = std::move(f.exits);
    }
    ctx = std::move(loops_.back());
    loops_.pop_back();
    Exits exits = std::move(pending);
    exits.insert(exits.end(), ctx.breaks.begin(), ctx.breaks.end());
    if (!has_default) exits.push_back({head, "next"});
    return Flow{head, std::move(exits)};
  }

  Flow lower_try(const Stmt* s) {
    stmt_ = stmt_node(s);
    const NodeId head = stmt_;
    Exits exits = attach(head, "next", lower_block(s->body));
    if (!s->orelse.empty()) {
      Flow orelse = lower_block(s->orelse);
      if (orelse.entry != kNone) {
        connect(exits, orelse.entry);
        exits = std::move(orelse.exits);
      }
    }
    for (const auto& h : s->handlers) {
      Flow f = lower_block(h);
      if (f.entry == kNone) continue;
      g_.add_edge(head, f.entry, "next");
      exits.insert(exits.end(), f.exits.begin(), f.exits.end());
    }
    if (!s->finally_body.empty()) {
      Flow fin = lower_block(s->finally_body);
      if (fin.entry != kNone) {
        connect(exits, fin.entry);
        exits = std::move(fin.exits);
      }
    }
    return Flow{head, std::move(exits)};
  }
};

}  // namespace

ComposedSyntaxGraph build_graph(const TranslationUnit& unit, Language lang) {
  ComposedSyntaxGraph g;
  Builder builder(unit, lang, g);
  for (const auto& fn : unit.functions) {
    if (fn.name.empty()) continue;
    builder.build_function(fn);
  }
  g.partial = unit.partial;
  g.recount();
  return g;
}

}  // namespace codegrag::syntax
