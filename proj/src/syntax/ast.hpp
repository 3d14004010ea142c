#pragma once

// Small language-neutral AST shared by the C++ and Python front-ends.
// It keeps just enough structure to derive operation, control and
// read/write flows; anything else is folded into ExprKind::Other.

#include <memory>
#include <string>
#include <vector>

namespace codegrag::syntax {

enum class ExprKind {
  Name,
  Literal,
  Binary,
  Unary,
  IncDec,
  Assign,
  CompoundAssign,
  Call,
  MethodCall,
  Member,
  Subscript,
  Conditional,
  Cast,
  Sequence,
  Construct,
  Lambda,
  Comprehension,
  Slice,
  Other,
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  ExprKind kind = ExprKind::Other;
  // Binary/Unary/IncDec/CompoundAssign: operator spelling.
  // Literal: literal node type. Cast/Sequence/Comprehension/Other: AST kind.
  std::string op;
  // Name: identifier. Literal: spelling. Call: callee name. MethodCall/Member:
  // member name. Cast/Construct: target type.
  std::string text;
  // Operands in child order. Assign: targets..., value. Slice slots may be null.
  std::vector<ExprPtr> kids;
  // Call through an expression rather than a plain name.
  ExprPtr callee;
  // Comprehension generators: targets[i] iterates over iters[i].
  std::vector<ExprPtr> targets;
  std::vector<ExprPtr> iters;
  std::vector<ExprPtr> conds;

  explicit Expr(ExprKind k) : kind(k) {}
};

inline ExprPtr make_expr(ExprKind kind, std::string op = {}, std::string text = {}) {
  auto e = std::make_unique<Expr>(kind);
  e->op = std::move(op);
  e->text = std::move(text);
  return e;
}

enum class StmtKind {
  Decl,
  Expr,
  Return,
  If,
  For,       // C-style for: init / cond / inc
  RangeFor,  // C++ range-for and Python for
  While,
  DoWhile,
  Break,
  Continue,
  Block,
  Empty,     // C++ ';' and Python pass
  Switch,
  Try,
  With,
  Assert,
  Raise,
  Simple,    // statements without data flow (nested def, global, import, ...)
};

struct Declarator {
  std::string name;
  std::string type;  // full declared type text, including pointer/array marks
  ExprPtr init;
  std::vector<ExprPtr> array_dims;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct SwitchCase {
  bool is_default = false;
  ExprPtr label;
  std::vector<StmtPtr> body;
};

struct Stmt {
  StmtKind kind = StmtKind::Simple;
  // Front-end specific node type for the statement node, e.g. "ReturnStmt"
  // or "Return". Empty for Expr statements in C++, where the builder names
  // the node after the top-level expression.
  std::string node_type;
  std::string keyword;
  std::vector<Declarator> decls;
  ExprPtr expr;    // value, condition, iterable, assert test
  ExprPtr target;  // RangeFor / With binding target
  ExprPtr extra;   // assert message, C-for increment
  StmtPtr init;    // C-for init
  std::vector<StmtPtr> body;
  std::vector<StmtPtr> orelse;
  std::vector<std::vector<StmtPtr>> handlers;
  std::vector<StmtPtr> finally_body;
  std::vector<SwitchCase> cases;
  // Names bound by the statement itself (except-as, import, nested def).
  std::vector<std::string> bound_names;
  // C++ `auto [a, b] = e;`: every declarator is written from decls[0].init.
  bool structured_binding = false;
};

inline StmtPtr make_stmt(StmtKind kind, std::string node_type, std::string keyword) {
  auto s = std::make_unique<Stmt>();
  s->kind = kind;
  s->node_type = std::move(node_type);
  s->keyword = std::move(keyword);
  return s;
}

struct Param {
  std::string name;
  std::string type;
};

struct Function {
  std::string name;
  std::string return_type;
  std::vector<Param> params;
  std::vector<StmtPtr> body;
  // Python: names the body declares global/nonlocal.
  std::vector<std::string> nonlocal_names;
};

struct TranslationUnit {
  std::vector<Function> functions;
  // Every function name declared or defined in the unit (user functions).
  std::vector<std::string> declared_functions;
  // Return types for declared C++ functions, parallel to declared_functions.
  std::vector<std::string> declared_return_types;
  bool partial = false;
};

}  // namespace codegrag::syntax
