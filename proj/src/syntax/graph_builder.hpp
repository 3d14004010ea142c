#pragma once

#include "codegrag/syntax_graph.hpp"
#include "syntax/ast.hpp"

namespace codegrag::syntax {

// Lowers every function of the unit into one composed graph. Functions are
// laid out one after another; temporaries are numbered across the graph.
ComposedSyntaxGraph build_graph(const TranslationUnit& unit, Language lang);

}  // namespace codegrag::syntax
