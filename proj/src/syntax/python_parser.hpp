#pragma once

#include <string_view>

#include "syntax/ast.hpp"

namespace codegrag::syntax {

/// Parses a Python module; every `def` (top level, in classes, nested)
/// becomes a Function. Bad logical lines are skipped and flag the unit.
TranslationUnit parse_python(std::string_view code);

}  // namespace codegrag::syntax
