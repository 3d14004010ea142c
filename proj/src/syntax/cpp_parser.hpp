#pragma once

#include <string_view>

#include "syntax/ast.hpp"

namespace codegrag::syntax {

/// Parses a C++ translation unit into function bodies. Unparseable
/// statements and declarations are skipped and flag the unit as partial.
TranslationUnit parse_cpp(std::string_view code);

}  // namespace codegrag::syntax
