#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "exergm/terms.hpp"

namespace exergm {

/// Parse failure with the 0-based character offset of the offending token.
class FormulaError : public std::invalid_argument {
 public:
  FormulaError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Parses a model formula. Grammar (LL(1), whitespace-insensitive):
///
///   formula     = item , { "+" , item } ;
///   item        = "offset" , "(" , term , ")"
///               | "constraint" , "(" , term , ( ">=" | "<=" ) , number , ")"
///               | term ;
///   term        = transformed , [ "*" , interaction ] ;
///   transformed = base
///               | ( "sqrt" | "log" ) , "(" , base , ")"
///               | ( "pow" | "scale" ) , "(" , base , "," , number , ")" ;
///   base        = "edges" | "mutual" | "ttriad" | "fourcycle"
///               | ( "nodematch" | "nodeicov" | "nodeocov" ) , "(" , ident , ")" ;
///   interaction = "I" , "(" , "n" , "==" , integer , ")"
///               | "log" , "(" , "1" , "/" , "n" , ")" ;
///
/// Terms keep source order; offsets and constraints are collected
/// separately in source order.
ModelSpec parse_formula(std::string_view text);

/// Canonical text: free terms first, then offsets/constraints, joined by
/// " + ". parse_formula(print_formula(m)) == m.
std::string print_formula(const ModelSpec& model);

}  // namespace exergm
