#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflect/decimal.hpp"

namespace reflect {

class CotError : public std::runtime_error {
 public:
  CotError(std::string message, std::size_t begin = 0, std::size_t end = 0)
      : std::runtime_error(std::move(message)), span_begin(begin), span_end(end) {}
  std::size_t span_begin;
  std::size_t span_end;
};

// One "<<expr=result>>" calculator annotation. raw_expr/raw_result hold the
// original bytes so untouched annotations render back verbatim.
struct Annotation {
  std::string raw_expr;
  std::string raw_result;
  std::vector<Decimal> operands;
  std::vector<char> ops;  // '+', '-', '*', '/'
  Decimal result;
  std::size_t begin = 0;  // span of "<<...>>" within the step text
  std::size_t end = 0;
  bool consistent = true;  // |eval(raw_expr) - result| <= 1e-6 * max(1, |result|)
};

struct CotStep {
  std::string text;     // full line, annotations inline
  std::string leading;  // exact bytes (newlines, blank lines) before this line
  std::vector<Annotation> annotations;
};

struct ParsedCot {
  std::vector<CotStep> steps;
  std::optional<std::string> marker_line;  // final-answer line, verbatim
  std::string marker_leading;
  std::optional<Decimal> marker_value;
  std::string trailing;  // bytes after the last content line

  std::size_t annotation_count() const;
  std::size_t annotated_step_count() const;
};

struct CotParseOptions {
  std::string final_marker_prefix = "#### ";
};

// Splits on line boundaries, scans every "<<...>>" region, recognizes a
// trailing final-answer marker line. Round-trips byte-exactly through
// render_cot. Throws CotError on malformed annotations and on inputs with
// neither an annotation nor a marker ("unannotated CoT").
ParsedCot parse_cot(const std::string& text, const CotParseOptions& opts = {});

std::string render_cot(const ParsedCot& cot);

// Marker value when present, else the last annotation's result.
Decimal final_answer(const ParsedCot& cot);

// Left-associative, "*"/"/" before "+"/"-"; accepts unary minus and the
// unicode forms of the four operators plus "x" for multiplication. Throws
// CotError on malformed tokens and division by zero.
Decimal eval_expr(const std::string& expr);

struct ExprToken {
  bool is_operand = true;
  std::size_t begin = 0;
  std::size_t end = 0;
  Decimal value;  // operands only
  char op = 0;    // operators only, normalized to ascii
};

std::vector<ExprToken> tokenize_expr(const std::string& expr);
Decimal eval_tokens(const std::vector<ExprToken>& tokens);

// Locates an "expr =" prose echo directly before an annotation's "<<". The
// echo may space its tokens differently from the annotation body
// ("60 / 2 = <<60/2=30>>"), so matching walks the expression tokens backwards.
// Returns the echoed token spans in text order, empty when there is no echo.
std::vector<std::pair<std::size_t, std::size_t>> find_expr_echo(
    const std::string& text, std::size_t ann_begin, const std::string& expr);

// Replaces one annotation's expression and/or result, keeping the step text
// in sync: the "<<...>>" region, a duplicated result right after ">>", and an
// "expr=" echo right before "<<" are all rewritten, then annotation spans for
// the whole step are re-scanned.
void rewrite_annotation(CotStep& step, std::size_t ann_index,
                        const std::string& new_expr, const Decimal& new_result);

// Re-scans the annotations of a step after its text changed.
void rescan_step(CotStep& step);

}  // namespace reflect
