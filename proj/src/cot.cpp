#include "reflect/cot.hpp"

#include <cctype>

#include "reflect/textutil.hpp"

namespace reflect {

namespace {

bool is_blank(std::string_view line) {
  for (unsigned char c : line)
    if (!std::isspace(c)) return false;
  return true;
}

// Returns the normalized operator for the token starting at text[i], and the
// token's byte length; 0 when it is not an operator.
char match_operator(std::string_view text, std::size_t i, std::size_t* len) {
  unsigned char c = text[i];
  *len = 1;
  switch (c) {
    case '+':
      return '+';
    case '-':
      return '-';
    case '*':
      return '*';
    case '/':
      return '/';
    case 'x':
    case 'X':
      return '*';
  }
  // UTF-8: U+00D7 multiplication, U+00F7 division, U+2212 minus
  if (c == 0xC3 && i + 1 < text.size()) {
    unsigned char c2 = text[i + 1];
    if (c2 == 0x97) {
      *len = 2;
      return '*';
    }
    if (c2 == 0xB7) {
      *len = 2;
      return '/';
    }
  }
  if (c == 0xE2 && i + 2 < text.size() &&
      static_cast<unsigned char>(text[i + 1]) == 0x88 &&
      static_cast<unsigned char>(text[i + 2]) == 0x92) {
    *len = 3;
    return '-';
  }
  return 0;
}

}  // namespace

std::vector<ExprToken> tokenize_expr(const std::string& expr) {
  std::vector<ExprToken> tokens;
  std::size_t i = 0;
  bool expect_operand = true;
  while (i < expr.size()) {
    unsigned char c = expr[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (expect_operand) {
      std::size_t start = i;
      if (expr[i] == '-') ++i;  // unary minus
      std::size_t dstart = i;
      while (i < expr.size() &&
             (std::isdigit(static_cast<unsigned char>(expr[i])) ||
              (expr[i] == ',' && i + 1 < expr.size() &&
               std::isdigit(static_cast<unsigned char>(expr[i + 1])) && i > dstart) ||
              (expr[i] == '.' && i + 1 < expr.size() &&
               std::isdigit(static_cast<unsigned char>(expr[i + 1]))))) {
        ++i;
      }
      // lone trailing '.' belongs to the number ("5." is still 5)? keep strict:
      if (i == dstart) throw CotError("expected a number in expression", start, start + 1);
      auto value = Decimal::parse(expr.substr(start, i - start));
      if (!value) throw CotError("malformed number in expression", start, i);
      ExprToken t;
      t.is_operand = true;
      t.begin = start;
      t.end = i;
      t.value = *value;
      tokens.push_back(t);
      expect_operand = false;
    } else {
      std::size_t len = 0;
      char op = match_operator(expr, i, &len);
      if (op == 0) throw CotError("expected an operator in expression", i, i + 1);
      ExprToken t;
      t.is_operand = false;
      t.begin = i;
      t.end = i + len;
      t.op = op;
      tokens.push_back(t);
      i += len;
      expect_operand = true;
    }
  }
  if (tokens.empty() || !tokens.back().is_operand)
    throw CotError("expression ends without an operand", expr.size(), expr.size());
  return tokens;
}

Decimal eval_tokens(const std::vector<ExprToken>& tokens) {
  // fold "*" and "/" runs first, then sum the additive terms left to right
  std::vector<Decimal> terms;
  std::vector<char> adds;  // sign op preceding terms[i+1]
  Decimal current = tokens[0].value;
  for (std::size_t i = 1; i + 1 < tokens.size(); i += 2) {
    char op = tokens[i].op;
    const Decimal& rhs = tokens[i + 1].value;
    if (op == '*') {
      current = current * rhs;
    } else if (op == '/') {
      if (rhs.is_zero()) throw CotError("division by zero in expression");
      current = current / rhs;
    } else {
      terms.push_back(current);
      adds.push_back(op);
      current = rhs;
    }
  }
  terms.push_back(current);
  Decimal acc = terms[0];
  for (std::size_t i = 0; i < adds.size(); ++i) {
    if (adds[i] == '+')
      acc = acc + terms[i + 1];
    else
      acc = acc - terms[i + 1];
  }
  return acc;
}

Decimal eval_expr(const std::string& expr) { return eval_tokens(tokenize_expr(expr)); }

namespace {

Annotation parse_annotation(const std::string& line, std::size_t begin, std::size_t end) {
  // content between "<<" and ">>"
  std::string content = line.substr(begin + 2, end - begin - 4);
  std::size_t eq = content.rfind('=');
  if (eq == std::string::npos)
    throw CotError("annotation has no '=': " + content, begin, end);
  Annotation a;
  a.begin = begin;
  a.end = end;
  a.raw_expr = content.substr(0, eq);
  a.raw_result = content.substr(eq + 1);
  auto result = Decimal::parse(a.raw_result);
  if (!result)
    throw CotError("annotation result is not a number: " + a.raw_result, begin, end);
  a.result = *result;
  std::vector<ExprToken> tokens;
  try {
    tokens = tokenize_expr(a.raw_expr);
  } catch (const CotError& e) {
    throw CotError("bad annotation expression '" + a.raw_expr + "': " + e.what(),
                   begin, end);
  }
  for (const auto& t : tokens) {
    if (t.is_operand)
      a.operands.push_back(t.value);
    else
      a.ops.push_back(t.op);
  }
  Decimal evaluated;
  try {
    evaluated = eval_tokens(tokens);
  } catch (const CotError& e) {
    throw CotError("annotation expression does not evaluate: " + a.raw_expr, begin, end);
  }
  a.consistent = Decimal::approx_equal(evaluated, a.result);
  return a;
}

}  // namespace

void rescan_step(CotStep& step) {
  step.annotations.clear();
  std::size_t pos = 0;
  while (true) {
    std::size_t open = step.text.find("<<", pos);
    if (open == std::string::npos) break;
    std::size_t close = step.text.find(">>", open + 2);
    if (close == std::string::npos)
      throw CotError("unterminated annotation", open, step.text.size());
    step.annotations.push_back(parse_annotation(step.text, open, close + 2));
    pos = close + 2;
  }
}

std::size_t ParsedCot::annotation_count() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.annotations.size();
  return n;
}

std::size_t ParsedCot::annotated_step_count() const {
  std::size_t n = 0;
  for (const auto& s : steps)
    if (!s.annotations.empty()) ++n;
  return n;
}

ParsedCot parse_cot(const std::string& text, const CotParseOptions& opts) {
  if (text.empty()) throw CotError("empty CoT");
  ParsedCot cot;
  std::string pending;  // separator bytes accumulated before the next step
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line =
        nl == std::string::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    bool has_newline = nl != std::string::npos;
    if (is_blank(line)) {
      pending += line;
      if (has_newline) pending += '\n';
    } else {
      CotStep step;
      step.leading = pending;
      pending.clear();
      step.text = line;
      rescan_step(step);
      cot.steps.push_back(std::move(step));
      if (has_newline) pending = "\n";
    }
    pos = has_newline ? nl + 1 : text.size();
  }
  cot.trailing = pending;

  // a trailing "#### <number>" line becomes the final marker
  if (!cot.steps.empty() && cot.steps.back().annotations.empty()) {
    const std::string& last = cot.steps.back().text;
    const std::string& prefix = opts.final_marker_prefix;
    if (!prefix.empty() && last.rfind(prefix, 0) == 0) {
      auto value = Decimal::parse(trim(last.substr(prefix.size())));
      if (value) {
        cot.marker_line = last;
        cot.marker_leading = cot.steps.back().leading;
        cot.marker_value = *value;
        cot.steps.pop_back();
      }
    }
  }

  if (cot.annotation_count() == 0 && !cot.marker_line)
    throw CotError("unannotated CoT");
  return cot;
}

std::string render_cot(const ParsedCot& cot) {
  std::string out;
  for (const auto& step : cot.steps) {
    out += step.leading;
    out += step.text;
  }
  if (cot.marker_line) {
    out += cot.marker_leading;
    out += *cot.marker_line;
  }
  out += cot.trailing;
  return out;
}

Decimal final_answer(const ParsedCot& cot) {
  if (cot.marker_value) return *cot.marker_value;
  for (std::size_t i = cot.steps.size(); i-- > 0;) {
    if (!cot.steps[i].annotations.empty())
      return cot.steps[i].annotations.back().result;
  }
  throw CotError("CoT has neither annotations nor a final marker");
}

std::vector<std::pair<std::size_t, std::size_t>> find_expr_echo(
    const std::string& text, std::size_t ann_begin, const std::string& expr) {
  std::vector<ExprToken> tokens;
  try {
    tokens = tokenize_expr(expr);
  } catch (const CotError&) {
    return {};
  }
  std::size_t pos = ann_begin;
  if (pos > 0 && text[pos - 1] == '$') --pos;
  while (pos > 0 && text[pos - 1] == ' ') --pos;
  if (pos == 0 || text[pos - 1] != '=') return {};
  --pos;

  std::vector<std::pair<std::size_t, std::size_t>> spans(tokens.size());
  for (std::size_t i = tokens.size(); i-- > 0;) {
    while (pos > 0 && text[pos - 1] == ' ') --pos;
    std::string token = expr.substr(tokens[i].begin, tokens[i].end - tokens[i].begin);
    if (pos < token.size() ||
        text.compare(pos - token.size(), token.size(), token) != 0)
      return {};
    spans[i] = {pos - token.size(), pos};
    pos -= token.size();
  }
  return spans;
}

void rewrite_annotation(CotStep& step, std::size_t ann_index,
                        const std::string& new_expr, const Decimal& new_result) {
  const Annotation& ann = step.annotations.at(ann_index);
  std::string old_expr = ann.raw_expr;
  std::string old_result = ann.raw_result;
  std::string new_result_str = new_result.str();

  std::string text = step.text;
  std::size_t begin = ann.begin;
  std::size_t end = ann.end;

  // duplicated result right after ">>"
  std::string tail = text.substr(end);
  std::string old_result_trim = trim(old_result);
  if (!old_result_trim.empty() && tail.rfind(old_result_trim, 0) == 0) {
    tail = new_result_str + tail.substr(old_result_trim.size());
  }

  // "expr =" prose echo right before "<<"
  std::string head = text.substr(0, begin);
  if (old_expr != new_expr) {
    auto echo = find_expr_echo(text, begin, old_expr);
    if (!echo.empty()) {
      std::vector<ExprToken> old_tokens = tokenize_expr(old_expr);
      std::vector<ExprToken> new_tokens;
      try {
        new_tokens = tokenize_expr(new_expr);
      } catch (const CotError&) {
        new_tokens.clear();
      }
      if (new_tokens.size() == old_tokens.size()) {
        // token counts agree: substitute in place, keeping the echo's spacing
        for (std::size_t i = echo.size(); i-- > 0;) {
          std::string replacement = new_expr.substr(
              new_tokens[i].begin, new_tokens[i].end - new_tokens[i].begin);
          head = head.substr(0, echo[i].first) + replacement +
                 head.substr(echo[i].second);
        }
      } else if (!new_tokens.empty()) {
        head = head.substr(0, echo.front().first) + new_expr +
               head.substr(echo.back().second);
      }
    }
  }

  step.text = head + "<<" + new_expr + "=" + new_result_str + ">>" + tail;
  rescan_step(step);
}

}  // namespace reflect
