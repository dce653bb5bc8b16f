#include "cyclematch/text_io.hpp"

#include "cyclematch/error.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace cyclematch::textio {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_row(std::ostream& os, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j) os << ' ';
    os << format_real(row[j]);
  }
  os << '\n';
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) write_row(os, m.row(i));
}

LineReader::LineReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

void LineReader::error(const std::string& what) const {
  fail(ErrorCode::Format, source_ + ":" + std::to_string(line_) + ": " + what);
}

bool LineReader::at_end() {
  if (peeked_) return false;
  while (std::getline(is_, peek_)) {
    if (peek_.find_first_not_of(" \t\r") != std::string::npos) {
      peeked_ = true;
      return false;
    }
    ++line_;
  }
  return true;
}

std::vector<std::string> LineReader::tokens() {
  if (at_end()) {
    ++line_;
    error("unexpected end of file");
  }
  peeked_ = false;
  ++line_;
  std::istringstream ss(peek_);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> LineReader::keyed(const std::vector<std::string_view>& keys) {
  auto toks = tokens();
  if (toks.size() != 2 * keys.size()) error("expected " + std::to_string(2 * keys.size()) + " tokens");
  std::vector<std::string> values;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (toks[2 * k] != keys[k]) error("expected key '" + std::string(keys[k]) + "'");
    values.push_back(toks[2 * k + 1]);
  }
  return values;
}

void LineReader::expect_header(std::string_view magic, std::string_view version) {
  auto toks = tokens();
  if (toks.size() != 2 || toks[0] != magic || toks[1] != version)
    error("bad header, expected '" + std::string(magic) + " " + std::string(version) + "'");
}

std::vector<double> LineReader::reals(std::size_t count) {
  auto toks = tokens();
  if (toks.size() != count)
    error("expected " + std::to_string(count) + " values, found " + std::to_string(toks.size()));
  std::vector<double> out;
  out.reserve(count);
  for (const auto& t : toks) out.push_back(parse_real(t, *this));
  return out;
}

std::vector<long long> LineReader::integers(std::size_t count) {
  auto toks = tokens();
  if (toks.size() != count)
    error("expected " + std::to_string(count) + " integers, found " + std::to_string(toks.size()));
  std::vector<long long> out;
  out.reserve(count);
  for (const auto& t : toks) out.push_back(parse_int(t, *this));
  return out;
}

Eigen::MatrixXd LineReader::matrix(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = reals(static_cast<std::size_t>(cols));
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

double parse_real(const std::string& tok, const LineReader& where) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) where.error("not a real number: '" + tok + "'");
  return v;
}

long long parse_int(const std::string& tok, const LineReader& where) {
  long long v = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) where.error("not an integer: '" + tok + "'");
  return v;
}

}  // namespace cyclematch::textio
