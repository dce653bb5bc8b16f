#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cyclematch::textio {

/// Shortest form that round-trips: "%.17g".
std::string format_real(double x);

void write_row(std::ostream& os, const Eigen::Ref<const Eigen::RowVectorXd>& row);
void write_matrix(std::ostream& os, const Eigen::MatrixXd& m);

/// Line-oriented tokenizer for the text formats. Errors are Format errors
/// that name the source and line number.
class LineReader {
 public:
  LineReader(std::istream& is, std::string source);

  /// Next line split on whitespace; Format error at end of input.
  std::vector<std::string> tokens();
  bool at_end();
  int line() const { return line_; }

  /// Reads `name value` pairs from one line in the stated order.
  std::vector<std::string> keyed(const std::vector<std::string_view>& keys);
  void expect_header(std::string_view magic, std::string_view version);
  std::vector<double> reals(std::size_t count);
  std::vector<long long> integers(std::size_t count);
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols);

  [[noreturn]] void error(const std::string& what) const;

 private:
  std::istream& is_;
  std::string source_;
  int line_ = 0;
  bool peeked_ = false;
  std::string peek_;
};

double parse_real(const std::string& tok, const LineReader& where);
long long parse_int(const std::string& tok, const LineReader& where);

}  // namespace cyclematch::textio
