#ifndef ASL_SELFTEST_SELFTEST_HPP
#define ASL_SELFTEST_SELFTEST_HPP

#include <string>
#include <vector>

namespace asl::selftest {

struct Options {
  std::vector<std::string> filters;  // substring conjunction; empty = all
  bool inject_dlt_jacobian_fault = false;  // test hook for the fault guard
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

std::vector<CheckResult> run(const Options& opt);
std::string format_report(const std::vector<CheckResult>& results);
int count_failures(const std::vector<CheckResult>& results);

}  // namespace asl::selftest

#endif
