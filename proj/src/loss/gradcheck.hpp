#ifndef ASL_LOSS_GRADCHECK_HPP
#define ASL_LOSS_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

namespace asl::loss {

struct GradCheckOptions {
  double step = 1e-4;
  double tol = 1e-4;  // on max absolute error
};

struct GradCheckReport {
  std::string name;
  bool pass = false;
  bool evaluation_failed = false;
  bool flagged_non_smooth = false;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  int entries = 0;
  std::string note;
};

using ScalarFn = std::function<double(const std::vector<double>&)>;
using VectorFn = std::function<std::vector<double>(const std::vector<double>&)>;

// Central finite differences of a scalar function against an analytic
// gradient. Evaluation failures are reported, not propagated.
GradCheckReport gradcheck_scalar(const std::string& name, const ScalarFn& f,
                                 const std::vector<double>& x0,
                                 const std::vector<double>& analytic,
                                 const GradCheckOptions& opt = {});

// Same for a vector-valued function against a full Jacobian, laid out
// jac[out][in].
GradCheckReport gradcheck_jacobian(const std::string& name, const VectorFn& f,
                                   const std::vector<double>& x0,
                                   const std::vector<std::vector<double>>& jac,
                                   const GradCheckOptions& opt = {});

std::string format_report_line(const GradCheckReport& r);

}  // namespace asl::loss

#endif
