#include "loss/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace asl::loss {

GradCheckReport gradcheck_jacobian(const std::string& name, const VectorFn& f,
                                   const std::vector<double>& x0,
                                   const std::vector<std::vector<double>>& jac,
                                   const GradCheckOptions& opt) {
  GradCheckReport report;
  report.name = name;
  std::vector<double> x = x0;
  try {
    const std::vector<double> y0 = f(x0);
    if (jac.size() != y0.size())
      throw std::runtime_error("jacobian row count mismatch");
    for (size_t i = 0; i < x0.size(); ++i) {
      x[i] = x0[i] + opt.step;
      const std::vector<double> yp = f(x);
      x[i] = x0[i] - opt.step;
      const std::vector<double> ym = f(x);
      x[i] = x0[i];
      for (size_t r = 0; r < y0.size(); ++r) {
        if (jac[r].size() != x0.size())
          throw std::runtime_error("jacobian column count mismatch");
        const double fd = (yp[r] - ym[r]) / (2.0 * opt.step);
        const double abs_err = std::abs(fd - jac[r][i]);
        const double scale = std::max({std::abs(fd), std::abs(jac[r][i]), 1.0});
        report.max_abs_err = std::max(report.max_abs_err, abs_err);
        report.max_rel_err = std::max(report.max_rel_err, abs_err / scale);
        ++report.entries;
      }
    }
    report.pass = report.max_abs_err < opt.tol;
  } catch (const std::exception& e) {
    report.evaluation_failed = true;
    report.pass = false;
    report.note = e.what();
  }
  return report;
}

GradCheckReport gradcheck_scalar(const std::string& name, const ScalarFn& f,
                                 const std::vector<double>& x0,
                                 const std::vector<double>& analytic,
                                 const GradCheckOptions& opt) {
  auto wrapped = [&f](const std::vector<double>& x) {
    return std::vector<double>{f(x)};
  };
  return gradcheck_jacobian(name, wrapped, x0, {analytic}, opt);
}

std::string format_report_line(const GradCheckReport& r) {
  char buf[256];
  if (r.evaluation_failed) {
    std::snprintf(buf, sizeof(buf), "FAIL %-40s evaluation failed: %s",
                  r.name.c_str(), r.note.c_str());
  } else if (r.flagged_non_smooth) {
    std::snprintf(buf, sizeof(buf), "SKIP %-40s non-smooth point: %s",
                  r.name.c_str(), r.note.c_str());
  } else {
    std::snprintf(buf, sizeof(buf),
                  "%s %-40s max_abs=%.3e max_rel=%.3e entries=%d",
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), r.max_abs_err,
                  r.max_rel_err, r.entries);
  }
  return buf;
}

}  // namespace asl::loss
