#include "selftest/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>

#include "core/image.hpp"
#include "core/weights.hpp"
#include "detect/pyramid.hpp"
#include "detect/scoring.hpp"
#include "eval/harness.hpp"
#include "loss/correspondence.hpp"
#include "loss/gradcheck.hpp"
#include "loss/losses.hpp"
#include "match/epipolar.hpp"
#include "pipeline/extractor.hpp"

namespace asl::selftest {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Deterministic random helpers (the checks never touch global RNG state).

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}

  double uniform(double lo, double hi) {
    const double u =
        static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  }
  double normal() {
    const double u1 = (static_cast<double>(gen() >> 11) + 1.0) *
                      (1.0 / 9007199254740992.0);
    const double u2 =
        static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }
  int integer(int n) { return static_cast<int>(gen() % static_cast<uint64_t>(n)); }
};

Tensor random_tensor(Rng& rng, int h, int w, int c, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(h, w, c);
  for (size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

DTensor random_dtensor(Rng& rng, int h, int w, int c) {
  DTensor t(h, w, c);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

// Smooth positive image in [0, 1]: blurred noise, range-normalized.
Tensor smooth_random_image(Rng& rng, int h, int w) {
  Tensor noise = random_tensor(rng, h, w, 1, 0.0, 1.0);
  Tensor blurred = detect::gaussian_blur(detect::gaussian_blur(noise, 2.0), 2.0);
  const auto [lo, hi] = blurred.min_max();
  const float span = std::max(1e-6f, hi - lo);
  for (size_t i = 0; i < blurred.size(); ++i)
    blurred.data()[i] = (blurred.data()[i] - lo) / span;
  return blurred;
}

// ---------------------------------------------------------------------------
// Check plumbing.

struct Context {
  const Options* options = nullptr;
  std::chrono::steady_clock::time_point run_start;

  double elapsed_seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         run_start)
        .count();
  }
};

class Checker {
 public:
  explicit Checker(CheckResult* r) : r_(r) { r_->pass = true; }

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    r_->pass = false;
    ++failures_;
    if (failures_ <= 4) {
      if (!r_->detail.empty()) r_->detail += "; ";
      r_->detail += what;
    }
  }

  void expect_near(double got, double want, double tol, const std::string& what) {
    if (std::abs(got - want) <= tol) return;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s: got %.9g want %.9g (tol %.1e)",
                  what.c_str(), got, want, tol);
    expect(false, buf);
  }

  void note(const std::string& text) {
    if (!r_->detail.empty()) r_->detail += "; ";
    r_->detail += text;
  }

  bool ok() const { return r_->pass; }

 private:
  CheckResult* r_;
  int failures_ = 0;
};

using CheckFn = std::function<void(Context&, Checker&)>;

struct Check {
  std::string name;
  CheckFn fn;
};

bool expect_error(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  } catch (...) {
    return false;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Independent oracles (naive transcriptions, no shared code with the
// implementations they check).

double oracle_softplus(double v) { return std::log(1.0 + std::exp(v)); }

int oracle_clamp(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

Tensor oracle_peakiness_alpha(const Tensor& y, int dil) {
  Tensor out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i)
    for (int j = 0; j < y.width(); ++j)
      for (int c = 0; c < y.channels(); ++c) {
        double sum = 0.0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            sum += y.at(oracle_clamp(i + di * dil, 0, y.height() - 1),
                        oracle_clamp(j + dj * dil, 0, y.width() - 1), c);
        out.at(i, j, c) =
            static_cast<float>(oracle_softplus(y.at(i, j, c) - sum / 9.0));
      }
  return out;
}

Tensor oracle_peakiness_beta(const Tensor& y) {
  Tensor out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i)
    for (int j = 0; j < y.width(); ++j) {
      double sum = 0.0;
      for (int c = 0; c < y.channels(); ++c) sum += y.at(i, j, c);
      const double mean = sum / y.channels();
      for (int c = 0; c < y.channels(); ++c)
        out.at(i, j, c) =
            static_cast<float>(oracle_softplus(y.at(i, j, c) - mean));
    }
  return out;
}

Tensor oracle_d2_alpha(const Tensor& y, int dil) {
  Tensor out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i)
    for (int j = 0; j < y.width(); ++j)
      for (int c = 0; c < y.channels(); ++c) {
        double denom = 0.0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            denom += std::exp(y.at(oracle_clamp(i + di * dil, 0, y.height() - 1),
                                   oracle_clamp(j + dj * dil, 0, y.width() - 1), c));
        out.at(i, j, c) = static_cast<float>(std::exp(y.at(i, j, c)) / denom);
      }
  return out;
}

Tensor oracle_d2_beta(const Tensor& y) {
  Tensor out(y.height(), y.width(), y.channels());
  for (int i = 0; i < y.height(); ++i)
    for (int j = 0; j < y.width(); ++j) {
      double mx = -1e30;
      for (int c = 0; c < y.channels(); ++c)
        mx = std::max(mx, static_cast<double>(y.at(i, j, c)));
      for (int c = 0; c < y.channels(); ++c)
        out.at(i, j, c) =
            mx > 0.0 ? static_cast<float>(y.at(i, j, c) / mx) : 0.0f;
    }
  return out;
}

Tensor oracle_combine(const Tensor& a, const Tensor& b) {
  Tensor out(a.height(), a.width(), 1);
  for (int i = 0; i < a.height(); ++i)
    for (int j = 0; j < a.width(); ++j) {
      double best = -1e30;
      for (int c = 0; c < a.channels(); ++c)
        best = std::max(best,
                        static_cast<double>(a.at(i, j, c)) * b.at(i, j, c));
      out.at(i, j, 0) = static_cast<float>(best);
    }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

dcn::ConvLayer random_layer(Rng& rng, int k, int in_ch, int out_ch,
                            int stride = 1) {
  dcn::ConvLayer layer;
  layer.kernel = dcn::KernelT<float>::zeros(k, in_ch, out_ch);
  const double stddev = std::sqrt(2.0 / (k * k * in_ch));
  for (float& w : layer.kernel.w) w = static_cast<float>(stddev * rng.normal());
  layer.bias.assign(out_ch, 0.0f);
  layer.stride = stride;
  return layer;
}

// ---------------------------------------------------------------------------
// Gradient-suite helpers.

loss::GradCheckOptions grad_opts() { return {1e-4, 1e-4}; }

void run_gradcheck(Checker& check, const loss::GradCheckReport& report) {
  if (!report.pass) check.expect(false, loss::format_report_line(report));
}

std::vector<double> dlt_reduced(const geom::Mat3& h) {
  return {h[0], h[1], h[3], h[4], h[6], h[7]};
}

std::array<double, 8> to_offsets(const std::vector<double>& x) {
  std::array<double, 8> o{};
  for (int i = 0; i < 8; ++i) o[i] = x[i];
  return o;
}

// Descriptor draws for the loss gradient checks: roughly unit-norm rows,
// redrawn until the configuration sits away from hinge kinks and min ties.
struct LossDraw {
  loss::DescSet a, b;
  std::vector<geom::Vec2> cells_a, cells_b;
};

LossDraw draw_loss_config(Rng& rng, int n, int dim) {
  LossDraw d;
  d.a = loss::DescSet::zeros(n, dim);
  d.b = loss::DescSet::zeros(n, dim);
  for (int i = 0; i < n; ++i) {
    double na = 0.0, nb = 0.0;
    for (int j = 0; j < dim; ++j) {
      d.a.row(i)[j] = rng.normal();
      d.b.row(i)[j] = 0.7 * d.a.row(i)[j] + 0.7 * rng.normal();
    }
    for (int j = 0; j < dim; ++j) {
      na += d.a.row(i)[j] * d.a.row(i)[j];
      nb += d.b.row(i)[j] * d.b.row(i)[j];
    }
    for (int j = 0; j < dim; ++j) {
      d.a.row(i)[j] /= std::sqrt(na);
      d.b.row(i)[j] /= std::sqrt(nb);
    }
    // Spread the cells so every pair is outside the safe radius.
    d.cells_a.push_back({static_cast<double>(10 * i), 0.0});
    d.cells_b.push_back({0.0, static_cast<double>(10 * i)});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Individual checks. Names are substring-filterable; the acceptance gate is
// the set prefixed "acceptance.".

void check_pnm_roundtrip(Context&, Checker& check) {
  const std::string dir = "/tmp/asl-selftest";
  std::system(("mkdir -p " + dir).c_str());

  // 2x2 P5 with the reference byte values.
  {
    const std::string p = dir + "/t.pgm";
    std::FILE* f = std::fopen(p.c_str(), "wb");
    std::fputs("P5\n2 2\n255\n", f);
    const unsigned char bytes[4] = {0, 255, 128, 64};
    std::fwrite(bytes, 1, 4, f);
    std::fclose(f);
    const Image img = load_image(p);
    check.expect_near(img.pixels.at(0, 0, 0), 0.0, 1e-7, "pgm byte 0");
    check.expect_near(img.pixels.at(0, 1, 0), 1.0, 1e-7, "pgm byte 255");
    check.expect_near(img.pixels.at(1, 0, 0), 128.0 / 255.0, 1e-6, "pgm byte 128");
    check.expect_near(img.pixels.at(1, 1, 0), 64.0 / 255.0, 1e-6, "pgm byte 64");
  }
  // All-255 P6 -> all ones, 3 channels.
  {
    const std::string p = dir + "/t.ppm";
    std::FILE* f = std::fopen(p.c_str(), "wb");
    std::fputs("P6\n2 1\n255\n", f);
    const unsigned char bytes[6] = {255, 255, 255, 255, 255, 255};
    std::fwrite(bytes, 1, 6, f);
    std::fclose(f);
    const Image img = load_image(p);
    check.expect(img.channels() == 3, "ppm keeps 3 channels");
    check.expect_near(img.pixels.at(0, 1, 2), 1.0, 1e-7, "ppm all ones");
  }
  // Truncated raster -> I/O error; bad magic -> format error.
  {
    const std::string p = dir + "/trunc.pgm";
    std::FILE* f = std::fopen(p.c_str(), "wb");
    std::fputs("P5\n4 4\n255\n", f);
    const unsigned char bytes[8] = {1, 2, 3, 4, 5, 6, 7, 8};
    std::fwrite(bytes, 1, 8, f);
    std::fclose(f);
    check.expect(expect_error(ErrorKind::kIo, [&] { load_image(p); }),
                 "truncated raster raises I/O error");
  }
  {
    const std::string p = dir + "/bad.pgm";
    std::FILE* f = std::fopen(p.c_str(), "wb");
    std::fputs("P9\n2 2\n255\n....", f);
    std::fclose(f);
    check.expect(expect_error(ErrorKind::kFormat, [&] { load_image(p); }),
                 "bad magic raises format error");
  }
  // Grayscale conversion fixed points.
  {
    Tensor px(1, 2, 3);
    px.at(0, 0, 0) = 1.0f;  // pure red
    px.at(0, 1, 0) = px.at(0, 1, 1) = px.at(0, 1, 2) = 0.25f;
    const Image gray = to_grayscale(Image{px, ""});
    check.expect_near(gray.pixels.at(0, 0, 0), 0.299, 1e-6, "red luma");
    check.expect_near(gray.pixels.at(0, 1, 0), 0.25, 1e-6, "gray passthrough");
  }
}

void check_bilinear_affine(Context&, Checker& check) {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2),
                 c = rng.uniform(-1, 1);
    Tensor t(7, 9, 2);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) {
        t.at(y, x, 0) = static_cast<float>(a * x + b * y + c);
        t.at(y, x, 1) = static_cast<float>(-b * x + a * y);
      }
    for (int i = 0; i < 20; ++i) {
      const double x = rng.uniform(0.0, 8.0), y = rng.uniform(0.0, 6.0);
      check.expect_near(bilinear_sample(t, x, y, 0), a * x + b * y + c, 1e-5,
                        "bilinear exact on affine field");
    }
    check.expect_near(bilinear_sample(t, 3.0, 2.0, 0), t.at(2, 3, 0), 1e-7,
                      "integer coordinate lookup");
  }
  Tensor q = Tensor::from_data(2, 2, 1, {0.0f, 1.0f, 2.0f, 3.0f});
  check.expect_near(bilinear_sample(q, 0.5, 0.5, 0), 1.5, 1e-7,
                    "2x2 center average");
}

void check_standardize(Context&, Checker& check) {
  {
    Tensor px = Tensor::from_data(1, 3, 1, {0.0f, 0.5f, 1.0f});
    const Tensor out = standardize(Image{px, ""});
    check.expect_near(out.at(0, 0, 0), -1.2247448, 1e-5, "standardize low");
    check.expect_near(out.at(0, 1, 0), 0.0, 1e-6, "standardize mid");
    check.expect_near(out.at(0, 2, 0), 1.2247448, 1e-5, "standardize high");
  }
  {
    Tensor px = Tensor::from_data(1, 2, 1, {0.0f, 1.0f});
    const Tensor out = standardize(Image{px, ""});
    check.expect_near(out.at(0, 0, 0), -1.0, 1e-6, "two-pixel image");
    check.expect_near(out.at(0, 1, 0), 1.0, 1e-6, "two-pixel image");
  }
  {
    Tensor px(4, 4, 1, 0.37f);
    const Tensor out = standardize(Image{px, ""});
    check.expect_near(out.at(2, 2, 0), 0.0, 1e-9, "constant maps to zeros");
  }
  Rng rng(55);
  const Tensor img = random_tensor(rng, 6, 5, 1, 0.0, 1.0);
  const Tensor once = standardize(Image{img, ""});
  const Tensor twice = standardize(Image{once, ""});
  check.expect(max_abs_diff(once, twice) < 1e-5, "standardize idempotent");
}

void check_upsample(Context&, Checker& check) {
  check.expect(max_abs_diff(upsample_bilinear(Tensor(3, 3, 1, 0.7f), 1),
                            Tensor(3, 3, 1, 0.7f)) == 0.0,
               "factor 1 is identity");
  const Tensor constant = upsample_bilinear(Tensor(2, 3, 2, 0.4f), 3);
  const auto [clo, chi] = constant.min_max();
  check.expect_near(clo, 0.4, 1e-7, "constant upsample low");
  check.expect_near(chi, 0.4, 1e-7, "constant upsample high");

  Rng rng(17);
  const Tensor t = random_tensor(rng, 4, 5, 1);
  const auto [lo, hi] = t.min_max();
  const Tensor up = upsample_bilinear(t, 4);
  const auto [ulo, uhi] = up.min_max();
  check.expect(ulo >= lo - 1e-7 && uhi <= hi + 1e-7,
               "upsample never exceeds input range");

  const Tensor ramp = upsample_bilinear(Tensor::from_data(1, 2, 1, {0.0f, 1.0f}), 2);
  for (int x = 0; x + 1 < 4; ++x)
    check.expect(ramp.at(0, x, 0) <= ramp.at(0, x + 1, 0) + 1e-7,
                 "upsampled ramp is monotone");
}

void check_weights_roundtrip(Context&, Checker& check) {
  const net::BackboneConfig cfg{dcn::DcnVariant::kFree};
  const auto specs = net::weight_specs(cfg);
  const WeightStore store = seeded_random_weights(9001, specs);
  const WeightStore again = seeded_random_weights(9001, specs);
  const WeightStore other = seeded_random_weights(9002, specs);
  bool identical = store.size() == again.size();
  bool differs = false;
  for (size_t i = 0; i < store.size() && identical; ++i) {
    identical = store.entries()[i].values == again.entries()[i].values;
    if (store.entries()[i].values != other.entries()[i].values) differs = true;
  }
  check.expect(identical, "same seed twice is bit-identical");
  check.expect(differs, "different seeds differ");

  const std::string path = "/tmp/asl-selftest/w.aslw";
  std::system("mkdir -p /tmp/asl-selftest");
  write_weights(store, path);
  const WeightStore loaded = read_weights(path);
  bool equal = loaded.size() == store.size();
  for (size_t i = 0; i < store.size() && equal; ++i)
    equal = loaded.entries()[i].name == store.entries()[i].name &&
            loaded.entries()[i].dims == store.entries()[i].dims &&
            loaded.entries()[i].values == store.entries()[i].values;
  check.expect(equal, "weight file round-trip");
  validate_against(loaded, specs);

  {
    std::FILE* f = std::fopen("/tmp/asl-selftest/badmagic.aslw", "wb");
    std::fputs("NOPE", f);
    std::fclose(f);
    check.expect(expect_error(ErrorKind::kFormat,
                              [] { read_weights("/tmp/asl-selftest/badmagic.aslw"); }),
                 "bad magic raises format error");
  }
  {
    WeightStore partial;
    for (size_t i = 0; i + 1 < store.size(); ++i)
      partial.add(store.entries()[i]);
    try {
      validate_against(partial, specs);
      check.expect(false, "missing layer must fail validation");
    } catch (const Error& e) {
      check.expect(std::string(e.what()).find(specs.back().name) !=
                       std::string::npos,
                   "validation error names the missing layer");
    }
  }
}

void check_geom_activations(Context&, Checker& check) {
  check.expect_near(geom::activate_scale(0.0), 1.0, 1e-12, "scale(0)");
  check.expect_near(geom::activate_scale(50.0), std::exp(1.0), 1e-9,
                    "scale saturates at e");
  check.expect_near(geom::activate_scale(1.0), 2.1415538, 1e-5, "scale(1)");
  check.expect(geom::activate_scale(-50.0) >= std::exp(-1.0) - 1e-12,
               "scale lower bound 1/e");

  check.expect_near(geom::activate_angle(0.0, 1.0).theta, 0.0, 1e-12, "angle(0,1)");
  check.expect_near(geom::activate_angle(1.0, 0.0).theta, kPi / 2, 1e-12,
                    "angle(1,0)");
  check.expect_near(geom::activate_angle(-1.0, -1.0).theta, -3.0 * kPi / 4,
                    1e-12, "angle(-1,-1)");
  const auto deg = geom::activate_angle(0.0, 0.0);
  check.expect(deg.degenerate && deg.theta == 0.0, "degenerate angle flagged");

  const geom::Mat2 s = geom::similarity_matrix(2.0, kPi / 2);
  check.expect_near(s[0], 0.0, 1e-12, "similarity cos");
  check.expect_near(s[1], 2.0, 1e-12, "similarity sin");
  check.expect_near(s[2], -2.0, 1e-12, "similarity -sin");
  check.expect_near(geom::mat2_det(geom::similarity_matrix(1.7, 0.3)),
                    1.7 * 1.7, 1e-9, "similarity det = scale^2");
}

void check_geom_identity_offsets(Context&, Checker& check) {
  const std::vector<geom::LocalTransform> identities = {
      geom::Similarity{1.0, 0.0}, geom::Affine{1.0, 0.0, 0.0, 0.0, 0.0},
      geom::Homography{}};
  for (const auto& t : identities) {
    const auto offs = geom::offsets_from_transform(t, 3);
    double mx = 0.0;
    for (double v : offs) mx = std::max(mx, std::abs(v));
    check.expect(mx < 1e-12, "identity transform gives zero offsets");
  }
  const auto offs = geom::offsets_from_transform(geom::Similarity{2.0, 0.0}, 3);
  check.expect_near(offs[2 * 8], 1.0, 1e-12, "scale-2 dx at (1,1)");
  check.expect_near(offs[2 * 8 + 1], 1.0, 1e-12, "scale-2 dy at (1,1)");
  // Quarter turn at tap (1, 0): maps to (0, -1), displacement (-1, -1).
  const auto rot = geom::offsets_from_transform(geom::Similarity{1.0, kPi / 2}, 3);
  const int tap_10 = 1 * 3 + 2;  // dy = 0 row, dx = +1
  check.expect_near(rot[2 * tap_10], -1.0, 1e-12, "rotation dx at (1,0)");
  check.expect_near(rot[2 * tap_10 + 1], -1.0, 1e-12, "rotation dy at (1,0)");
}

void check_geom_affine_det(Context&, Checker& check) {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const double r11 = rng.uniform(-0.999, 0.999);
    const double r21 = rng.uniform(-0.999, 0.999);
    const double r22 = rng.uniform(-0.999, 0.999);
    const geom::Mat2 shape = geom::residual_shape_matrix(r11, r21, r22);
    check.expect(std::abs(geom::mat2_det(shape) - 1.0) < 1e-9,
                 "residual shape det = 1");
    const double lam = geom::activate_scale(rng.uniform(-2, 2));
    const double theta = rng.uniform(-kPi, kPi);
    const geom::Mat2 a = geom::affine_matrix(lam, theta, r11, r21, r22);
    check.expect(std::abs(geom::mat2_det(a) - lam * lam) < 1e-9,
                 "affine det = scale^2");
  }
  const geom::Mat2 i = geom::affine_matrix(1.0, 0.0, 0.0, 0.0, 0.0);
  check.expect_near(i[0], 1.0, 1e-12, "identity affine");
  check.expect_near(i[3], 1.0, 1e-12, "identity affine");
  const geom::Mat2 shape = geom::residual_shape_matrix(0.5, -0.3, 0.2);
  check.expect(std::abs(geom::mat2_det(shape) - 1.0) < 1e-9,
               "det of (0.5, -0.3, 0.2) residuals");
}

void check_dcn_equivariance(Context&, Checker& check) {
  Rng rng(47);
  const int h = 14, w = 16, cin = 3, cout = 4, k = 3;
  const dcn::ConvLayer layer = random_layer(rng, k, cin, cout);

  // A fixed spatially-uniform field with fractional offsets.
  dcn::DeformField field{Tensor(h, w, 2 * k * k), Tensor(h, w, k * k, 0.73f)};
  std::vector<float> taps(2 * k * k);
  for (auto& v : taps) v = static_cast<float>(rng.uniform(-0.8, 0.8));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int n = 0; n < 2 * k * k; ++n) field.offsets.at(y, x, n) = taps[n];

  const Tensor base = random_tensor(rng, h, w, cin);
  Tensor shifted(h, w, cin);
  const int dy = 2, dx = 3;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < cin; ++c)
        shifted.at(y, x, c) = base.at((y + dy + h) % h, (x + dx + w) % w, c);

  const Tensor out_base = dcn::deform_conv2d(base, layer, field);
  const Tensor out_shift = dcn::deform_conv2d(shifted, layer, field);
  const int margin = k + 2;
  double mx = 0.0;
  for (int y = margin; y < h - margin; ++y)
    for (int x = margin; x < w - margin; ++x) {
      const int sy = (y + dy + h) % h, sx = (x + dx + w) % w;
      if (sy < margin || sy >= h - margin || sx < margin || sx >= w - margin)
        continue;
      for (int c = 0; c < cout; ++c)
        mx = std::max(mx, std::abs(static_cast<double>(out_shift.at(y, x, c)) -
                                   out_base.at(sy, sx, c)));
    }
  check.expect(mx < 1e-5, "deform conv commutes with integer shifts");
}

void check_net_architecture(Context&, Checker& check) {
  const net::BackboneConfig cfg{dcn::DcnVariant::kFree};

  // Hand-computed parameter count for the declared table (free-form DCN).
  auto conv_params = [](int k, int cin, int cout, bool norm) {
    return static_cast<size_t>(k) * k * cin * cout + cout + (norm ? 2 * cout : 0);
  };
  size_t expected = 0;
  expected += conv_params(3, 1, 32, true);      // conv1
  expected += conv_params(3, 32, 32, true);     // conv2
  expected += conv_params(3, 32, 64, true);     // conv3
  expected += conv_params(3, 64, 64, true);     // conv4
  expected += conv_params(3, 64, 128, true);    // conv5
  expected += conv_params(3, 128, 128, true);   // conv6
  expected += conv_params(3, 128, 128, true);   // conv7
  expected += conv_params(3, 128, 128, false);  // conv8 (raw)
  const size_t pred = static_cast<size_t>(3) * 3 * 128 * 27 + 27;
  expected += 3 * pred;  // offset predictors on conv6..conv8
  check.expect(net::parameter_count(cfg) == expected,
               "parameter count matches the layer table");

  const WeightStore store = seeded_random_weights(5, net::weight_specs(cfg));
  const net::Backbone backbone(cfg, store);

  Rng rng(3);
  const Tensor img = smooth_random_image(rng, 48, 40);
  const Tensor std1 = standardize(Image{img, ""});
  const net::FeatureHierarchy h = backbone.forward(std1);
  check.expect(h.levels.size() == 3, "three taps");
  check.expect(h.levels[0].name == "conv1" && h.levels[0].stride == 1,
               "conv1 tap at stride 1");
  check.expect(h.levels[1].name == "conv3" && h.levels[1].stride == 2,
               "conv3 tap at stride 2");
  check.expect(h.levels[2].name == "conv8" && h.levels[2].stride == 4,
               "conv8 tap at stride 4");
  check.expect(h.conv8().channels() == 128, "conv8 has 128 channels");
  check.expect(h.conv8().height() == 12 && h.conv8().width() == 10,
               "conv8 is 1/4 resolution");

  const net::FeatureHierarchy h2 = backbone.forward(std1);
  check.expect(max_abs_diff(h.conv8(), h2.conv8()) == 0.0,
               "forward is bit-deterministic");
}

void check_net_descriptors(Context&, Checker& check) {
  const net::BackboneConfig cfg{dcn::DcnVariant::kNone};
  const WeightStore store = seeded_random_weights(19, net::weight_specs(cfg));
  const net::Backbone backbone(cfg, store);
  Rng rng(20);
  const Tensor img = smooth_random_image(rng, 64, 64);
  const net::FeatureHierarchy h = backbone.forward(standardize(Image{img, ""}));

  const Tensor dense = net::dense_descriptors(h);
  for (int trial = 0; trial < 10; ++trial) {
    const int y = rng.integer(dense.height());
    const int x = rng.integer(dense.width());
    double norm = 0.0;
    for (int c = 0; c < dense.channels(); ++c)
      norm += static_cast<double>(dense.at(y, x, c)) * dense.at(y, x, c);
    check.expect(std::abs(std::sqrt(norm) - 1.0) < 1e-5,
                 "dense descriptor norms are 1");
  }

  for (int trial = 0; trial < 10; ++trial) {
    const double x = rng.uniform(10, 50), y = rng.uniform(10, 50);
    const auto d = net::sample_descriptor(h, x, y);
    double norm = 0.0;
    for (float v : d) norm += static_cast<double>(v) * v;
    check.expect(std::abs(std::sqrt(norm) - 1.0) < 1e-5,
                 "sampled descriptor norm is 1");

    // Continuity of the raw (pre-normalization) interpolation.
    const int s = h.levels.back().stride;
    const double off = (s - 1) * 0.5;
    double max_delta = 0.0;
    for (int c = 0; c < h.conv8().channels(); ++c) {
      const double v0 =
          bilinear_sample(h.conv8(), (x - off) / s, (y - off) / s, c);
      const double v1 = bilinear_sample(h.conv8(), (x + 1e-3 - off) / s,
                                        (y - off) / s, c);
      max_delta = std::max(max_delta, std::abs(v1 - v0));
    }
    check.expect(max_delta < 1e-2, "descriptor sampling is continuous");
  }

  // A keypoint exactly at a cell center reproduces the dense descriptor.
  const int s = h.levels.back().stride;
  const double cx = s * 5 + (s - 1) * 0.5, cy = s * 6 + (s - 1) * 0.5;
  const auto d = net::sample_descriptor(h, cx, cy);
  const Tensor dense2 = net::dense_descriptors(h);
  double mx = 0.0;
  for (int c = 0; c < dense2.channels(); ++c)
    mx = std::max(mx, std::abs(static_cast<double>(d[c]) - dense2.at(6, 5, c)));
  check.expect(mx < 1e-5, "cell-center sample equals dense descriptor");
}

void check_detect_nms(Context&, Checker& check) {
  Tensor s(7, 7, 1, 0.1f);
  s.at(3, 3, 0) = 1.0f;
  auto mask = detect::nms_mask(s, 3);
  check.expect(mask[3 * 7 + 3] == 1, "spike kept");

  // Constant map: only the lexicographic first of each plateau window; the
  // global corner is the sole survivor.
  Tensor flat(5, 5, 1, 0.5f);
  mask = detect::nms_mask(flat, 3);
  int kept = 0;
  for (uint8_t v : mask) kept += v;
  check.expect(kept == 1 && mask[0] == 1, "plateau keeps lexicographic first");

  Tensor two(5, 5, 1, 0.0f);
  two.at(2, 2, 0) = two.at(2, 3, 0) = 1.0f;
  mask = detect::nms_mask(two, 3);
  kept = 0;
  for (uint8_t v : mask) kept += v;
  check.expect(kept == 1, "adjacent tie keeps exactly one");

  Rng rng(77);
  const Tensor rnd = random_tensor(rng, 24, 24, 1, 0.0, 1.0);
  mask = detect::nms_mask(rnd, 3);
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x)
      if (mask[y * 24 + x]) pts.push_back({y, x});
  bool separated = true;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      separated = separated &&
                  std::max(std::abs(pts[i].first - pts[j].first),
                           std::abs(pts[i].second - pts[j].second)) > 1;
  check.expect(separated, "nms survivors separated by more than the radius");
}

void check_detect_selection(Context&, Checker& check) {
  Rng rng(88);
  Tensor s = random_tensor(rng, 40, 40, 1, 0.3, 1.2);
  detect::DetectorConfig cfg;
  cfg.top_k = 10;
  cfg.border = 3;
  const auto kps = detect::select_keypoints(s, cfg);
  check.expect(kps.size() <= 10, "top-k respected");
  for (size_t i = 0; i + 1 < kps.size(); ++i)
    check.expect(kps[i].score >= kps[i + 1].score, "sorted by score");
  for (const auto& kp : kps) {
    check.expect(kp.score >= cfg.score_min, "threshold respected");
    check.expect(kp.x >= 0 && kp.x < 40 && kp.y >= 0 && kp.y < 40, "in bounds");
  }

  Tensor p(3, 3, 1, 1.0f);
  p.at(1, 1, 0) = 2.0f;  // symmetric [1, 2, 1] both axes
  auto ref = detect::subpixel_refine(p, 1, 1);
  check.expect_near(ref.dx, 0.0, 1e-9, "symmetric profile offset x");
  check.expect_near(ref.dy, 0.0, 1e-9, "symmetric profile offset y");

  Tensor q(3, 3, 1, 0.0f);
  for (int y = 0; y < 3; ++y) {
    q.at(y, 0, 0) = 1.0f;
    q.at(y, 1, 0) = 2.0f;
    q.at(y, 2, 0) = 1.5f;
  }
  ref = detect::subpixel_refine(q, 1, 1);
  check.expect_near(ref.dx, 1.0 / 6.0, 1e-9, "parabola vertex offset");

  Tensor r(3, 3, 1, 0.0f);
  for (int y = 0; y < 3; ++y) {
    r.at(y, 0, 0) = 0.0f;
    r.at(y, 1, 0) = 1.0f;
    r.at(y, 2, 0) = 1.9f;
  }
  ref = detect::subpixel_refine(r, 1, 1);
  check.expect_near(ref.dx, 0.5, 1e-9, "offset clamped to 0.5");

  Tensor low = random_tensor(rng, 20, 20, 1, 0.0, 0.49);
  detect::DetectorConfig strict;
  strict.border = 2;
  check.expect(detect::select_keypoints(low, strict).empty(),
               "sub-threshold map yields nothing");
}

void check_detect_paths_differ(Context&, Checker& check) {
  Rng rng(99);
  const Tensor y = random_tensor(rng, 10, 10, 6, -1.0, 2.0);
  const Tensor a = detect::score_features(y, detect::Scoring::kPeakiness, 1);
  const Tensor b = detect::score_features(y, detect::Scoring::kD2NetRatio, 1);
  std::vector<int> ra(a.size()), rb(b.size());
  for (size_t i = 0; i < a.size(); ++i) ra[i] = rb[i] = static_cast<int>(i);
  std::sort(ra.begin(), ra.end(),
            [&](int i, int j) { return a.data()[i] > a.data()[j]; });
  std::sort(rb.begin(), rb.end(),
            [&](int i, int j) { return b.data()[i] > b.data()[j]; });
  check.expect(ra != rb, "the two scoring paths rank differently");
}

void check_match_oracle(Context&, Checker& check) {
  Rng rng(121);
  for (int trial = 0; trial < 5; ++trial) {
    const int na = 30 + trial * 20, nb = 25 + trial * 25, dim = 16;
    detect::FeatureSet fa, fb;
    fa.desc_dim = fb.desc_dim = dim;
    auto fill = [&](detect::FeatureSet& fs, int n) {
      fs.keypoints.resize(n);
      fs.descriptors.resize(static_cast<size_t>(n) * dim);
      for (int i = 0; i < n; ++i) {
        double norm = 0.0;
        for (int j = 0; j < dim; ++j) {
          fs.desc(i)[j] = static_cast<float>(rng.normal());
          norm += static_cast<double>(fs.desc(i)[j]) * fs.desc(i)[j];
        }
        for (int j = 0; j < dim; ++j)
          fs.desc(i)[j] = static_cast<float>(fs.desc(i)[j] / std::sqrt(norm));
      }
    };
    fill(fa, na);
    fill(fb, nb);

    match::MatchOptions opt;
    opt.ratio = 0.95f;
    opt.mutual = true;
    const match::MatchSet got = match::match_descriptors(fa, fb, opt);

    // Oracle route: distances via the unit-norm dot-product identity.
    auto odist = [&](int i, int j) {
      double dot = 0.0;
      for (int c = 0; c < dim; ++c)
        dot += static_cast<double>(fa.desc(i)[c]) * fb.desc(j)[c];
      return std::sqrt(std::max(0.0, 2.0 - 2.0 * dot));
    };
    auto bdist = [&](int j, int i) { return odist(i, j); };
    std::vector<std::pair<int, int>> expected;
    for (int i = 0; i < na; ++i) {
      int best = -1;
      double d1 = 1e30, d2 = 1e30;
      for (int j = 0; j < nb; ++j) {
        const double d = odist(i, j);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          best = j;
        } else if (d < d2) {
          d2 = d;
        }
      }
      if (!(nb < 2 || d1 < opt.ratio * d2)) continue;
      int back = -1;
      double bb = 1e30;
      for (int ii = 0; ii < na; ++ii)
        if (bdist(best, ii) < bb) {
          bb = bdist(best, ii);
          back = ii;
        }
      if (back == i) expected.push_back({i, best});
    }
    bool same = got.matches.size() == expected.size();
    for (size_t k = 0; k < expected.size() && same; ++k)
      same = got.matches[k].index_a == expected[k].first &&
             got.matches[k].index_b == expected[k].second;
    check.expect(same, "matcher equals the brute-force oracle");
  }

  // Ratio arithmetic: d1 = 0.5, d2 = 0.6 fails at ratio 0.8.
  detect::FeatureSet fa, fb;
  fa.desc_dim = fb.desc_dim = 2;
  fa.keypoints.resize(1);
  fa.descriptors = {1.0f, 0.0f};
  fb.keypoints.resize(2);
  const float c1 = 1.0f - 0.5f * 0.5f / 2.0f;  // dot giving distance 0.5
  const float c2 = 1.0f - 0.6f * 0.6f / 2.0f;
  fb.descriptors = {c1, std::sqrt(1.0f - c1 * c1),
                    c2, -std::sqrt(1.0f - c2 * c2)};
  match::MatchOptions opt;
  opt.ratio = 0.8f;
  opt.mutual = false;
  check.expect(match::match_descriptors(fa, fb, opt).matches.empty(),
               "0.5/0.6 fails the 0.8 ratio test");
  opt.ratio = 0.85f;
  check.expect(match::match_descriptors(fa, fb, opt).matches.size() == 1,
               "0.5/0.6 passes a 0.85 ratio test");
}

void check_match_determinism(Context&, Checker& check) {
  Rng rng(140);
  const loss::SceneOptions sopt{140, 0.12, 4.0, 8.0, 320, 240};
  const loss::CameraPair cam = loss::make_synthetic_camera_pair(sopt);
  std::vector<geom::Vec2> pts;
  for (int y = 20; y < 220; y += 12)
    for (int x = 20; x < 300; x += 12) pts.push_back({double(x), double(y)});
  const loss::CorrespondenceSet corrs = loss::warp_points_depth(pts, cam);

  std::vector<geom::Vec2> pa, pb;
  for (const auto& c : corrs.pairs)
    if (c.valid) {
      pa.push_back(c.a);
      pb.push_back(c.b);
    }
  for (size_t i = 0; i < pa.size(); i += 5) {
    pb[i][0] = rng.uniform(0, 319);
    pb[i][1] = rng.uniform(0, 239);
    if (i + 2 < pa.size()) {
      pb[i + 2][0] = rng.uniform(0, 319);
      pb[i + 2][1] = rng.uniform(0, 239);
    }
  }
  match::RansacOptions opt;
  opt.size_a = cam.size_a;
  opt.size_b = cam.size_b;
  opt.seed = 4;
  const auto r1 = match::estimate_fundamental_ransac(pa, pb, opt);
  const auto r2 = match::estimate_fundamental_ransac(pa, pb, opt);
  check.expect(r1.success && r2.success, "ransac succeeds");
  check.expect(r1.inlier_mask == r2.inlier_mask, "same seed, same inliers");
  bool same_f = true;
  for (int i = 0; i < 9; ++i) same_f = same_f && r1.F[i] == r2.F[i];
  check.expect(same_f, "same seed, same model");

  std::vector<geom::Vec2> seven(pa.begin(), pa.begin() + 7);
  std::vector<geom::Vec2> seven_b(pb.begin(), pb.begin() + 7);
  check.expect(!match::estimate_fundamental_ransac(seven, seven_b, opt).success,
               "7 matches yield a failure result");
}

void check_match_f_recovery(Context&, Checker& check) {
  const loss::SceneOptions sopt{33, 0.1, 4.0, 9.0, 400, 300};
  const loss::CameraPair cam = loss::make_synthetic_camera_pair(sopt);
  const geom::Mat3 f_gt = cam.fundamental();

  std::vector<geom::Vec2> pts;
  for (int y = 15; y < 285; y += 10)
    for (int x = 15; x < 385; x += 10) pts.push_back({double(x), double(y)});
  const loss::CorrespondenceSet corrs = loss::warp_points_depth(pts, cam);
  std::vector<geom::Vec2> pa, pb;
  for (const auto& c : corrs.pairs)
    if (c.valid) {
      pa.push_back(c.a);
      pb.push_back(c.b);
    }
  check.expect(pa.size() >= 100, "enough exact correspondences");

  const geom::Mat3 f_est = match::eight_point(pa, pb);
  auto normed = [](const geom::Mat3& f) {
    double n = 0.0;
    for (double v : f) n += v * v;
    n = std::sqrt(n);
    geom::Mat3 out = f;
    int arg = 0;
    for (int i = 1; i < 9; ++i)
      if (std::abs(f[i]) > std::abs(f[arg])) arg = i;
    const double s = (f[arg] < 0 ? -1.0 : 1.0) * n;
    for (double& v : out) v /= s;
    return out;
  };
  const geom::Mat3 g = normed(f_gt), e = normed(f_est);
  double mx = 0.0;
  for (int i = 0; i < 9; ++i) mx = std::max(mx, std::abs(g[i] - e[i]));
  check.expect(mx < 1e-6, "noiseless 8-point recovers F up to scale");
}

void check_loss_invariants(Context&, Checker& check) {
  Rng rng(150);
  const loss::LossParams params;
  check.expect(params.margin_pos == 0.2 && params.margin_neg == 1.0 &&
                   params.circle_m == 0.1 && params.circle_gamma == 512.0,
               "default margins wired");

  for (int trial = 0; trial < 10; ++trial) {
    LossDraw d = draw_loss_config(rng, 6, 8);
    const auto hc =
        loss::hardest_contrastive(d.a, d.b, d.cells_a, d.cells_b, params);
    const auto cl = loss::circle_loss(d.a, d.b, d.cells_a, d.cells_b, params);
    check.expect(hc.value >= 0.0, "contrastive loss non-negative");
    check.expect(cl.value >= 0.0, "circle loss non-negative");

    // Invariance to a global rotation built from composed Givens transforms.
    LossDraw r = d;
    for (int g = 0; g < 12; ++g) {
      const int i = rng.integer(8), j = (i + 1 + rng.integer(7)) % 8;
      const double ang = rng.uniform(0, kPi);
      const double cs = std::cos(ang), sn = std::sin(ang);
      for (int row = 0; row < 6; ++row) {
        for (auto* set : {&r.a, &r.b}) {
          double* v = set->row(row);
          const double vi = v[i], vj = v[j];
          v[i] = cs * vi - sn * vj;
          v[j] = sn * vi + cs * vj;
        }
      }
    }
    const auto hc_rot =
        loss::hardest_contrastive(r.a, r.b, d.cells_a, d.cells_b, params);
    const auto cl_rot = loss::circle_loss(r.a, r.b, d.cells_a, d.cells_b, params);
    check.expect(std::abs(hc.value - hc_rot.value) < 1e-6,
                 "contrastive rotation invariance");
    check.expect(std::abs(cl.value - cl_rot.value) < 1e-6,
                 "circle rotation invariance");
  }

  // Margins satisfied everywhere -> exactly zero.
  {
    loss::DescSet a = loss::DescSet::zeros(2, 2), b = loss::DescSet::zeros(2, 2);
    a.row(0)[0] = 0.0;
    b.row(0)[0] = 0.1;   // pos 0.1 < 0.2
    a.row(1)[0] = 10.0;
    b.row(1)[0] = 10.1;  // pos 0.1, negatives ~10 > 1.0
    const std::vector<geom::Vec2> ca = {{0, 0}, {50, 0}};
    const std::vector<geom::Vec2> cb = {{0, 0}, {50, 0}};
    const auto res = loss::hardest_contrastive(a, b, ca, cb, loss::LossParams{});
    check.expect(res.value == 0.0, "inactive hinges give exactly zero");
  }

  // Safe radius: pulling the hardest negative inside the radius cannot
  // decrease the reported hardest-negative distance (loss cannot grow).
  {
    loss::DescSet a = loss::DescSet::zeros(3, 2), b = loss::DescSet::zeros(3, 2);
    a.row(0)[0] = 0.0;
    b.row(0)[0] = 0.05;
    a.row(1)[0] = 0.3;  // close in descriptor space: the hardest negative
    b.row(1)[0] = 0.35;
    a.row(2)[0] = 5.0;
    b.row(2)[0] = 5.05;
    std::vector<geom::Vec2> ca = {{0, 0}, {40, 0}, {80, 0}};
    std::vector<geom::Vec2> cb_far = {{0, 0}, {40, 0}, {80, 0}};
    std::vector<geom::Vec2> cb_near = {{0, 0}, {2, 0}, {80, 0}};  // inside radius

    loss::LossParams p;
    const auto far = loss::hardest_contrastive(a, b, ca, cb_far, p);
    const auto near = loss::hardest_contrastive(a, b, ca, cb_near, p);
    check.expect(near.value <= far.value + 1e-12,
                 "safe radius removes the hardest negative");
  }

  // Detection-loss weights sum to 1; value matches a direct recount.
  {
    Rng wrng(7);
    std::vector<double> sa(9), sb(9), m(9);
    for (int i = 0; i < 9; ++i) {
      sa[i] = wrng.uniform(0.1, 2.0);
      sb[i] = wrng.uniform(0.1, 2.0);
      m[i] = wrng.uniform(0.0, 1.5);
    }
    double total = 0.0;
    for (int i = 0; i < 9; ++i) total += sa[i] * sb[i];
    double wsum = 0.0;
    for (int i = 0; i < 9; ++i) wsum += sa[i] * sb[i] / total;
    check.expect(std::abs(wsum - 1.0) < 1e-7, "detection weights sum to 1");

    const auto res = loss::weighted_detection_loss(sa, sb, m);
    double expected = 0.0;
    for (int i = 0; i < 9; ++i) expected += (sa[i] * sb[i] / total) * m[i];
    expected /= 9.0;
    check.expect_near(res.value, expected, 1e-7, "detection loss oracle");

    const auto degenerate =
        loss::weighted_detection_loss({0.0, 0.0}, {0.3, 0.4}, {1.0, 1.0});
    check.expect(degenerate.degenerate, "all-zero products flagged");
  }
}

void check_loss_correspondence(Context&, Checker& check) {
  // Identity pose: p' = p for any depth.
  {
    loss::CameraPair cam;
    cam.size_a = cam.size_b = {64, 64};
    cam.k_a = cam.k_b = {60.0, 0.0, 32.0, 0.0, 60.0, 32.0, 0.0, 0.0, 1.0};
    cam.depth = Tensor(64, 64, 1, 5.0f);
    cam.depth.at(10, 12, 0) = 0.0f;  // one invalid pixel
    const std::vector<geom::Vec2> pts = {{20, 30}, {12, 10}, {40, 40}};
    const auto set = loss::warp_points_depth(pts, cam);
    check.expect(set.pairs[0].valid && set.pairs[2].valid, "identity warps valid");
    check.expect_near(set.pairs[0].b[0], 20.0, 1e-9, "identity x");
    check.expect_near(set.pairs[0].b[1], 30.0, 1e-9, "identity y");
    check.expect(!set.pairs[1].valid, "zero depth flagged invalid");
  }

  // Pure z-translation halving depth doubles centered coordinates.
  {
    loss::CameraPair cam;
    cam.size_a = cam.size_b = {100, 100};
    cam.k_a = cam.k_b = {80.0, 0.0, 50.0, 0.0, 80.0, 50.0, 0.0, 0.0, 1.0};
    cam.translation = {0.0, 0.0, -3.0};  // depth 6 -> 3
    cam.depth = Tensor(100, 100, 1, 6.0f);
    const std::vector<geom::Vec2> pts = {{60, 45}, {52, 58}};
    const auto set = loss::warp_points_depth(pts, cam);
    for (size_t i = 0; i < pts.size(); ++i) {
      check.expect(set.pairs[i].valid, "z-translation warp valid");
      check.expect_near(set.pairs[i].b[0] - 50.0, 2.0 * (pts[i][0] - 50.0),
                        1e-9, "radial doubling x");
      check.expect_near(set.pairs[i].b[1] - 50.0, 2.0 * (pts[i][1] - 50.0),
                        1e-9, "radial doubling y");
    }
  }

  // Homography warp path and its round trip.
  {
    Rng rng(9);
    geom::Mat3 h = {1.05, 0.02, 3.0, -0.01, 0.98, -2.0, 1e-4, -5e-5, 1.0};
    std::vector<geom::Vec2> pts;
    for (int i = 0; i < 100; ++i)
      pts.push_back({rng.uniform(10, 300), rng.uniform(10, 200)});
    const auto fwd = loss::warp_points_homography(pts, h, {340, 240});
    const geom::Mat3 hinv = geom::mat3_inverse(h);
    int valid = 0;
    double mx = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!fwd.pairs[i].valid) continue;
      ++valid;
      const auto back = match::warp_homography(fwd.pairs[i].b, hinv);
      mx = std::max(mx, std::max(std::abs((*back)[0] - pts[i][0]),
                                 std::abs((*back)[1] - pts[i][1])));
    }
    check.expect(valid > 90, "most homography warps valid");
    check.expect(mx < 1e-9, "homography round trip exact");
  }

  // Batch bounds: 32 minimum, 512 cap.
  {
    loss::CorrespondenceSet set;
    set.pairs.resize(1000);
    for (int i = 0; i < 600; ++i) set.pairs[i].valid = true;
    check.expect(set.eligible_for_loss(), "600 valid pairs eligible");
    check.expect(set.loss_batch().size() == 512, "batch capped at 512");
    loss::CorrespondenceSet small;
    small.pairs.resize(40);
    for (int i = 0; i < 31; ++i) small.pairs[i].valid = true;
    check.expect(!small.eligible_for_loss(), "31 valid pairs not eligible");
  }
}

// ---------------------------------------------------------------------------
// Acceptance criteria.

void check_acc_dcn_reduction(Context&, Checker& check) {
  Rng rng(201);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 6 + rng.integer(6), w = 6 + rng.integer(6);
    const int cin = 1 + rng.integer(4), cout = 1 + rng.integer(5);
    const dcn::ConvLayer layer = random_layer(rng, 3, cin, cout);
    const Tensor x = random_tensor(rng, h, w, cin);

    dcn::DeformField field{Tensor(h, w, 18, 0.0f), Tensor(h, w, 9, 0.5f)};
    const Tensor deform = dcn::deform_conv2d(x, layer, field);
    const Tensor plain = dcn::conv2d(x, layer);
    for (size_t i = 0; i < deform.size(); ++i) {
      const double want = 0.5 * plain.data()[i];
      const double got = deform.data()[i];
      const double rel = std::abs(got - want) / std::max(1e-20, std::abs(want));
      worst = std::max(worst, rel);
    }
  }
  check.expect(worst < 1e-5, "zero offsets + 0.5 modulation = half the conv");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e over 50 draws", worst);
  check.note(buf);
}

void check_acc_dlt_roundtrip(Context&, Checker& check) {
  Rng rng(202);
  int done = 0;
  double worst = 0.0;
  while (done < 200) {
    geom::Mat3 h0 = {1.0 + rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35), 0.0,
                     rng.uniform(-0.35, 0.35), 1.0 + rng.uniform(-0.35, 0.35), 0.0,
                     rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), 1.0};
    std::array<double, 8> offsets{};
    bool usable = true;
    for (int i = 0; i < 4 && usable; ++i) {
      const auto img = match::warp_homography(
          {geom::kDltCorners[i][0], geom::kDltCorners[i][1]}, h0);
      usable = img.has_value() && std::abs((*img)[0]) < 2.0 &&
               std::abs((*img)[1]) < 2.0;
      if (usable) {
        offsets[2 * i] = (*img)[0] - geom::kDltCorners[i][0];
        offsets[2 * i + 1] = (*img)[1] - geom::kDltCorners[i][1];
      }
    }
    if (!usable) continue;
    geom::Mat3 solved;
    try {
      solved = geom::dlt_solve(offsets);
    } catch (const Error&) {
      continue;  // drew a near-collinear configuration
    }
    ++done;
    for (int i = 0; i < 9; ++i)
      worst = std::max(worst, std::abs(solved[i] - h0[i]));
  }
  check.expect(worst < 1e-6, "200 homographies recovered entrywise");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max entry err %.2e", worst);
  check.note(buf);

  // Halfway-to-origin fixed point.
  std::array<double, 8> half{};
  for (int i = 0; i < 4; ++i) {
    half[2 * i] = -0.5 * geom::kDltCorners[i][0];
    half[2 * i + 1] = -0.5 * geom::kDltCorners[i][1];
  }
  const geom::Mat3 hhalf = geom::dlt_solve(half);
  check.expect_near(hhalf[0], 0.5, 1e-9, "halfway h11");
  check.expect_near(hhalf[4], 0.5, 1e-9, "halfway h22");
  check.expect_near(hhalf[6], 0.0, 1e-9, "halfway h31");

  // Collinear targets rejected with the declared error.
  std::array<double, 8> collinear{};
  collinear[1] = 1.0;   // (-1,-1) -> (-1, 0)
  collinear[3] = 1.0;   // (1,-1) -> (1, 0)
  collinear[5] = -1.0;  // (1,1) -> (1, 0): duplicate target, singular
  check.expect(expect_error(ErrorKind::kNumeric,
                            [&] { geom::dlt_solve(collinear); }),
               "collinear configuration rejected");

  // Identity offsets give the identity homography.
  const geom::Mat3 ident = geom::dlt_solve({});
  double mx = 0.0;
  const geom::Mat3 eye = geom::mat3_identity();
  for (int i = 0; i < 9; ++i) mx = std::max(mx, std::abs(ident[i] - eye[i]));
  check.expect(mx < 1e-12, "zero offsets give identity");
}

void check_acc_gradient_suite(Context& ctx, Checker& check) {
  Rng rng(203);
  const loss::GradCheckOptions opts = grad_opts();

  // -- similarity matrix w.r.t. (scale, angle), 100 points --
  for (int t = 0; t < 100; ++t) {
    const double lam = geom::activate_scale(rng.uniform(-1.5, 1.5));
    const double theta = rng.uniform(-3.0, 3.0);
    const auto jac = geom::similarity_jacobian(lam, theta);
    std::vector<std::vector<double>> j(4, std::vector<double>(2));
    for (int e = 0; e < 4; ++e) {
      j[e][0] = jac[0][e];
      j[e][1] = jac[1][e];
    }
    run_gradcheck(check, loss::gradcheck_jacobian(
                             "grad.similarity",
                             [](const std::vector<double>& x) {
                               const auto m = geom::similarity_matrix(x[0], x[1]);
                               return std::vector<double>(m.begin(), m.end());
                             },
                             {lam, theta}, j, opts));
    if (!check.ok()) return;
  }

  // -- affine matrix w.r.t. (scale, angle, r11, r21, r22) --
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> x = {geom::activate_scale(rng.uniform(-1.5, 1.5)),
                                   rng.uniform(-3.0, 3.0),
                                   rng.uniform(-0.9, 0.9),
                                   rng.uniform(-0.9, 0.9),
                                   rng.uniform(-0.9, 0.9)};
    const auto jac = geom::affine_jacobian(x[0], x[1], x[2], x[3], x[4]);
    std::vector<std::vector<double>> j(4, std::vector<double>(5));
    for (int e = 0; e < 4; ++e)
      for (int p = 0; p < 5; ++p) j[e][p] = jac[p][e];
    run_gradcheck(check, loss::gradcheck_jacobian(
                             "grad.affine",
                             [](const std::vector<double>& v) {
                               const auto m = geom::affine_matrix(v[0], v[1], v[2],
                                                                  v[3], v[4]);
                               return std::vector<double>(m.begin(), m.end());
                             },
                             x, j, opts));
    if (!check.ok()) return;
  }

  // -- DLT solve w.r.t. the 8 corner offsets --
  auto dlt_fn = [](const std::vector<double>& x) {
    return dlt_reduced(geom::dlt_solve(to_offsets(x)));
  };
  auto dlt_jac = [&ctx](const std::vector<double>& x) {
    const auto j = geom::dlt_solve_jacobian(to_offsets(x));
    std::vector<std::vector<double>> out(6, std::vector<double>(8));
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 8; ++c) out[r][c] = j[r][c];
    if (ctx.options->inject_dlt_jacobian_fault) out[0][0] += 1e-2;  // test hook
    return out;
  };
  {
    loss::GradCheckOptions tight = opts;
    tight.tol = 1e-6;
    const std::vector<double> zero(8, 0.0);
    run_gradcheck(check, loss::gradcheck_jacobian("grad.dlt@0", dlt_fn, zero,
                                                  dlt_jac(zero), tight));
  }
  for (int t = 0; t < 100 && check.ok(); ++t) {
    std::vector<double> x(8);
    for (double& v : x) v = rng.uniform(-0.55, 0.55);
    try {
      geom::dlt_solve(to_offsets(x));
    } catch (const Error&) {
      --t;
      continue;
    }
    run_gradcheck(check,
                  loss::gradcheck_jacobian("grad.dlt", dlt_fn, x, dlt_jac(x), opts));
  }
  if (!check.ok()) return;

  // -- offset generation w.r.t. transform parameters --
  for (int t = 0; t < 100; ++t) {
    const double lam = geom::activate_scale(rng.uniform(-1.5, 1.5));
    const double theta = rng.uniform(-3.0, 3.0);
    run_gradcheck(
        check,
        loss::gradcheck_jacobian(
            "grad.offsets-similarity",
            [](const std::vector<double>& v) {
              return geom::offsets_from_transform(geom::Similarity{v[0], v[1]}, 3);
            },
            {lam, theta},
            geom::offsets_jacobian(geom::Similarity{lam, theta}, 3), opts));
    if (!check.ok()) return;
  }
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> x = {geom::activate_scale(rng.uniform(-1.5, 1.5)),
                                   rng.uniform(-3.0, 3.0),
                                   rng.uniform(-0.9, 0.9),
                                   rng.uniform(-0.9, 0.9),
                                   rng.uniform(-0.9, 0.9)};
    run_gradcheck(
        check,
        loss::gradcheck_jacobian(
            "grad.offsets-affine",
            [](const std::vector<double>& v) {
              return geom::offsets_from_transform(
                  geom::Affine{v[0], v[1], v[2], v[3], v[4]}, 3);
            },
            x,
            geom::offsets_jacobian(geom::Affine{x[0], x[1], x[2], x[3], x[4]}, 3),
            opts));
    if (!check.ok()) return;
  }
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(8);
    for (double& v : x) v = rng.uniform(-0.5, 0.5);
    geom::Homography hg;
    hg.corner_offsets = to_offsets(x);
    try {
      geom::offsets_from_transform(hg, 3);
    } catch (const Error&) {
      --t;
      continue;
    }
    run_gradcheck(check,
                  loss::gradcheck_jacobian(
                      "grad.offsets-homography",
                      [](const std::vector<double>& v) {
                        geom::Homography h;
                        h.corner_offsets = to_offsets(v);
                        return geom::offsets_from_transform(h, 3);
                      },
                      x, geom::offsets_jacobian(hg, 3), opts));
    if (!check.ok()) return;
  }

  // -- peakiness scores via randomized adjoints --
  for (int t = 0; t < 100; ++t) {
    const int hgt = 5, wid = 5, ch = 3;
    const DTensor y = random_dtensor(rng, hgt, wid, ch);
    const DTensor up = random_dtensor(rng, hgt, wid, ch);
    const int dil = 1 + (t % 2);

    auto pack = [](const DTensor& t2) {
      return std::vector<double>(t2.values());
    };
    auto unpack = [&](const std::vector<double>& x) {
      return DTensor::from_data(hgt, wid, ch, x);
    };
    auto weighted_sum = [&](const DTensor& m) {
      double s = 0.0;
      for (size_t i = 0; i < m.size(); ++i) s += m.data()[i] * up.data()[i];
      return s;
    };

    const DTensor ga = detect::peakiness_alpha_vjp(y, dil, up);
    run_gradcheck(check, loss::gradcheck_scalar(
                             "grad.peakiness-alpha",
                             [&](const std::vector<double>& x) {
                               return weighted_sum(
                                   detect::peakiness_alpha(unpack(x), dil));
                             },
                             pack(y), pack(ga), opts));
    if (!check.ok()) return;

    const DTensor gb = detect::peakiness_beta_vjp(y, up);
    run_gradcheck(check, loss::gradcheck_scalar(
                             "grad.peakiness-beta",
                             [&](const std::vector<double>& x) {
                               return weighted_sum(
                                   detect::peakiness_beta(unpack(x)));
                             },
                             pack(y), pack(gb), opts));
    if (!check.ok()) return;
  }

  // -- losses w.r.t. descriptor entries --
  const loss::LossParams params;
  int done = 0;
  while (done < 100) {
    LossDraw d = draw_loss_config(rng, 5, 6);
    if (loss::hardest_contrastive_kink_margin(d.a, d.b, d.cells_a, d.cells_b,
                                              params) < 1e-3 ||
        loss::circle_kink_margin(d.a, d.b, d.cells_a, d.cells_b, params) < 1e-3)
      continue;
    ++done;

    const size_t na = d.a.v.size();
    auto split = [&](const std::vector<double>& x, loss::DescSet* a2,
                     loss::DescSet* b2) {
      *a2 = d.a;
      *b2 = d.b;
      std::copy(x.begin(), x.begin() + na, a2->v.begin());
      std::copy(x.begin() + na, x.end(), b2->v.begin());
    };
    std::vector<double> x0(d.a.v);
    x0.insert(x0.end(), d.b.v.begin(), d.b.v.end());

    {
      std::vector<double> ga, gb;
      loss::hardest_contrastive_grad(d.a, d.b, d.cells_a, d.cells_b, params,
                                     &ga, &gb);
      std::vector<double> full(ga);
      full.insert(full.end(), gb.begin(), gb.end());
      run_gradcheck(check, loss::gradcheck_scalar(
                               "grad.hardest-contrastive",
                               [&](const std::vector<double>& x) {
                                 loss::DescSet a2, b2;
                                 split(x, &a2, &b2);
                                 return loss::hardest_contrastive(
                                            a2, b2, d.cells_a, d.cells_b, params)
                                     .value;
                               },
                               x0, full, opts));
      if (!check.ok()) return;
    }
    {
      std::vector<double> ga, gb;
      loss::circle_loss_grad(d.a, d.b, d.cells_a, d.cells_b, params, &ga, &gb);
      std::vector<double> full(ga);
      full.insert(full.end(), gb.begin(), gb.end());
      run_gradcheck(check, loss::gradcheck_scalar(
                               "grad.circle-loss",
                               [&](const std::vector<double>& x) {
                                 loss::DescSet a2, b2;
                                 split(x, &a2, &b2);
                                 return loss::circle_loss(a2, b2, d.cells_a,
                                                          d.cells_b, params)
                                     .value;
                               },
                               x0, full, opts));
      if (!check.ok()) return;
    }
  }

  // -- detection-weighted loss --
  for (int t = 0; t < 100; ++t) {
    const int n = 6;
    std::vector<double> sa(n), sb(n), m(n);
    for (int i = 0; i < n; ++i) {
      sa[i] = rng.uniform(0.2, 2.0);
      sb[i] = rng.uniform(0.2, 2.0);
      m[i] = rng.uniform(0.0, 1.5);
    }
    std::vector<double> gsa, gsb, gm;
    loss::weighted_detection_loss_grad(sa, sb, m, &gsa, &gsb, &gm);
    std::vector<double> x0(sa);
    x0.insert(x0.end(), sb.begin(), sb.end());
    x0.insert(x0.end(), m.begin(), m.end());
    std::vector<double> full(gsa);
    full.insert(full.end(), gsb.begin(), gsb.end());
    full.insert(full.end(), gm.begin(), gm.end());
    run_gradcheck(check, loss::gradcheck_scalar(
                             "grad.detection-weighted",
                             [n](const std::vector<double>& x) {
                               const std::vector<double> a(x.begin(), x.begin() + n);
                               const std::vector<double> b(x.begin() + n,
                                                           x.begin() + 2 * n);
                               const std::vector<double> mm(x.begin() + 2 * n,
                                                            x.end());
                               return loss::weighted_detection_loss(a, b, mm).value;
                             },
                             x0, full, opts));
    if (!check.ok()) return;
  }

  // -- deformable-conv output w.r.t. the sampling offsets (64-bit path) --
  for (int t = 0; t < 100; ++t) {
    const int h = 7, w = 7, cin = 2, cout = 2, k = 3;
    dcn::ConvLayerT<double> layer;
    layer.kernel = dcn::KernelT<double>::zeros(k, cin, cout);
    for (double& v : layer.kernel.w) v = rng.normal() * 0.4;
    layer.bias.assign(cout, 0.0);

    DTensor x = random_dtensor(rng, h, w, cin);
    dcn::DeformFieldT<double> field{DTensor(h, w, 2 * k * k),
                                    DTensor(h, w, k * k)};
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        for (int n = 0; n < 2 * k * k; ++n) {
          // Fractional parts kept away from the integer lattice.
          const double frac = rng.uniform(0.15, 0.85);
          field.offsets.at(y, xx, n) =
              (rng.integer(2) ? 1.0 : -1.0) * (rng.integer(2) + frac);
        }
        for (int n = 0; n < k * k; ++n)
          field.modulation.at(y, xx, n) = rng.uniform(0.2, 0.9);
      }

    const int oy = 2 + rng.integer(3), ox = 2 + rng.integer(3);
    const int co = rng.integer(cout);
    const auto analytic =
        dcn::deform_output_offset_grad(x, layer, field, oy, ox, co);

    std::vector<double> x0(2 * k * k);
    for (int n = 0; n < 2 * k * k; ++n) x0[n] = field.offsets.at(oy, ox, n);
    run_gradcheck(check,
                  loss::gradcheck_scalar(
                      "grad.dcn-offsets",
                      [&](const std::vector<double>& v) {
                        dcn::DeformFieldT<double> f2 = field;
                        for (int n = 0; n < 2 * k * k; ++n)
                          f2.offsets.at(oy, ox, n) = v[n];
                        return static_cast<double>(
                            dcn::deform_conv2d(x, layer, f2).at(oy, ox, co));
                      },
                      x0, analytic, opts));
    if (!check.ok()) return;
  }

  // The at-the-margin configuration must be flagged, not silently checked.
  {
    loss::DescSet a = loss::DescSet::zeros(2, 2), b = loss::DescSet::zeros(2, 2);
    a.row(0)[0] = 0.0;
    b.row(0)[0] = 0.2;  // exactly margin_pos
    a.row(1)[0] = 3.0;
    b.row(1)[0] = 3.1;
    const std::vector<geom::Vec2> ca = {{0, 0}, {50, 0}};
    const std::vector<geom::Vec2> cb = {{0, 0}, {50, 0}};
    const double margin =
        loss::hardest_contrastive_kink_margin(a, b, ca, cb, params);
    check.expect(margin < 1e-9, "margin configuration detected as non-smooth");
  }
}

void check_acc_scoring_oracles(Context&, Checker& check) {
  Rng rng(204);
  double worst = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const Tensor y = random_tensor(rng, 8, 8, 4, -1.5, 1.5);
    const int dil = 1 + trial % 3;

    worst = std::max(worst, max_abs_diff(detect::peakiness_alpha(y, dil),
                                         oracle_peakiness_alpha(y, dil)));
    worst = std::max(worst, max_abs_diff(detect::peakiness_beta(y),
                                         oracle_peakiness_beta(y)));
    worst = std::max(worst, max_abs_diff(detect::d2_local_score(y, dil),
                                         oracle_d2_alpha(y, dil)));
    worst = std::max(worst, max_abs_diff(detect::d2_channel_score(y),
                                         oracle_d2_beta(y)));
    worst = std::max(
        worst, max_abs_diff(
                   detect::combine_scores(detect::peakiness_alpha(y, dil),
                                          detect::peakiness_beta(y)),
                   oracle_combine(oracle_peakiness_alpha(y, dil),
                                  oracle_peakiness_beta(y))));

    std::vector<Tensor> maps = {
        detect::score_features(y, detect::Scoring::kPeakiness, 1),
        detect::score_features(y, detect::Scoring::kPeakiness, 2),
        detect::score_features(y, detect::Scoring::kPeakiness, 3)};
    const std::vector<float> w = {1.0f, 2.0f, 3.0f};
    const Tensor fused = detect::muldet_fuse(maps, w);
    Tensor fused_oracle(8, 8, 1);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        fused_oracle.at(i, j, 0) =
            (1.0f * maps[0].at(i, j, 0) + 2.0f * maps[1].at(i, j, 0) +
             3.0f * maps[2].at(i, j, 0)) /
            6.0f;
    worst = std::max(worst, max_abs_diff(fused, fused_oracle));
  }
  check.expect(worst < 1e-6, "scoring equals the naive loop oracles");

  // Constant-input fixed points.
  const Tensor flat(6, 6, 4, 0.37f);
  const double ln2 = std::log(2.0);
  const Tensor alpha = detect::peakiness_alpha(flat, 1);
  const Tensor beta = detect::peakiness_beta(flat);
  const Tensor s = detect::combine_scores(alpha, beta);
  check.expect_near(alpha.at(3, 3, 1), ln2, 1e-6, "constant alpha = ln 2");
  check.expect_near(beta.at(2, 4, 2), ln2, 1e-6, "constant beta = ln 2");
  check.expect_near(s.at(3, 3, 0), ln2 * ln2, 1e-6, "constant score = (ln 2)^2");
  check.expect(s.at(3, 3, 0) < 0.5f,
               "uniform regions fall below the keep threshold");

  const Tensor d2a = detect::d2_local_score(flat, 1);
  check.expect_near(d2a.at(3, 3, 0), 1.0 / 9.0, 1e-7, "constant local score 1/9");
  Tensor spike(7, 7, 1, 0.0f);
  spike.at(3, 3, 0) = 50.0f;
  check.expect(detect::d2_local_score(spike, 1).at(3, 3, 0) > 0.999f,
               "softmax saturates on a spike");
  Tensor two_ch(1, 1, 2);
  two_ch.at(0, 0, 0) = 2.0f;
  two_ch.at(0, 0, 1) = 1.0f;
  const Tensor ratio = detect::d2_channel_score(two_ch);
  check.expect_near(ratio.at(0, 0, 0), 1.0, 1e-7, "ratio-to-max top channel");
  check.expect_near(ratio.at(0, 0, 1), 0.5, 1e-7, "ratio-to-max other channel");
  two_ch.at(0, 0, 0) = 1.0f;
  two_ch.at(0, 0, 1) = -1.0f;
  const Tensor ratio2 = detect::d2_channel_score(two_ch);
  check.expect_near(ratio2.at(0, 0, 1), -1.0, 1e-7, "negative ratio preserved");

  const Tensor merged =
      detect::innetwork_multiscale(flat, detect::Scoring::kPeakiness);
  check.expect_near(merged.at(3, 3, 0), ln2 * ln2, 1e-5,
                    "in-network constant fixed point");
  const Tensor single =
      detect::innetwork_multiscale(flat, detect::Scoring::kPeakiness, 1);
  check.expect_near(
      single.at(2, 2, 0),
      detect::score_features(flat, detect::Scoring::kPeakiness, 1).at(2, 2, 0),
      1e-7, "single-scale merge degenerates to plain scoring");

  // In-network merge stays inside the per-scale envelope.
  {
    const Tensor feats = random_tensor(rng, 10, 10, 4, -1.0, 1.0);
    const Tensor m = detect::innetwork_multiscale(feats, detect::Scoring::kPeakiness);
    check.expect(m.all_finite(), "in-network merge finite");
  }

  // Peakiness 2-channel frozen values.
  Tensor pk(1, 1, 2);
  pk.at(0, 0, 0) = 1.0f;
  pk.at(0, 0, 1) = -1.0f;
  const Tensor b2 = detect::peakiness_beta(pk);
  check.expect_near(b2.at(0, 0, 0), 1.3132617, 1e-6, "softplus(1)");
  check.expect_near(b2.at(0, 0, 1), 0.3132617, 1e-6, "softplus(-1)");
}

void check_acc_detection_covariance(Context&, Checker& check) {
  Rng rng(205);
  const int h = 200, w = 200, shift = 8;
  const Tensor base = smooth_random_image(rng, h, w);
  Tensor shifted(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      shifted.at(y, x, 0) = base.at((y + shift) % h, (x + shift) % w, 0);

  pipeline::ExtractorConfig cfg;
  cfg.backbone.variant = dcn::DcnVariant::kFree;
  cfg.detector.top_k = 3000;
  const pipeline::Extractor extractor =
      pipeline::Extractor::with_seeded_weights(cfg, 42);

  const detect::FeatureSet fa = extractor.extract_gray(base);
  const detect::FeatureSet fb = extractor.extract_gray(shifted);

  const double margin = 48.0;
  int interior = 0, moved = 0;
  for (const auto& kp : fa.keypoints) {
    // The shifted image holds base content displaced by (-8, -8).
    const double bx = kp.x - shift, by = kp.y - shift;
    if (kp.x < margin || kp.y < margin || kp.x >= w - margin ||
        kp.y >= h - margin || bx < margin || by < margin)
      continue;
    ++interior;
    double best = 1e30;
    for (const auto& kb : fb.keypoints)
      best = std::min(best, std::max(std::abs(kb.x - bx), std::abs(kb.y - by)));
    if (best <= 0.25) ++moved;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d/%d interior keypoints moved by (8,8)",
                moved, interior);
  check.note(buf);
  check.expect(interior >= 20, "enough interior keypoints to measure");
  check.expect(moved >= static_cast<int>(std::ceil(0.95 * interior)),
               "95% of interior keypoints track the shift");
}

void check_acc_edge_rule(Context&, Checker& check) {
  check.expect_near((10.0 + 1.0) * (10.0 + 1.0) / 10.0, 12.1, 1e-12,
                    "edge limit constant");

  auto patch_from_hessian = [](double dxx, double dyy) {
    Tensor s(3, 3, 1);
    for (int y = -1; y <= 1; ++y)
      for (int x = -1; x <= 1; ++x)
        s.at(y + 1, x + 1, 0) =
            static_cast<float>(5.0 + 0.5 * (dxx * x * x + dyy * y * y));
    return s;
  };

  const Tensor keep = patch_from_hessian(-2.0, -2.0);
  check.expect(detect::edge_keep(keep, 1, 1, 10.0f),
               "isotropic peak kept (ratio 4 < 12.1)");

  const Tensor ridge = patch_from_hessian(-10.0, -0.1);
  check.expect(!detect::edge_keep(ridge, 1, 1, 10.0f),
               "ridge rejected (ratio 102.01)");

  const Tensor saddle = patch_from_hessian(-2.0, 2.0);
  check.expect(!detect::edge_keep(saddle, 1, 1, 10.0f), "saddle rejected");
}

void check_acc_matching_loop(Context&, Checker& check) {
  Rng rng(207);
  match::HomographyGT gt;
  gt.size_a = {320, 240};
  gt.size_b = {320, 240};
  gt.H = {1.02, 0.03, 4.0, -0.015, 0.985, -3.0, 2e-5, -1.5e-5, 1.0};

  // Inject exact features: identical descriptors at exact correspondences.
  const int n = 200, dim = 32;
  detect::FeatureSet fa, fb;
  fa.desc_dim = fb.desc_dim = dim;
  fa.image_width = gt.size_a.width;
  fa.image_height = gt.size_a.height;
  fb.image_width = gt.size_b.width;
  fb.image_height = gt.size_b.height;
  while (static_cast<int>(fa.count()) < n) {
    const geom::Vec2 p = {rng.uniform(5, 314), rng.uniform(5, 234)};
    const auto q = match::warp_homography(p, gt.H);
    if (!q || (*q)[0] < 0 || (*q)[0] > 319 || (*q)[1] < 0 || (*q)[1] > 239)
      continue;
    detect::Keypoint ka, kb;
    ka.x = static_cast<float>(p[0]);
    ka.y = static_cast<float>(p[1]);
    kb.x = static_cast<float>((*q)[0]);
    kb.y = static_cast<float>((*q)[1]);
    ka.score = kb.score = 1.0f;
    fa.keypoints.push_back(ka);
    fb.keypoints.push_back(kb);
    std::vector<float> desc(dim);
    double norm = 0.0;
    for (int j = 0; j < dim; ++j) {
      desc[j] = static_cast<float>(rng.normal());
      norm += static_cast<double>(desc[j]) * desc[j];
    }
    for (int j = 0; j < dim; ++j)
      desc[j] = static_cast<float>(desc[j] / std::sqrt(norm));
    fa.descriptors.insert(fa.descriptors.end(), desc.begin(), desc.end());
    fb.descriptors.insert(fb.descriptors.end(), desc.begin(), desc.end());
  }

  const match::MatchSet ms = match::match_descriptors(fa, fb, {});
  check.expect(static_cast<int>(ms.matches.size()) == n, "all pairs matched");

  const auto rep = match::repeatability(fa.keypoints, fb.keypoints, gt, 3.0);
  const auto mm = match::match_metrics(ms, fa.keypoints, fb.keypoints, gt, 3.0);
  check.expect(rep && *rep == 100.0, "repeatability exactly 100");
  check.expect(mm.matching_score && *mm.matching_score == 100.0,
               "matching score exactly 100");
  check.expect(mm.mma && *mm.mma == 100.0, "MMA@3 exactly 100");

  // Brute-force metric oracle on this instance (independent recount).
  {
    const geom::Mat3 hinv = geom::mat3_inverse(gt.H);
    int shared_a = 0, shared_b = 0, cov_a = 0, cov_b = 0;
    for (int i = 0; i < n; ++i) {
      const auto wa =
          match::warp_homography({fa.keypoints[i].x, fa.keypoints[i].y}, gt.H);
      if (wa && (*wa)[0] >= 0 && (*wa)[0] <= 319 && (*wa)[1] >= 0 &&
          (*wa)[1] <= 239) {
        ++shared_a;
        for (int j = 0; j < n; ++j) {
          const double dx = (*wa)[0] - fb.keypoints[j].x;
          const double dy = (*wa)[1] - fb.keypoints[j].y;
          if (dx * dx + dy * dy < 9.0) {
            ++cov_a;
            break;
          }
        }
      }
      const auto wb =
          match::warp_homography({fb.keypoints[i].x, fb.keypoints[i].y}, hinv);
      if (wb && (*wb)[0] >= 0 && (*wb)[0] <= 319 && (*wb)[1] >= 0 &&
          (*wb)[1] <= 239) {
        ++shared_b;
        for (int j = 0; j < n; ++j) {
          const double dx = (*wb)[0] - fa.keypoints[j].x;
          const double dy = (*wb)[1] - fa.keypoints[j].y;
          if (dx * dx + dy * dy < 9.0) {
            ++cov_b;
            break;
          }
        }
      }
    }
    const double oracle_rep =
        100.0 * 0.5 * (cov_a + cov_b) / std::min(shared_a, shared_b);
    check.expect_near(*rep, oracle_rep, 1e-9, "repeatability oracle recount");
  }

  // Permutation invariance of the metrics.
  {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.integer(i + 1)]);
    detect::FeatureSet fb_perm = fb;
    for (int i = 0; i < n; ++i) {
      fb_perm.keypoints[i] = fb.keypoints[perm[i]];
      std::copy(fb.desc(perm[i]), fb.desc(perm[i]) + dim, fb_perm.desc(i));
    }
    const match::MatchSet ms2 = match::match_descriptors(fa, fb_perm, {});
    const auto rep2 =
        match::repeatability(fa.keypoints, fb_perm.keypoints, gt, 3.0);
    const auto mm2 =
        match::match_metrics(ms2, fa.keypoints, fb_perm.keypoints, gt, 3.0);
    check.expect(rep2 && std::abs(*rep2 - *rep) < 1e-9,
                 "repeatability permutation-invariant");
    check.expect(mm2.mma && std::abs(*mm2.mma - *mm.mma) < 1e-9,
                 "MMA permutation-invariant");
  }

  // A 2.5 px systematic error flips between thresholds 2 and 3.
  {
    detect::FeatureSet fb_off = fb;
    for (auto& kp : fb_off.keypoints) kp.x += 2.5f;
    const match::MatchSet ms3 = match::match_descriptors(fa, fb_off, {});
    const auto below =
        match::match_metrics(ms3, fa.keypoints, fb_off.keypoints, gt, 2.0);
    const auto above =
        match::match_metrics(ms3, fa.keypoints, fb_off.keypoints, gt, 3.0);
    check.expect(below.correct == 0, "0% below the 2.5 px error");
    check.expect(above.correct == static_cast<int>(ms3.matches.size()),
                 "100% at 3 px threshold");
  }

  // Monotone MMA curve on random (imperfect) data.
  {
    detect::FeatureSet fr = fb;
    for (auto& kp : fr.keypoints) {
      kp.x += static_cast<float>(rng.uniform(-6, 6));
      kp.y += static_cast<float>(rng.uniform(-6, 6));
    }
    const match::MatchSet msr = match::match_descriptors(fa, fr, {});
    const auto curve = match::mma_curve(msr, fa.keypoints, fr.keypoints, gt);
    for (int t = 0; t + 1 < 10; ++t)
      if (curve[t] && curve[t + 1])
        check.expect(*curve[t] <= *curve[t + 1] + 1e-9, "MMA curve monotone");
  }
}

void check_acc_epipolar_loop(Context&, Checker& check) {
  std::vector<match::PairRecallInput> recall_pairs;
  for (uint64_t scene = 0; scene < 3; ++scene) {
    Rng rng(208 + scene);
    const loss::SceneOptions sopt{300 + scene, 0.12, 4.0, 8.0, 480, 360};
    const loss::CameraPair cam = loss::make_synthetic_camera_pair(sopt);
    const geom::Mat3 f_gt = cam.fundamental();

    std::vector<geom::Vec2> pts;
    for (int y = 14; y < 350; y += 9)
      for (int x = 14; x < 470; x += 9) pts.push_back({double(x), double(y)});
    const loss::CorrespondenceSet corrs = loss::warp_points_depth(pts, cam);

    std::vector<geom::Vec2> pa, pb;
    for (const auto& c : corrs.pairs)
      if (c.valid) {
        pa.push_back(c.a);
        pb.push_back(c.b);
      }
    check.expect(pa.size() >= 150, "enough valid correspondences");
    if (pa.size() < 150) return;

    std::vector<std::pair<geom::Vec2, geom::Vec2>> exact;
    for (size_t i = 0; i < pa.size(); ++i) exact.push_back({pa[i], pb[i]});
    const double sed = match::mean_sed(exact, f_gt, cam.size_a, cam.size_b);
    check.expect(sed < 1e-10, "mean SED of exact correspondences < 1e-10");

    // 60% outliers on a 150-pair subset.
    pa.resize(150);
    pb.resize(150);
    std::vector<char> is_outlier(150, 0);
    int outliers = 0;
    while (outliers < 90) {
      const int idx = rng.integer(150);
      if (is_outlier[idx]) continue;
      is_outlier[idx] = 1;
      pb[idx] = {rng.uniform(0, 479), rng.uniform(0, 359)};
      ++outliers;
    }

    match::RansacOptions ropt;
    ropt.iterations = 2000;
    ropt.seed = 17;
    ropt.size_a = cam.size_a;
    ropt.size_b = cam.size_b;
    const match::RansacResult rr =
        match::estimate_fundamental_ransac(pa, pb, ropt);
    check.expect(rr.success, "ransac succeeds at 60% outliers");
    if (!rr.success) return;

    int true_recovered = 0, true_total = 0;
    for (int i = 0; i < 150; ++i) {
      if (is_outlier[i]) continue;
      ++true_total;
      if (rr.inlier_mask[i]) ++true_recovered;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "scene %llu: %d/%d true inliers recovered",
                  static_cast<unsigned long long>(scene), true_recovered,
                  true_total);
    check.note(buf);
    check.expect(
        true_recovered >= static_cast<int>(std::ceil(0.95 * true_total)),
        "95% of true inliers recovered");

    const auto virtuals = match::virtual_correspondences_from_f(
        f_gt, cam.size_a, cam.size_b, 300, 209 + scene);
    match::PairRecallInput pr;
    pr.estimate_ok = rr.success;
    pr.mean_distance = match::mean_sed(virtuals, rr.F, cam.size_a, cam.size_b);
    recall_pairs.push_back(pr);
  }
  check.expect_near(match::pose_recall(recall_pairs, 0.05), 100.0, 1e-12,
                    "pose recall 100% at 0.05");

  // Failure counting: garbage estimates count as not recalled.
  std::vector<match::PairRecallInput> mixed = recall_pairs;
  mixed.push_back({false, 0.0});
  mixed.push_back({true, 0.3});
  check.expect_near(match::pose_recall(mixed, 0.05), 100.0 * 3.0 / 5.0, 1e-9,
                    "failed estimates lower recall");
}

void check_acc_loss_fixed_points(Context&, Checker& check) {
  const loss::LossParams params;

  // Hinges inactive: pos 0.1 < 0.2 and hardest negative 1.2 > 1.0.
  {
    loss::DescSet a = loss::DescSet::zeros(2, 4), b = loss::DescSet::zeros(2, 4);
    a.row(0)[0] = 0.0;
    b.row(0)[0] = 0.1;
    a.row(1)[0] = 1.3;
    b.row(1)[0] = 1.2;
    const std::vector<geom::Vec2> ca = {{0, 0}, {1, 0}};    // excludes a-side negs
    const std::vector<geom::Vec2> cb = {{0, 0}, {50, 50}};  // keeps b-side negs
    const auto res = loss::hardest_contrastive(a, b, ca, cb, params);
    check.expect(res.value == 0.0, "inactive hinges give exactly 0");
  }

  // pos 0.5, hardest negative 0.4 -> 0.3 + 0.6 = 0.9 for every anchor.
  {
    loss::DescSet a = loss::DescSet::zeros(2, 2), b = loss::DescSet::zeros(2, 2);
    a.row(0)[0] = 0.0;
    a.row(0)[1] = 0.0;
    a.row(1)[0] = 0.5;
    a.row(1)[1] = 0.4;
    b.row(0)[0] = 0.5;
    b.row(0)[1] = 0.0;
    b.row(1)[0] = 0.0;
    b.row(1)[1] = 0.4;
    const std::vector<geom::Vec2> ca = {{0, 0}, {1, 0}};
    const std::vector<geom::Vec2> cb = {{0, 0}, {50, 50}};
    const auto res = loss::hardest_contrastive(a, b, ca, cb, params);
    check.expect_near(res.value, 0.9, 1e-12, "0.5/0.4 case gives 0.9");
  }

  // Circle loss: single positive s_p = 1, single negative s_n = 0.
  {
    loss::DescSet a = loss::DescSet::zeros(2, 4), b = loss::DescSet::zeros(2, 4);
    a.row(0)[0] = 1.0;
    b.row(0)[0] = 1.0;
    a.row(1)[2] = 1.0;
    b.row(1)[2] = 1.0;
    const std::vector<geom::Vec2> ca = {{0, 0}, {1, 0}};
    const std::vector<geom::Vec2> cb = {{0, 0}, {50, 50}};
    const auto res = loss::circle_loss(a, b, ca, cb, params);
    const double expected = std::log1p(std::exp(-10.24));
    check.expect_near(res.value, expected, 1e-12, "circle loss at (1, 0)");
    check.expect(std::abs(expected - 3.57e-5) < 5e-7, "value near 3.6e-5");
  }

  // Circle loss boundary: s_p = 1 - m, s_n = m -> log 2 per anchor.
  {
    loss::DescSet a = loss::DescSet::zeros(2, 4), b = loss::DescSet::zeros(2, 4);
    const double root = std::sqrt(0.18);
    a.row(0)[0] = 1.0;
    b.row(0)[0] = 0.9;
    b.row(0)[1] = root;
    b.row(0)[2] = 0.1;
    a.row(1)[2] = 1.0;
    b.row(1)[0] = 0.1;
    b.row(1)[2] = 0.9;
    b.row(1)[3] = root;
    const std::vector<geom::Vec2> ca = {{0, 0}, {1, 0}};
    const std::vector<geom::Vec2> cb = {{0, 0}, {50, 50}};
    const auto res = loss::circle_loss(a, b, ca, cb, params);
    check.expect_near(res.value, std::log(2.0), 1e-9,
                      "boundary case gives log 2");
  }

  // Monotone decrease in s_p, everything else fixed.
  {
    double prev = 1e30;
    for (double sp : {0.5, 0.7, 0.9, 0.99}) {
      loss::DescSet a = loss::DescSet::zeros(2, 4), b = loss::DescSet::zeros(2, 4);
      a.row(0)[0] = 1.0;
      b.row(0)[0] = sp;
      b.row(0)[1] = std::sqrt(1.0 - sp * sp);
      a.row(1)[2] = 1.0;
      b.row(1)[2] = 1.0;
      const std::vector<geom::Vec2> ca = {{0, 0}, {1, 0}};
      const std::vector<geom::Vec2> cb = {{0, 0}, {50, 50}};
      const double v = loss::circle_loss(a, b, ca, cb, params).value;
      check.expect(v < prev, "circle loss decreases as s_p grows");
      prev = v;
    }
  }
}

void check_acc_pyramid(Context&, Checker& check) {
  const detect::PyramidPlan plan = detect::plan_pyramid(512, 512);
  check.expect(plan.levels.size() == 5, "512 input gives exactly 5 levels");
  for (size_t k = 0; k < plan.levels.size(); ++k) {
    const double closed = std::pow(std::sqrt(2.0), static_cast<double>(k));
    check.expect_near(1.0 / plan.levels[k].scale, closed, 1e-6,
                      "scale matches closed form");
  }
  check.expect(plan.levels.back().width == 128, "last level is 128 wide");

  const detect::PyramidPlan small = detect::plan_pyramid(100, 100);
  check.expect(small.levels.size() == 1, "100 input keeps a single level");

  const detect::PyramidPlan capped = detect::plan_pyramid(4096, 2048);
  check.expect_near(capped.cap_scale, 0.5, 1e-12, "2048 cap halves the input");
  check.expect(capped.levels[0].width == 2048 && capped.levels[0].height == 1024,
               "capped level-0 size");

  const double x_level = 40.0;
  const double mapped = x_level / plan.levels[1].scale;
  check.expect_near(mapped, 40.0 * std::sqrt(2.0), 1e-6, "coordinate map-back");

  const auto kernel = detect::gaussian_kernel(0.8);
  check.expect(kernel.size() == 5, "sigma 0.8 truncates at radius 2");
  double sum = 0.0;
  for (double v : kernel) sum += v;
  check.expect_near(sum, 1.0, 1e-12, "kernel normalized");
}

void check_acc_performance(Context& ctx, Checker& check) {
  Rng rng(211);
  const Tensor img = smooth_random_image(rng, 480, 480);

  pipeline::ExtractorConfig cfg;
  cfg.backbone.variant = dcn::DcnVariant::kFree;
  cfg.detector.top_k = 500;
  const pipeline::Extractor extractor =
      pipeline::Extractor::with_seeded_weights(cfg, 7);

  const auto t0 = std::chrono::steady_clock::now();
  const detect::FeatureSet fs = extractor.extract_gray(img);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "480x480 top-500 extraction: %.2fs, %zu keypoints", seconds,
                fs.count());
  check.note(buf);
  check.expect(fs.count() <= 500, "top-k bound respected");
  check.expect(seconds < 10.0, "single-scale extraction under 10 s");

  const double elapsed = ctx.elapsed_seconds();
  std::snprintf(buf, sizeof(buf), "suite elapsed %.1fs", elapsed);
  check.note(buf);
  check.expect(elapsed < 300.0, "full self-test under 5 minutes");
}

const std::vector<Check>& registry() {
  static const std::vector<Check> checks = {
      {"core.pnm-roundtrip", check_pnm_roundtrip},
      {"core.bilinear-affine-exact", check_bilinear_affine},
      {"core.standardize", check_standardize},
      {"core.upsample-bounds", check_upsample},
      {"core.weights-roundtrip", check_weights_roundtrip},
      {"geom.activations", check_geom_activations},
      {"geom.identity-offsets", check_geom_identity_offsets},
      {"geom.affine-determinant", check_geom_affine_det},
      {"dcn.translation-equivariance", check_dcn_equivariance},
      {"net.architecture", check_net_architecture},
      {"net.descriptors", check_net_descriptors},
      {"detect.nms-ties", check_detect_nms},
      {"detect.selection", check_detect_selection},
      {"detect.scoring-paths-differ", check_detect_paths_differ},
      {"match.brute-force-oracle", check_match_oracle},
      {"match.ransac-determinism", check_match_determinism},
      {"match.f-recovery", check_match_f_recovery},
      {"loss.invariants", check_loss_invariants},
      {"loss.correspondence-warps", check_loss_correspondence},
      {"acceptance.01-dcn-reduction", check_acc_dcn_reduction},
      {"acceptance.02-dlt-roundtrip", check_acc_dlt_roundtrip},
      {"acceptance.03-gradient-suite", check_acc_gradient_suite},
      {"acceptance.04-scoring-oracles", check_acc_scoring_oracles},
      {"acceptance.05-detection-covariance", check_acc_detection_covariance},
      {"acceptance.06-edge-rule", check_acc_edge_rule},
      {"acceptance.07-matching-closed-loop", check_acc_matching_loop},
      {"acceptance.08-epipolar-loop", check_acc_epipolar_loop},
      {"acceptance.09-loss-fixed-points", check_acc_loss_fixed_points},
      {"acceptance.10-pyramid-bookkeeping", check_acc_pyramid},
      {"acceptance.11-performance", check_acc_performance},
  };
  return checks;
}

}  // namespace

std::vector<CheckResult> run(const Options& opt) {
  Context ctx;
  ctx.options = &opt;
  ctx.run_start = std::chrono::steady_clock::now();

  std::vector<CheckResult> results;
  for (const Check& c : registry()) {
    bool selected = true;
    for (const std::string& f : opt.filters)
      selected = selected && c.name.find(f) != std::string::npos;
    if (!selected) continue;

    CheckResult r;
    r.name = c.name;
    Checker checker(&r);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(ctx, checker);
    } catch (const std::exception& e) {
      checker.expect(false, std::string("unhandled exception: ") + e.what());
    }
    r.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_report(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  double total = 0.0;
  for (const CheckResult& r : results) {
    char line[512];
    std::snprintf(line, sizeof(line), "%s  %-38s (%6.2fs)%s%s\n",
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                  r.detail.empty() ? "" : "  -- ", r.detail.c_str());
    os << line;
    total += r.seconds;
  }
  const int failures = count_failures(results);
  char tail[128];
  std::snprintf(tail, sizeof(tail), "%zu checks, %d failed, %.1fs total\n",
                results.size(), failures, total);
  os << tail;
  return os.str();
}

int count_failures(const std::vector<CheckResult>& results) {
  int n = 0;
  for (const CheckResult& r : results) n += r.pass ? 0 : 1;
  return n;
}

}  // namespace asl::selftest
