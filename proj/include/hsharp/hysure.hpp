#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/fft.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/vca.hpp"

namespace hsharp {

struct HysureParams {
  double lambda_m = 1.0;
  double lambda_phi = 5e-4;
  double mu = 0.05;
  std::size_t max_iter = 200;
  double rel_tol = 1e-4;
  std::size_t subspace_dim = 10;

  void validate() const {
    if (!(lambda_m > 0.0) || !(lambda_phi > 0.0) || !(mu > 0.0))
      fail_validation("HySure weights lambda_m, lambda_phi and mu must be positive");
    if (max_iter < 1) fail_validation("max_iter must be >= 1");
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) fail_validation("rel_tol must lie in (0, 1)");
    if (subspace_dim < 1) fail_validation("subspace_dim must be >= 1");
  }
};

struct SolveTrace {
  double initial_objective = 0.0;
  std::vector<double> objective;  // after each iteration
  // Splitting residuals ||XB - V1||, ||X - V2||, ||XD - V3||, each divided by ||X||.
  std::vector<std::array<double, 3>> primal_residuals;
  std::size_t iterations_run = 0;
  bool converged = false;
};

/// Coefficient field X (p channels over a rows x cols grid), channel-major.
struct CoefficientField {
  std::size_t channels = 0, rows = 0, cols = 0;
  std::vector<double> values;

  CoefficientField() = default;
  CoefficientField(std::size_t p, std::size_t r, std::size_t c)
      : channels(p), rows(r), cols(c), values(p * r * c, 0.0) {}

  std::size_t pixels() const noexcept { return rows * cols; }
  std::span<double> channel(std::size_t k) { return {values.data() + k * pixels(), pixels()}; }
  std::span<const double> channel(std::size_t k) const { return {values.data() + k * pixels(), pixels()}; }

  using MatrixView = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  /// The field as a channels x pixels matrix sharing storage.
  MatrixView matrix() {
    return MatrixView(values.data(), static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(pixels()));
  }
};

namespace detail {

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

/// Cyclic forward differences: dh(y,x) = X(y,x+1) - X(y,x), dv(y,x) = X(y+1,x) - X(y,x).
inline void forward_differences(std::span<const double> x, std::size_t rows, std::size_t cols,
                                std::span<double> dh, std::span<double> dv) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t rn = (r + 1) % rows;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t cn = (c + 1) % cols;
      const double v = x[r * cols + c];
      dh[r * cols + c] = x[r * cols + cn] - v;
      dv[r * cols + c] = x[rn * cols + c] - v;
    }
  }
}

/// Adjoint of forward_differences applied to (gh, gv), accumulated into out.
inline void add_difference_adjoint(std::span<const double> gh, std::span<const double> gv,
                                   std::size_t rows, std::size_t cols, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t rp = (r + rows - 1) % rows;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t cp = (c + cols - 1) % cols;
      const std::size_t i = r * cols + c;
      out[i] += gh[r * cols + cp] - gh[i] + gv[rp * cols + c] - gv[i];
    }
  }
}

}  // namespace detail

/// Proximal operator of threshold * VTV: per pixel, the 2p gradient values
/// are shrunk jointly, v * max(0, 1 - threshold / ||v||).
inline void vtv_prox(CoefficientField& gh, CoefficientField& gv, double threshold) {
  if (gh.channels != gv.channels || gh.rows != gv.rows || gh.cols != gv.cols)
    fail_validation("gradient fields differ in shape");
  if (!(threshold >= 0.0)) fail_validation("threshold must be non-negative");
  const std::size_t n = gh.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < gh.channels; ++k) {
      const double a = gh.values[k * n + i], b = gv.values[k * n + i];
      s += a * a + b * b;
    }
    const double norm = std::sqrt(s);
    const double scale = norm > 0.0 ? std::max(0.0, 1.0 - threshold / norm) : 0.0;
    for (std::size_t k = 0; k < gh.channels; ++k) {
      gh.values[k * n + i] *= scale;
      gv.values[k * n + i] *= scale;
    }
  }
}

inline double vtv_norm(const CoefficientField& x) {
  const std::size_t n = x.pixels();
  std::vector<double> dh(n), dv(n), acc(n, 0.0);
  for (std::size_t k = 0; k < x.channels; ++k) {
    detail::forward_differences(x.channel(k), x.rows, x.cols, dh, dv);
    for (std::size_t i = 0; i < n; ++i) acc[i] += dh[i] * dh[i] + dv[i] * dv[i];
  }
  double s = 0.0;
  for (double v : acc) s += std::sqrt(v);
  return s;
}

/// Everything the objective needs about the observations, in double precision.
class HysureProblem {
 public:
  HysureProblem(const HyperCube& hs, const PanImage& pan, const SensorModel& model,
                const Eigen::MatrixXd& basis)
      : ratio_(model.ratio),
        rows_(pan.rows()),
        cols_(pan.cols()),
        low_rows_(hs.rows()),
        low_cols_(hs.cols()),
        psf_(model.psf),
        basis_(basis) {
    if (pan.rows() != hs.rows() * ratio_ || pan.cols() != hs.cols() * ratio_)
      fail_validation("pan dims must equal hs dims x ratio");
    if (static_cast<std::size_t>(basis.rows()) != hs.bands())
      fail_validation("subspace basis has " + std::to_string(basis.rows()) + " rows for " +
                      std::to_string(hs.bands()) + " bands");
    if (model.response.size() != hs.bands()) fail_validation("spectral response length mismatch");
    if (psf_.side % 2 == 0) fail_validation("psf side length must be odd");
    if (psf_.side > rows_ || psf_.side > cols_) fail_validation("psf larger than the raster");
    bands_ = hs.bands();
    hs_.assign(hs.data().begin(), hs.data().end());
    pan_.assign(pan.data().begin(), pan.data().end());
    response_ = Eigen::Map<const Eigen::VectorXd>(model.response.data(),
                                                 static_cast<Eigen::Index>(model.response.size()));
    pan_coeffs_ = basis_.transpose() * response_;  // (R E)^T
  }

  std::size_t ratio() const noexcept { return ratio_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t low_rows() const noexcept { return low_rows_; }
  std::size_t low_cols() const noexcept { return low_cols_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
  const Kernel& psf() const noexcept { return psf_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  const Eigen::VectorXd& pan_coeffs() const noexcept { return pan_coeffs_; }
  double hs_value(std::size_t band, std::size_t low_pixel) const {
    return hs_[band * low_rows_ * low_cols_ + low_pixel];
  }
  double pan_value(std::size_t pixel) const { return pan_[pixel]; }

  /// 1/2||Yh - E XB M||^2 given the blurred field XB.
  double hs_term(const CoefficientField& xb) const {
    const std::size_t n = xb.pixels();
    const auto p = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd coeff(p);
    double s = 0.0;
    for (std::size_t i = 0; i < low_rows_; ++i)
      for (std::size_t j = 0; j < low_cols_; ++j) {
        const std::size_t hp = (i * ratio_) * cols_ + j * ratio_;
        for (Eigen::Index k = 0; k < p; ++k) coeff[k] = xb.values[static_cast<std::size_t>(k) * n + hp];
        const Eigen::VectorXd z = basis_ * coeff;
        const std::size_t lp = i * low_cols_ + j;
        for (std::size_t b = 0; b < bands_; ++b) {
          const double d = hs_value(b, lp) - z[static_cast<Eigen::Index>(b)];
          s += d * d;
        }
      }
    return 0.5 * s;
  }

  /// 1/2||Ym - R E X||^2.
  double pan_term(const CoefficientField& x) const {
    const std::size_t n = x.pixels();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < x.channels; ++k)
        v += pan_coeffs_[static_cast<Eigen::Index>(k)] * x.values[k * n + i];
      const double d = pan_[i] - v;
      s += d * d;
    }
    return 0.5 * s;
  }

  /// High-res pixel index sampled by low-res pixel j.
  std::size_t lattice_pixel(std::size_t j) const {
    return (j / low_cols_) * ratio_ * cols_ + (j % low_cols_) * ratio_;
  }

 private:
  std::size_t ratio_, rows_, cols_, low_rows_, low_cols_, bands_ = 0;
  Kernel psf_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd response_, pan_coeffs_;
  std::vector<double> hs_, pan_;
};

/// Cyclic convolution of every channel with the PSF (spatial domain).
inline CoefficientField blur_field(const CoefficientField& x, const Kernel& psf) {
  CoefficientField out(x.channels, x.rows, x.cols);
  const auto c = static_cast<std::ptrdiff_t>(psf.radius());
  for (std::size_t k = 0; k < x.channels; ++k) {
    const auto in = x.channel(k);
    auto dst = out.channel(k);
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t q = 0; q < x.cols; ++q) {
        double s = 0.0;
        for (std::size_t u = 0; u < psf.side; ++u) {
          const std::size_t y = Fft2d::wrap(static_cast<std::ptrdiff_t>(r) + c - static_cast<std::ptrdiff_t>(u), x.rows);
          for (std::size_t v = 0; v < psf.side; ++v) {
            const std::size_t xx = Fft2d::wrap(static_cast<std::ptrdiff_t>(q) + c - static_cast<std::ptrdiff_t>(v), x.cols);
            s += psf.at(u, v) * in[y * x.cols + xx];
          }
        }
        dst[r * x.cols + q] = s;
      }
  }
  return out;
}

/// The fusion objective
///   1/2||Yh - E X B M||^2 + lambda_m/2 ||Ym - R E X||^2 + lambda_phi VTV(X).
inline double hysure_objective(const HysureProblem& prob, const CoefficientField& x,
                               const HysureParams& params) {
  const CoefficientField xb = blur_field(x, prob.psf());
  return prob.hs_term(xb) + params.lambda_m * prob.pan_term(x) + params.lambda_phi * vtv_norm(x);
}

/// X0 = pinv(E) applied to the upsampled cube.
inline CoefficientField hysure_initial_coefficients(const HyperCube& hs, std::size_t ratio,
                                                    const Eigen::MatrixXd& basis) {
  const HyperCube up = upsample(hs, ratio);
  const Eigen::MatrixXd pinv = basis.completeOrthogonalDecomposition().pseudoInverse();
  const auto p = static_cast<std::size_t>(basis.cols());
  CoefficientField x(p, up.rows(), up.cols());
  const std::size_t n = up.pixels();
  Eigen::VectorXd spec(static_cast<Eigen::Index>(hs.bands()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < hs.bands(); ++b) spec[static_cast<Eigen::Index>(b)] = up.band(b)[i];
    const Eigen::VectorXd c = pinv * spec;
    for (std::size_t k = 0; k < p; ++k) x.values[k * n + i] = c[static_cast<Eigen::Index>(k)];
  }
  return x;
}

inline HyperCube reconstruct(const CoefficientField& x, const Eigen::MatrixXd& basis,
                             const HyperCube& like, double gsd_m) {
  HyperCube out = like.blank_like(x.rows, x.cols, gsd_m);
  const std::size_t n = x.pixels();
  const auto p = static_cast<Eigen::Index>(x.channels);
  Eigen::VectorXd coeff(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) coeff[k] = x.values[static_cast<std::size_t>(k) * n + i];
    const Eigen::VectorXd z = basis * coeff;
    for (std::size_t b = 0; b < out.bands(); ++b)
      out.band(b)[i] = static_cast<float>(z[static_cast<Eigen::Index>(b)]);
  }
  return out;
}

struct HysureResult {
  HyperCube fused;
  CoefficientField coefficients;
  SolveTrace trace;
};

/// Subspace-regularized fusion solved by ADMM (SALSA) with splittings
/// V1 = XB, V2 = X, V3 = (X Dh, X Dv). All spatial operators are cyclic, so the
/// X-update is a per-frequency division in the 2-D DFT domain.
inline HysureResult hysure_solve(const HyperCube& hs, const PanImage& pan, const SensorModel& model,
                                 const Subspace& subspace, const HysureParams& params) {
  params.validate();
  const HysureProblem prob(hs, pan, model, subspace.basis);
  const std::size_t p = prob.dim();
  const std::size_t rows = prob.rows(), cols = prob.cols(), n = rows * cols;
  const double mu = params.mu;
  const auto pp = static_cast<Eigen::Index>(p);
  const Eigen::MatrixXd& e = subspace.basis;

  Fft2d fft(rows, cols);
  using Complex = Fft2d::Complex;
  const auto psf_hat = fft.kernel_spectrum(prob.psf().weights, prob.psf().side);
  std::vector<Complex> dh_hat, dv_hat;
  {
    std::vector<double> k(n, 0.0);
    k[0] = -1.0;
    k[cols - 1] += 1.0;  // picks X(y, x+1)
    dh_hat.resize(fft.spectrum_size());
    fft.forward(k, dh_hat);
    std::fill(k.begin(), k.end(), 0.0);
    k[0] = -1.0;
    k[(rows - 1) * cols] += 1.0;  // picks X(y+1, x)
    dv_hat.resize(fft.spectrum_size());
    fft.forward(k, dv_hat);
  }
  std::vector<double> denom(fft.spectrum_size());
  for (std::size_t f = 0; f < denom.size(); ++f)
    denom[f] = std::norm(psf_hat[f]) + 1.0 + std::norm(dh_hat[f]) + std::norm(dv_hat[f]);

  const Eigen::MatrixXd etE = e.transpose() * e;
  const Eigen::MatrixXd v1_solve = (etE + mu * Eigen::MatrixXd::Identity(pp, pp)).inverse();
  const Eigen::VectorXd& rE = prob.pan_coeffs();
  const Eigen::MatrixXd v2_solve =
      (params.lambda_m * rE * rE.transpose() + mu * Eigen::MatrixXd::Identity(pp, pp)).inverse();

  // E^T Yh per low-res pixel.
  const std::size_t n_low = prob.low_rows() * prob.low_cols();
  Eigen::MatrixXd ety(pp, static_cast<Eigen::Index>(n_low));
  {
    Eigen::VectorXd spec(static_cast<Eigen::Index>(prob.bands()));
    for (std::size_t j = 0; j < n_low; ++j) {
      for (std::size_t b = 0; b < prob.bands(); ++b) spec[static_cast<Eigen::Index>(b)] = prob.hs_value(b, j);
      ety.col(static_cast<Eigen::Index>(j)) = e.transpose() * spec;
    }
  }

  CoefficientField x = hysure_initial_coefficients(hs, model.ratio, e);
  CoefficientField xb(p, rows, cols), xdh(p, rows, cols), xdv(p, rows, cols);
  CoefficientField v1(p, rows, cols), v2(p, rows, cols), v3h(p, rows, cols), v3v(p, rows, cols);
  CoefficientField u1(p, rows, cols), u2(p, rows, cols), u3h(p, rows, cols), u3v(p, rows, cols);

  std::vector<Complex> spec_a(fft.spectrum_size()), spec_b(fft.spectrum_size());
  std::vector<double> work(n);

  auto blur_all = [&](const CoefficientField& in, CoefficientField& out) {
    for (std::size_t k = 0; k < p; ++k) {
      fft.forward(in.channel(k), spec_a);
      for (std::size_t f = 0; f < spec_a.size(); ++f) spec_a[f] *= psf_hat[f];
      fft.inverse(spec_a, out.channel(k));
    }
  };
  auto differences = [&]() {
    for (std::size_t k = 0; k < p; ++k)
      detail::forward_differences(x.channel(k), rows, cols, xdh.channel(k), xdv.channel(k));
  };
  auto objective_now = [&]() {
    double tv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        const double a = xdh.values[k * n + i], b = xdv.values[k * n + i];
        s += a * a + b * b;
      }
      tv += std::sqrt(s);
    }
    return prob.hs_term(xb) + params.lambda_m * prob.pan_term(x) + params.lambda_phi * tv;
  };

  blur_all(x, xb);
  differences();
  v1 = xb;
  v2 = x;
  v3h = xdh;
  v3v = xdv;

  HysureResult result;
  result.trace.initial_objective = objective_now();

  std::vector<double> x_prev(x.values.size());
  std::vector<double> gh(n), gv(n);
  Eigen::VectorXd rhs(pp);
  Eigen::MatrixXd stacked(pp, static_cast<Eigen::Index>(n));
  Eigen::RowVectorXd pan_row(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) pan_row[static_cast<Eigen::Index>(i)] = prob.pan_value(i);
  const double threshold = params.lambda_phi / mu;

  for (std::size_t it = 1; it <= params.max_iter; ++it) {
    x_prev = x.values;

    // X-update.
    for (std::size_t k = 0; k < p; ++k) {
      auto w1 = v1.channel(k);
      auto z1 = u1.channel(k);
      for (std::size_t i = 0; i < n; ++i) work[i] = w1[i] - z1[i];
      fft.forward(work, spec_a);
      for (std::size_t i = 0; i < n; ++i) work[i] = v2.channel(k)[i] - u2.channel(k)[i];
      for (std::size_t i = 0; i < n; ++i) {
        gh[i] = v3h.channel(k)[i] - u3h.channel(k)[i];
        gv[i] = v3v.channel(k)[i] - u3v.channel(k)[i];
      }
      detail::add_difference_adjoint(gh, gv, rows, cols, work);
      fft.forward(work, spec_b);
      for (std::size_t f = 0; f < spec_a.size(); ++f)
        spec_a[f] = (std::conj(psf_hat[f]) * spec_a[f] + spec_b[f]) / denom[f];
      fft.inverse(spec_a, x.channel(k));
      for (std::size_t f = 0; f < spec_a.size(); ++f) spec_a[f] *= psf_hat[f];
      fft.inverse(spec_a, xb.channel(k));
    }
    differences();

    // V1-update: data term on the sampling lattice, pass-through elsewhere.
    v1.matrix() = xb.matrix() + u1.matrix();
    for (std::size_t j = 0; j < n_low; ++j) {
      const std::size_t i = prob.lattice_pixel(j);
      rhs.noalias() = ety.col(static_cast<Eigen::Index>(j)) + mu * v1.matrix().col(static_cast<Eigen::Index>(i));
      v1.matrix().col(static_cast<Eigen::Index>(i)).noalias() = v1_solve * rhs;
    }

    // V2-update: panchromatic term.
    stacked = mu * (x.matrix() + u2.matrix());
    stacked.noalias() += params.lambda_m * rE * pan_row;
    v2.matrix().noalias() = v2_solve * stacked;

    // V3-update: group shrinkage.
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      v3h.values[i] = xdh.values[i] + u3h.values[i];
      v3v.values[i] = xdv.values[i] + u3v.values[i];
    }
    vtv_prox(v3h, v3v, threshold);

    // Dual ascent and residuals.
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      const double d1 = xb.values[i] - v1.values[i];
      const double d2 = x.values[i] - v2.values[i];
      const double d3h = xdh.values[i] - v3h.values[i];
      const double d3v = xdv.values[i] - v3v.values[i];
      u1.values[i] += d1;
      u2.values[i] += d2;
      u3h.values[i] += d3h;
      u3v.values[i] += d3v;
      r1 += d1 * d1;
      r2 += d2 * d2;
      r3 += d3h * d3h + d3v * d3v;
    }
    const double xnorm = std::sqrt(detail::squared_norm(x.values));
    const double scale = xnorm > 0.0 ? 1.0 / xnorm : 1.0;
    result.trace.primal_residuals.push_back({std::sqrt(r1) * scale, std::sqrt(r2) * scale, std::sqrt(r3) * scale});

    const double obj = objective_now();
    if (!std::isfinite(obj) || !std::isfinite(xnorm))
      throw Error(ErrorKind::numerical,
                  "non-finite values in HySure solve at iteration " + std::to_string(it));
    result.trace.objective.push_back(obj);
    result.trace.iterations_run = it;

    double change = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      const double d = x.values[i] - x_prev[i];
      change += d * d;
    }
    const double prev_norm = std::sqrt(detail::squared_norm(x_prev));
    // The first X-update reproduces X0 because the splittings start consistent.
    if (it > 1 && std::sqrt(change) <= params.rel_tol * (prev_norm > 0.0 ? prev_norm : 1.0)) {
      result.trace.converged = true;
      break;
    }
  }

  result.fused = reconstruct(x, e, hs, pan.gsd_m());
  result.coefficients = std::move(x);
  return result;
}

inline std::pair<HyperCube, SolveTrace> hysure_sharpen(const HyperCube& hs, const PanImage& pan,
                                                       const SensorModel& model, const Subspace& subspace,
                                                       const HysureParams& params) {
  auto r = hysure_solve(hs, pan, model, subspace, params);
  return {std::move(r.fused), std::move(r.trace)};
}

}  // namespace hsharp
