#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"

namespace hsharp {

struct PcaFit {
  std::vector<std::size_t> band_indices;  // bands of the source cube used by the fit
  Eigen::MatrixXd components;             // one orthonormal component per column
  Eigen::VectorXd eigenvalues;            // descending, non-negative
  Eigen::VectorXd mean_spectrum;

  std::size_t size() const noexcept { return static_cast<std::size_t>(components.cols()); }
};

/// Principal components of the pixel spectra restricted to `band_range`.
/// Each component's largest-magnitude entry is made positive.
inline PcaFit pca_fit(const HyperCube& cube, const WavelengthInterval& band_range) {
  if (!cube.has_wavelengths()) fail_validation("PCA band selection needs wavelength metadata");
  PcaFit fit;
  for (std::size_t b = 0; b < cube.bands(); ++b)
    if (band_range.contains(cube.wavelengths_nm()[b])) fit.band_indices.push_back(b);
  if (fit.band_indices.size() < 3)
    fail_validation("PCA range selects " + std::to_string(fit.band_indices.size()) + " bands; need >= 3");

  const auto m = static_cast<Eigen::Index>(fit.band_indices.size());
  const std::size_t n = cube.pixels();
  fit.mean_spectrum.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    double s = 0.0;
    for (float v : cube.band(fit.band_indices[static_cast<std::size_t>(k)])) s += v;
    fit.mean_spectrum[k] = s / static_cast<double>(n);
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd x(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < m; ++k)
      x[k] = cube.band(fit.band_indices[static_cast<std::size_t>(k)])[i] - fit.mean_spectrum[k];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  fit.components.resize(m, m);
  fit.eigenvalues.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(m - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    fit.components.col(k) = v;
    fit.eigenvalues[k] = std::max(0.0, eig.eigenvalues()[m - 1 - k]);
  }
  return fit;
}

/// Scores of every pixel on one component.
inline std::vector<double> pca_scores(const HyperCube& cube, const PcaFit& fit, std::size_t component) {
  if (component >= fit.size()) fail_validation("component index out of range");
  for (std::size_t b : fit.band_indices)
    if (b >= cube.bands()) fail_validation("PCA fit does not match the cube's bands");
  const std::size_t n = cube.pixels();
  std::vector<double> out(n, 0.0);
  const auto comp = fit.components.col(static_cast<Eigen::Index>(component));
  for (std::size_t k = 0; k < fit.band_indices.size(); ++k) {
    const auto band = cube.band(fit.band_indices[k]);
    const double w = comp[static_cast<Eigen::Index>(k)];
    const double mu = fit.mean_spectrum[static_cast<Eigen::Index>(k)];
    for (std::size_t i = 0; i < n; ++i) out[i] += w * (band[i] - mu);
  }
  return out;
}

inline RgbComposite pca_composite(const HyperCube& cube, const PcaFit& fit,
                                  std::array<std::size_t, 3> pcs = {0, 1, 2}, double stretch_lo = 2.0,
                                  double stretch_hi = 98.0) {
  if (std::set<std::size_t>(pcs.begin(), pcs.end()).size() != 3)
    fail_validation("composite components must be distinct");
  for (std::size_t c : pcs)
    if (c >= fit.size())
      fail_validation("component " + std::to_string(c) + " out of range (" + std::to_string(fit.size()) + ")");
  const std::size_t n = cube.pixels();
  std::vector<double> planes(3 * n);
  // Components in the numerical null space carry only rounding noise; they
  // render as flat, degenerate channels.
  const double floor = 1e-10 * fit.eigenvalues[0];
  for (std::size_t ch = 0; ch < 3; ++ch) {
    if (!(fit.eigenvalues[static_cast<Eigen::Index>(pcs[ch])] > floor)) continue;
    const auto s = pca_scores(cube, fit, pcs[ch]);
    std::copy(s.begin(), s.end(), planes.begin() + static_cast<std::ptrdiff_t>(ch * n));
  }
  return render_composite(planes, cube.rows(), cube.cols(), stretch_lo, stretch_hi, pcs);
}

}  // namespace hsharp
