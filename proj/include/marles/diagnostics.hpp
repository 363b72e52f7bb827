#pragma once

#include <map>
#include <string>
#include <vector>

#include "marles/spectral.hpp"

namespace marles {

/// Isotropic shell spectrum over integer wavenumber shells
/// |k| in [m - 1/2, m + 1/2), m = 1 .. k_max.
struct Spectrum {
    std::vector<int> k_bins;
    Eigen::ArrayXd values;
};

/// Shell sums of 0.5 |omega_hat|^2. Shells cover every resolved mode, so the
/// values sum to the total enstrophy.
Spectrum enstrophy_spectrum(const SpectralField& omega);

/// Shell sums of 0.5 |omega_hat|^2 / |k|^2 (kinetic energy).
Spectrum energy_spectrum(const SpectralField& omega);

/// First k_max shells of s.
Spectrum truncate_spectrum(const Spectrum& s, int k_max);

/// Squared L2 distance of the log spectra over shared bins. Values are
/// clamped to `floor` before the log so empty shells stay finite.
double spectrum_log_error(const Spectrum& a, const Spectrum& b, double floor = 1e-30);

/// Histogram density estimate of vorticity values pooled over sample fields.
struct PdfEstimate {
    Eigen::ArrayXd bin_edges;  ///< n_bins + 1 edges, symmetric about 0
    Eigen::ArrayXd density;    ///< per-bin probability density
    long n_samples = 0;
    double sigma = 0.0;  ///< population standard deviation of omega
    double tail3 = 0.0;  ///< P(|omega| > 3 sigma)
    double tail4 = 0.0;  ///< P(|omega| > 4 sigma)
};

/// Pooled histogram over +-range_sigmas * sigma with out-of-range values
/// folded into the end bins, so the density integrates to 1 exactly.
PdfEstimate vorticity_pdf(const std::vector<RealField>& samples, int n_bins = 101,
                          double range_sigmas = 6.0);

using Metadata = std::map<std::string, std::string>;

void write_spectrum_csv(const std::string& path, const Spectrum& s, const Metadata& meta = {});
Spectrum read_spectrum_csv(const std::string& path, Metadata* meta = nullptr);

void write_pdf_csv(const std::string& path, const PdfEstimate& pdf, const Metadata& meta = {});

}  // namespace marles
