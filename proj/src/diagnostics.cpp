#include "marles/diagnostics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "marles/errors.hpp"

namespace marles {

namespace {

Spectrum shell_sums(const SpectralField& f, bool divide_by_k2) {
    const auto& grid = f.grid;
    const int n = grid->n;
    const int k_max = static_cast<int>(std::floor(std::hypot(n / 2.0, n / 2.0) + 0.5));

    Spectrum s;
    s.k_bins.resize(k_max);
    for (int m = 1; m <= k_max; ++m) s.k_bins[m - 1] = m;
    s.values = Eigen::ArrayXd::Zero(k_max);

    for (int col = 0; col < grid->cols(); ++col) {
        for (int row = 0; row < grid->rows(); ++row) {
            const double k2 = grid->k2(row, col);
            if (k2 == 0.0) continue;
            const int shell = static_cast<int>(std::floor(std::sqrt(k2) + 0.5));
            if (shell < 1 || shell > k_max) continue;
            double contrib = 0.5 * grid->mode_weight(row, col) * std::norm(f.c(row, col));
            if (divide_by_k2) contrib /= k2;
            s.values(shell - 1) += contrib;
        }
    }
    return s;
}

}  // namespace

Spectrum enstrophy_spectrum(const SpectralField& omega) { return shell_sums(omega, false); }

Spectrum energy_spectrum(const SpectralField& omega) { return shell_sums(omega, true); }

Spectrum truncate_spectrum(const Spectrum& s, int k_max) {
    if (k_max < 1 || k_max > static_cast<int>(s.k_bins.size())) {
        throw std::invalid_argument("truncate_spectrum: k_max outside available shells");
    }
    Spectrum out;
    out.k_bins.assign(s.k_bins.begin(), s.k_bins.begin() + k_max);
    out.values = s.values.head(k_max);
    return out;
}

double spectrum_log_error(const Spectrum& a, const Spectrum& b, double floor) {
    if (a.k_bins != b.k_bins) {
        throw std::invalid_argument("spectrum_log_error: bin layouts differ");
    }
    const Eigen::ArrayXd la = a.values.max(floor).log();
    const Eigen::ArrayXd lb = b.values.max(floor).log();
    return (la - lb).square().sum();
}

PdfEstimate vorticity_pdf(const std::vector<RealField>& samples, int n_bins,
                          double range_sigmas) {
    if (samples.empty()) throw std::invalid_argument("vorticity_pdf: no sample fields");
    if (n_bins < 1) throw std::invalid_argument("vorticity_pdf: n_bins must be >= 1");

    long count = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (const RealField& f : samples) {
        count += f.size();
        sum += f.sum();
        sum_sq += f.square().sum();
    }
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean);
    const double sigma = std::sqrt(var);

    PdfEstimate pdf;
    pdf.n_samples = count;
    pdf.sigma = sigma;

    const double range = sigma > 0.0 ? range_sigmas * sigma : 1.0;
    pdf.bin_edges = Eigen::ArrayXd::LinSpaced(n_bins + 1, -range, range);
    const double width = 2.0 * range / n_bins;

    Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(n_bins);
    long over3 = 0, over4 = 0;
    for (const RealField& f : samples) {
        const double* data = f.data();
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double w = data[i];
            int bin = static_cast<int>(std::floor((w + range) / width));
            bin = std::max(0, std::min(n_bins - 1, bin));
            counts(bin) += 1.0;
            const double a = std::abs(w);
            if (sigma > 0.0 && a > 3.0 * sigma) ++over3;
            if (sigma > 0.0 && a > 4.0 * sigma) ++over4;
        }
    }
    pdf.density = counts / (static_cast<double>(count) * width);
    pdf.tail3 = static_cast<double>(over3) / count;
    pdf.tail4 = static_cast<double>(over4) / count;
    return pdf;
}

namespace {

void write_metadata(std::ofstream& out, const Metadata& meta) {
    for (const auto& [key, value] : meta) {
        out << "# " << key << "=" << value << "\n";
    }
}

}  // namespace

void write_spectrum_csv(const std::string& path, const Spectrum& s, const Metadata& meta) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_metadata(out, meta);
    out << "k,value\n";
    out.precision(17);
    for (size_t i = 0; i < s.k_bins.size(); ++i) {
        out << s.k_bins[i] << "," << s.values(static_cast<Eigen::Index>(i)) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Spectrum read_spectrum_csv(const std::string& path, Metadata* meta) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spectrum file: " + path);
    Spectrum s;
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (meta && eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(' '));
                key.erase(key.find_last_not_of(' ') + 1);
                (*meta)[key] = line.substr(eq + 1);
            }
            continue;
        }
        if (line.rfind("k,", 0) == 0) continue;  // column header
        std::istringstream ss(line);
        std::string k_str, v_str;
        if (!std::getline(ss, k_str, ',') || !std::getline(ss, v_str)) {
            throw IoError("malformed spectrum row in " + path + ": " + line);
        }
        s.k_bins.push_back(std::stoi(k_str));
        values.push_back(std::stod(v_str));
    }
    s.values = Eigen::Map<Eigen::ArrayXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return s;
}

void write_pdf_csv(const std::string& path, const PdfEstimate& pdf, const Metadata& meta) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    Metadata enriched = meta;
    enriched["sigma"] = std::to_string(pdf.sigma);
    enriched["n_samples"] = std::to_string(pdf.n_samples);
    enriched["tail_3sigma"] = std::to_string(pdf.tail3);
    enriched["tail_4sigma"] = std::to_string(pdf.tail4);
    write_metadata(out, enriched);
    out << "omega,density\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < pdf.density.size(); ++i) {
        const double center = 0.5 * (pdf.bin_edges(i) + pdf.bin_edges(i + 1));
        out << center << "," << pdf.density(i) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace marles
