#include "eeo/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

// Shortest decimal that parses back to the identical double.
std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& x) {
    return x ? format_double(*x) : std::string();
}

double parse_double(const std::string& field, const std::string& path, std::size_t line) {
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw IoError(path + ":" + std::to_string(line) + ": bad numeric field '" + field +
                      "'");
    return value;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

constexpr const char* kMetricsHeader =
    "step,loss,grad_norm,lambda_min,escape_fired,erank_repr,erank_attn,nuclear_attn,"
    "attn_entropy";

double nuclear_from(const SingularSpectrum& s) {
    double total = 0.0;
    for (double v : s.values) total += v;
    return total;
}

}  // namespace

double attention_entropy(const Matrix& a) {
    if (a.rows() == 0 || a.cols() == 0)
        throw ValidationError("attention entropy: empty matrix");
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row_sum = 0.0;
        double row_entropy = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double x = a(i, j);
            if (x < -1e-9)
                throw ValidationError("attention entropy: negative entry at row " +
                                      std::to_string(i));
            row_sum += x;
            const double p = std::max(x, 0.0);
            if (p > 0.0) row_entropy -= p * std::log(p);
        }
        if (std::abs(row_sum - 1.0) > 1e-9)
            throw ValidationError("attention entropy: row " + std::to_string(i) +
                                  " sums to " + format_double(row_sum) +
                                  ", not stochastic within 1e-9");
        total += row_entropy;
    }
    return total / static_cast<double>(a.rows());
}

DiagnosticsRecord snapshot(std::uint64_t step, const StepReport& report,
                           const Matrix& z_repr, const Matrix& a, bool full_spectrum) {
    DiagnosticsRecord rec;
    rec.step = step;
    rec.loss = report.loss_after;
    rec.grad_norm = report.grad_norm;
    rec.lambda_min = report.lambda_min_est;
    rec.escape_fired = report.escape_fired;

    const SingularSpectrum repr_spectrum = singular_values(z_repr);
    rec.erank_repr = effective_rank(repr_spectrum);
    const SingularSpectrum attn_spectrum = singular_values(a);
    rec.erank_attn = effective_rank(attn_spectrum);
    rec.nuclear_attn = nuclear_from(attn_spectrum);
    rec.attn_entropy = attention_entropy(a);
    if (full_spectrum) rec.spectrum_repr = repr_spectrum;
    return rec;
}

bool rank_collapse_flag(const std::vector<DiagnosticsRecord>& history, std::size_t window,
                        double drop_frac) {
    if (history.empty()) throw ValidationError("rank collapse flag: empty history");
    if (window < 1) throw ValidationError("rank collapse flag: window must be at least 1");
    if (!(drop_frac > 0.0) || !(drop_frac < 1.0))
        throw ValidationError("rank collapse flag: drop_frac must lie strictly in (0, 1)");

    double global_max = -std::numeric_limits<double>::infinity();
    for (const DiagnosticsRecord& r : history)
        if (r.erank_repr) global_max = std::max(global_max, *r.erank_repr);
    if (!std::isfinite(global_max)) return false;  // no rank data anywhere

    const std::size_t tail = std::min(window, history.size());
    double tail_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = history.size() - tail; i < history.size(); ++i)
        if (history[i].erank_repr) tail_min = std::min(tail_min, *history[i].erank_repr);
    if (!std::isfinite(tail_min)) return false;
    return tail_min < drop_frac * global_max;
}

void export_diagnostics(const std::vector<DiagnosticsRecord>& history,
                        const std::string& out_dir) {
    const std::string metrics_path = out_dir + "/metrics.csv";
    std::ofstream metrics(metrics_path);
    if (!metrics.is_open())
        throw IoError("cannot open " + metrics_path + " for writing");
    metrics << kMetricsHeader << "\n";
    for (const DiagnosticsRecord& r : history) {
        metrics << r.step << ',' << format_double(r.loss) << ','
                << format_double(r.grad_norm) << ',' << format_optional(r.lambda_min) << ','
                << (r.escape_fired ? '1' : '0') << ',' << format_optional(r.erank_repr)
                << ',' << format_optional(r.erank_attn) << ','
                << format_optional(r.nuclear_attn) << ',' << format_optional(r.attn_entropy)
                << "\n";
    }
    metrics.flush();
    if (!metrics.good()) throw IoError("write failed for " + metrics_path);

    for (const DiagnosticsRecord& r : history) {
        if (!r.spectrum_repr) continue;
        const std::string path = out_dir + "/spectrum_" + std::to_string(r.step) + ".csv";
        std::ofstream spec(path);
        if (!spec.is_open()) throw IoError("cannot open " + path + " for writing");
        spec << "index,sigma\n";
        for (std::size_t i = 0; i < r.spectrum_repr->values.size(); ++i)
            spec << i << ',' << format_double(r.spectrum_repr->values[i]) << "\n";
        spec.flush();
        if (!spec.good()) throw IoError("write failed for " + path);
    }
}

std::vector<DiagnosticsRecord> import_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    if (line == std::string(kMetricsHeader) + "\r") line.pop_back();
    if (line != kMetricsHeader)
        throw IoError(path + ": unexpected header '" + line + "'");

    std::vector<DiagnosticsRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 9)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 9 fields, got " +
                          std::to_string(f.size()));
        DiagnosticsRecord r;
        r.step = static_cast<std::uint64_t>(parse_double(f[0], path, line_no));
        r.loss = parse_double(f[1], path, line_no);
        r.grad_norm = parse_double(f[2], path, line_no);
        if (!f[3].empty()) r.lambda_min = parse_double(f[3], path, line_no);
        if (f[4] != "0" && f[4] != "1")
            throw IoError(path + ":" + std::to_string(line_no) + ": flag must be 0 or 1");
        r.escape_fired = f[4] == "1";
        if (!f[5].empty()) r.erank_repr = parse_double(f[5], path, line_no);
        if (!f[6].empty()) r.erank_attn = parse_double(f[6], path, line_no);
        if (!f[7].empty()) r.nuclear_attn = parse_double(f[7], path, line_no);
        if (!f[8].empty()) r.attn_entropy = parse_double(f[8], path, line_no);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<double> import_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "index,sigma") throw IoError(path + ": unexpected header '" + line + "'");
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 2)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 2 fields");
        const double idx = parse_double(f[0], path, line_no);
        if (static_cast<std::size_t>(idx) != values.size())
            throw IoError(path + ":" + std::to_string(line_no) + ": indices must be dense");
        values.push_back(parse_double(f[1], path, line_no));
    }
    return values;
}

}  // namespace eeo
