#include "eeo/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eeo/errors.hpp"
#include "eeo/rng.hpp"

namespace eeo {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool parse_cell(const std::string& field, double& out) {
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end && !field.empty();
}

std::vector<std::string> split_line(const std::string& line) {
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

std::string chomp(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace

Matrix gen_sine_mixture(std::size_t t_len, std::uint64_t seed) {
    if (t_len == 0) throw ValidationError("sine mixture: length must be at least 1");
    // Two tones per variable; the period pairs are mutually irrational-ish so
    // the series never settles into a short cycle.
    static constexpr double kPeriods[3][2] = {
        {16.0, 37.41}, {23.17, 53.0}, {11.73, 29.0}};
    Rng rng = Rng::stream(seed, stream::kData, 0);
    double amp[3][2], phase[3][2];
    for (std::size_t v = 0; v < 3; ++v)
        for (std::size_t k = 0; k < 2; ++k) {
            amp[v][k] = 0.5 + rng.uniform();
            phase[v][k] = 2.0 * kPi * rng.uniform();
        }
    Matrix out(t_len, 3);
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t v = 0; v < 3; ++v) {
            double x = 0.0;
            for (std::size_t k = 0; k < 2; ++k)
                x += amp[v][k] *
                     std::sin(2.0 * kPi * static_cast<double>(t) / kPeriods[v][k] +
                              phase[v][k]);
            out(t, v) = x + 0.1 * rng.gauss();
        }
    return out;
}

SeriesData load_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    const std::vector<std::string> header = split_line(chomp(line));
    if (header.empty()) throw IoError(path + ": empty header");

    std::vector<std::vector<double>> rows;
    bool skip_first_col = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string clean = chomp(line);
        if (clean.empty()) continue;
        const std::vector<std::string> fields = split_line(clean);
        if (fields.size() != header.size())
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));
        if (rows.empty()) {
            // Timestamp sniffing on the first data row only: a non-numeric
            // leading cell marks column 0 as an ignorable timestamp.
            double probe = 0.0;
            skip_first_col = !parse_cell(fields[0], probe);
            if (skip_first_col && header.size() < 2)
                throw IoError(path + ": no numeric columns after the timestamp");
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = skip_first_col ? 1 : 0; c < fields.size(); ++c) {
            double value = 0.0;
            if (!parse_cell(fields[c], value))
                throw IoError(path + ":" + std::to_string(line_no) + ": column " +
                              std::to_string(c + 1) + ": non-numeric cell '" + fields[c] +
                              "'");
            if (!std::isfinite(value))
                throw IoError(path + ":" + std::to_string(line_no) + ": column " +
                              std::to_string(c + 1) + ": non-finite value");
            row.push_back(value);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no data rows");

    SeriesData out;
    for (std::size_t c = skip_first_col ? 1 : 0; c < header.size(); ++c)
        out.columns.push_back(header[c]);
    const std::size_t d = out.columns.size();
    Matrix values(rows.size(), d);
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t c = 0; c < d; ++c) values(t, c) = rows[t][c];
    out.values = std::move(values);
    return out;
}

void save_series_csv(const std::string& path, const SeriesData& series,
                     bool with_timestamp) {
    if (series.columns.size() != series.values.cols())
        throw ShapeError("save_series_csv: header names do not match column count");
    std::ofstream out(path);
    if (!out.is_open()) throw IoError("cannot open " + path + " for writing");
    if (with_timestamp) out << "date";
    for (std::size_t c = 0; c < series.columns.size(); ++c) {
        if (with_timestamp || c > 0) out << ',';
        out << series.columns[c];
    }
    out << "\n";
    for (std::size_t t = 0; t < series.values.rows(); ++t) {
        if (with_timestamp) out << "t" << t << ',';
        for (std::size_t c = 0; c < series.values.cols(); ++c) {
            if (c > 0) out << ',';
            out << format_double(series.values(t, c));
        }
        out << "\n";
    }
    out.flush();
    if (!out.good()) throw IoError("write failed for " + path);
}

WindowedDataset window_split(const Matrix& series, std::size_t lookback,
                             std::size_t horizon, std::size_t train_stride,
                             const std::array<double, 3>& split) {
    if (lookback == 0 || horizon == 0)
        throw ValidationError("window_split: lookback and horizon must be at least 1");
    if (train_stride == 0) throw ValidationError("window_split: stride must be at least 1");
    if (series.rows() == 0 || series.cols() == 0)
        throw ValidationError("window_split: empty series");
    double frac_sum = 0.0;
    for (double f : split) {
        if (f < 0.0 || f > 1.0)
            throw ValidationError("window_split: split fractions must lie in [0, 1]");
        frac_sum += f;
    }
    if (std::abs(frac_sum - 1.0) > 1e-9)
        throw ValidationError("window_split: split fractions sum to " +
                              format_double(frac_sum) + ", expected 1 within 1e-9");

    const std::size_t t_total = series.rows();
    const std::size_t d = series.cols();
    WindowedDataset out;
    out.d = d;
    out.lookback = lookback;
    out.horizon = horizon;
    out.train_len = static_cast<std::size_t>(split[0] * static_cast<double>(t_total));
    out.val_len = static_cast<std::size_t>(split[1] * static_cast<double>(t_total));
    out.test_len = t_total - out.train_len - out.val_len;
    if (split[2] < 1e-12) {
        // All remainder rows belong to the trailing nonzero split.
        if (split[1] >= 1e-12) {
            out.val_len += out.test_len;
        } else {
            out.train_len += out.test_len;
        }
        out.test_len = 0;
    }

    const char* names[3] = {"train", "val", "test"};
    const std::size_t lens[3] = {out.train_len, out.val_len, out.test_len};
    const std::size_t need = lookback + horizon;
    for (std::size_t s = 0; s < 3; ++s) {
        if (split[s] >= 1e-12 && lens[s] < need)
            throw ValidationError(std::string("window_split: ") + names[s] + " split has " +
                                  std::to_string(lens[s]) + " rows, needs at least " +
                                  std::to_string(need) + " (lookback " +
                                  std::to_string(lookback) + " + horizon " +
                                  std::to_string(horizon) + ")");
    }
    if (out.train_len == 0)
        throw ValidationError("window_split: train split is empty; normalization "
                              "statistics need train data");

    out.stats.mean.assign(d, 0.0);
    out.stats.stddev.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < out.train_len; ++t) mean += series(t, c);
        mean /= static_cast<double>(out.train_len);
        double var = 0.0;
        for (std::size_t t = 0; t < out.train_len; ++t) {
            const double diff = series(t, c) - mean;
            var += diff * diff;
        }
        var /= static_cast<double>(out.train_len);
        double sd = std::sqrt(var);
        if (sd < 1e-12) sd = 1.0;
        out.stats.mean[c] = mean;
        out.stats.stddev[c] = sd;
    }

    const std::size_t offsets[3] = {0, out.train_len, out.train_len + out.val_len};
    const std::size_t strides[3] = {train_stride, horizon, horizon};
    std::vector<TSWindow>* sinks[3] = {&out.train, &out.val, &out.test};
    for (std::size_t s = 0; s < 3; ++s) {
        const std::size_t len = lens[s];
        if (len < need) continue;
        for (std::size_t start = 0; start + need <= len; start += strides[s]) {
            Matrix x(d, lookback);
            Matrix y(d, horizon);
            for (std::size_t c = 0; c < d; ++c) {
                const double mean = out.stats.mean[c];
                const double sd = out.stats.stddev[c];
                for (std::size_t k = 0; k < lookback; ++k)
                    x(c, k) = (series(offsets[s] + start + k, c) - mean) / sd;
                for (std::size_t k = 0; k < horizon; ++k)
                    y(c, k) =
                        (series(offsets[s] + start + lookback + k, c) - mean) / sd;
            }
            sinks[s]->push_back(TSWindow{std::move(x), std::move(y)});
        }
    }
    return out;
}

WindowedDataset load_csv_windows(const std::string& path, std::size_t lookback,
                                 std::size_t horizon, std::size_t train_stride,
                                 const std::array<double, 3>& split) {
    const SeriesData series = load_series_csv(path);
    return window_split(series.values, lookback, horizon, train_stride, split);
}

}  // namespace eeo
