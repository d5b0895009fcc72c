#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eeo/matrix.hpp"
#include "eeo/model.hpp"

namespace eeo {

// A loaded time series: rows are time steps, columns are variables.
struct SeriesData {
    std::vector<std::string> columns;
    Matrix values;  // T x D
};

// Bundled synthetic benchmark: three variables, each a two-tone sine mixture
// with incommensurate periods plus seeded Gaussian noise. Amplitudes and
// phases are drawn once from the data stream of `seed`; the result is fully
// deterministic. Returns a T x 3 series.
Matrix gen_sine_mixture(std::size_t t_len, std::uint64_t seed);

// Reads a headered CSV. The first column is treated as an ignorable
// timestamp iff its first data cell does not parse as a number; a purely
// numeric first column is kept as data. Any other non-numeric cell is an
// error naming the row and column.
SeriesData load_series_csv(const std::string& path);

// Writes a series in the exact format load_series_csv reads (shortest
// round-trip decimals). with_timestamp adds a leading synthetic date column.
void save_series_csv(const std::string& path, const SeriesData& series,
                     bool with_timestamp = false);

// Per-variable normalization statistics, estimated on the train region only.
struct SplitStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // clamped to 1 when below 1e-12
};

// Chronologically split, train-normalized sliding windows. Window inputs are
// D x lookback, targets D x horizon. The train split advances by
// train_stride; val and test advance by the horizon so their targets tile
// without overlap.
struct WindowedDataset {
    std::vector<TSWindow> train;
    std::vector<TSWindow> val;
    std::vector<TSWindow> test;
    SplitStats stats;
    std::size_t d = 0;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::size_t train_len = 0;  // rows per split, pre-windowing
    std::size_t val_len = 0;
    std::size_t test_len = 0;
};

// Splits the series BEFORE windowing (no leakage), z-normalizes every split
// with the train statistics, then cuts windows. Split lengths are
// floor(fraction * T) for train and val, remainder for test; fractions must
// sum to 1 within 1e-9. A split with a positive fraction whose region is
// shorter than lookback + horizon is an error naming the split; zero
// fractions skip the split.
WindowedDataset window_split(const Matrix& series, std::size_t lookback,
                             std::size_t horizon, std::size_t train_stride,
                             const std::array<double, 3>& split);

// Composed loader: read the CSV (timestamp column skipped if present) and
// split/normalize/window it as window_split does.
WindowedDataset load_csv_windows(const std::string& path, std::size_t lookback,
                                 std::size_t horizon, std::size_t train_stride,
                                 const std::array<double, 3>& split);

}  // namespace eeo
