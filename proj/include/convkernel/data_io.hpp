#pragma once

// File formats and data sources: the DNT binary tensor format, CSV series,
// taxi-style trip records, synthetic seasonal tensors, kernel JSON and the
// factorization results table.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "convkernel/kernel_learn.hpp"
#include "convkernel/nnsp.hpp"
#include "convkernel/tensor.hpp"

namespace convkernel {

// ---- DNT ---------------------------------------------------------------------
//
// Layout, all little-endian:
//   "DNT1" | u8 order (1..4) | order x u64 dims | product(dims) x f64, row-major
// Anything after the payload is rejected.

inline constexpr std::string_view kDntMagic = "DNT1";

std::string encode_dnt(const DenseTensor& t);
/// `source` only labels error messages.
DenseTensor decode_dnt(std::string_view bytes, std::string_view source = "<memory>");

void write_dnt(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor read_dnt(const std::filesystem::path& path);

// ---- CSV series ----------------------------------------------------------------

enum class CsvLayout {
  univariate,       // one row, or one column, of values
  rows_are_series,  // N rows of T values
};

/// Rectangular numeric CSV with an optional single header row (detected when
/// the first row has a non-numeric cell and the rest do not).
SeriesBundle parse_csv_series(std::string_view text, CsvLayout layout, std::string_view source = "<memory>");
SeriesBundle read_csv_series(const std::filesystem::path& path, CsvLayout layout);

/// Loads a series bundle from .csv (rows are series, or univariate for a single
/// row/column) or .dnt (order decides the regime).
DenseTensor read_series_file(const std::filesystem::path& path);

// ---- trips -------------------------------------------------------------------------

/// Seconds since 1970-01-01T00:00:00Z. Accepts "YYYY-MM-DD HH:MM:SS" (taken as
/// UTC) and RFC 3339 ("YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)").
/// Fractional seconds are truncated.
std::optional<std::int64_t> parse_timestamp(std::string_view s);
std::string format_timestamp(std::int64_t seconds);

struct TripRecord {
  std::int64_t pickup_zone = 0;
  std::int64_t dropoff_zone = 0;
  std::int64_t pickup_time = 0;  // seconds since epoch, UTC
};

/// Counts trips per (pickup zone, dropoff zone, hour) into a zones x zones x hours
/// tensor. Hour bucket t covers [start + 3600 t, start + 3600 (t + 1)).
class TripAggregator {
 public:
  TripAggregator(std::size_t zones, std::int64_t start, std::size_t hours);

  /// Trips outside the time window are counted as skipped. A zone id outside
  /// [0, zones) throws InvalidArgument.
  void add(const TripRecord& r);
  /// Adds counts from another aggregator over the same window.
  void merge(const TripAggregator& other);

  const DenseTensor& counts() const noexcept { return counts_; }
  std::size_t accepted() const noexcept { return accepted_; }
  std::size_t skipped() const noexcept { return skipped_; }

 private:
  std::size_t zones_;
  std::int64_t start_;
  std::size_t hours_;
  DenseTensor counts_;
  std::size_t accepted_ = 0;
  std::size_t skipped_ = 0;
};

/// Column names of a trip CSV. The first pickup-time name present in the header
/// is used. Defaults follow the NYC TLC trip record files.
struct TripSchema {
  std::string pickup_zone = "PULocationID";
  std::string dropoff_zone = "DOLocationID";
  std::vector<std::string> pickup_time = {"tpep_pickup_datetime", "lpep_pickup_datetime", "pickup_datetime"};
  /// Subtracted from every zone id (TLC zone ids start at 1).
  std::int64_t zone_offset = 0;
};

struct TripAggregate {
  DenseTensor counts;
  std::size_t accepted = 0;
  std::size_t skipped = 0;    // well-formed, outside the time window
  std::size_t malformed = 0;  // unparsable rows
  std::vector<std::string> malformed_examples;  // first few, with line numbers
};

TripAggregate aggregate_trips(const std::vector<TripRecord>& records, std::size_t zones, std::int64_t start,
                              std::size_t hours);
TripAggregate aggregate_trip_csv(std::istream& in, std::size_t zones, std::int64_t start, std::size_t hours,
                                 const TripSchema& schema = {});

// ---- synthetic data ---------------------------------------------------------------

struct SeasonalComponent {
  std::size_t period = 0;
  double amplitude = 0.0;
};

struct SynthConfig {
  std::vector<std::size_t> dims;  // order 1-4, time axis last
  std::vector<SeasonalComponent> components;
  double noise_sigma = 0.0;
  /// Step size of a per-fiber Gaussian random walk (mean removed) added before
  /// the noise. Breaks exact repetition from one long cycle to the next.
  double drift_sigma = 0.0;
  std::uint64_t seed = 0;
  /// 0: every fiber is its own mix of the seasonal profiles. R > 0 (order 3
  /// only): a sum of R outer products whose temporal factors are periodic, so
  /// the CP rank is at most R.
  std::size_t rank = 0;
};

/// Seasonal tensor. In fiber mode, each component has one profile of length
/// `period` (a few random harmonics, normalised to unit peak) and each fiber
/// gets its own phase shift and scaling of it; Gaussian noise is added last.
DenseTensor synth_seasonal(const SynthConfig& cfg);

// ---- kernel JSON --------------------------------------------------------------------

struct KernelRecord {
  SparseKernel kernel;
  std::string regime;
  /// Free-form settings echoed into the file, as a JSON object text.
  std::string config_json = "{}";
};

/// Field order: T, tau, support, weights, loss, regime, config. Weights and
/// loss carry 17 significant digits.
std::string kernel_to_json(const KernelRecord& rec);
KernelRecord kernel_from_json(std::string_view text, std::string_view source = "<memory>");
void write_kernel_json(const std::filesystem::path& path, const KernelRecord& rec);
KernelRecord read_kernel_json(const std::filesystem::path& path);

// ---- results table ------------------------------------------------------------------

struct SeedResult {
  std::uint64_t seed = 0;
  double rse_observed = 0.0;
  double rse_missing = 0.0;
  double rse_all = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
  std::string error;  // non-empty when the seed failed
};

/// Header plus one row per result, in the order given.
void write_results_csv(std::ostream& out, const std::vector<SeedResult>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace convkernel
