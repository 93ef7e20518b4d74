#include "convkernel/data_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "convkernel/error.hpp"
#include "convkernel/random.hpp"

namespace convkernel {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV line on commas; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  // Some exports write integer ids as "12.0".
  const auto d = parse_double(s);
  if (d && std::isfinite(*d) && *d == std::floor(*d) && std::abs(*d) < 9e15) return static_cast<std::int64_t>(*d);
  return std::nullopt;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return lines;
}

bool blank(std::string_view line) { return trim(line).empty(); }

std::string hex_dump(std::string_view s) {
  std::string out;
  char buf[8];
  for (unsigned char c : s) {
    if (c >= 0x20 && c < 0x7f) {
      out.push_back(static_cast<char>(c));
    } else {
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    }
  }
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

// ---- DNT ---------------------------------------------------------------------

std::string encode_dnt(const DenseTensor& t) {
  if (t.order() < 1 || t.order() > 4) throw InvalidArgument("DNT supports orders 1-4");
  std::string out;
  out.reserve(5 + 8 * t.order() + 8 * t.size());
  out.append(kDntMagic);
  out.push_back(static_cast<char>(t.order()));
  for (std::size_t d : t.dims()) put_le<std::uint64_t>(out, d);
  for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

DenseTensor decode_dnt(std::string_view bytes, std::string_view source) {
  const std::string where(source);
  if (bytes.size() < 5 || bytes.substr(0, 4) != kDntMagic) {
    throw InvalidArgument(where + ": bad magic \"" + hex_dump(bytes.substr(0, std::min<std::size_t>(4, bytes.size()))) +
                          "\", expected \"" + std::string(kDntMagic) + "\"");
  }
  const auto order = static_cast<unsigned char>(bytes[4]);
  if (order < 1 || order > 4) {
    throw InvalidArgument(where + ": tensor order " + std::to_string(order) + " outside [1, 4]");
  }
  const std::size_t header = 5 + 8 * std::size_t{order};
  if (bytes.size() < header) throw InvalidArgument(where + ": truncated header");
  std::vector<std::size_t> dims(order);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < order; ++i) {
    const auto d = get_le<std::uint64_t>(bytes.data() + 5 + 8 * i);
    if (d == 0) throw InvalidArgument(where + ": dimension " + std::to_string(i + 1) + " is zero");
    if (count > std::numeric_limits<std::uint64_t>::max() / 8 / d) {
      throw InvalidArgument(where + ": dims overflow the addressable payload size");
    }
    count *= d;
    dims[i] = static_cast<std::size_t>(d);
  }
  const std::uint64_t payload = count * 8;
  const std::uint64_t have = bytes.size() - header;
  if (have < payload) {
    throw InvalidArgument(where + ": truncated payload, expected " + std::to_string(payload) + " bytes, found " +
                          std::to_string(have));
  }
  if (have > payload) {
    throw InvalidArgument(where + ": " + std::to_string(have - payload) + " trailing bytes after payload");
  }
  std::vector<double> data(count);
  const char* p = bytes.data() + header;
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
  return DenseTensor(std::move(dims), std::move(data));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return std::move(ss).str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("error writing " + path.string());
}

void write_dnt(const std::filesystem::path& path, const DenseTensor& t) { write_text_file(path, encode_dnt(t)); }

DenseTensor read_dnt(const std::filesystem::path& path) {
  return decode_dnt(read_text_file(path), path.string());
}

// ---- CSV series ----------------------------------------------------------------

SeriesBundle parse_csv_series(std::string_view text, CsvLayout layout, std::string_view source) {
  const std::string where(source);
  struct Row {
    std::size_t line;
    std::vector<std::string> cells;
  };
  std::vector<Row> rows;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    rows.push_back({i + 1, split_csv_line(lines[i])});
  }
  if (rows.empty()) throw InvalidArgument(where + ": no data rows");

  auto numeric_row = [](const Row& r) {
    return std::all_of(r.cells.begin(), r.cells.end(), [](const std::string& c) { return parse_double(c).has_value(); });
  };
  if (!numeric_row(rows.front()) && rows.size() > 1) rows.erase(rows.begin());

  const std::size_t width = rows.front().cells.size();
  std::vector<double> values;
  values.reserve(rows.size() * width);
  for (const Row& r : rows) {
    if (r.cells.size() != width) {
      throw InvalidArgument(where + ": ragged row at line " + std::to_string(r.line) + " (" +
                            std::to_string(r.cells.size()) + " cells, expected " + std::to_string(width) + ")");
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_double(r.cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw InvalidArgument(where + ": non-numeric cell \"" + r.cells[c] + "\" at line " + std::to_string(r.line) +
                              ", column " + std::to_string(c + 1));
      }
      values.push_back(*v);
    }
  }

  if (layout == CsvLayout::univariate) {
    if (rows.size() != 1 && width != 1) {
      throw InvalidArgument(where + ": univariate input must be a single row or a single column, got " +
                            std::to_string(rows.size()) + "x" + std::to_string(width));
    }
    const std::size_t n = values.size();
    return SeriesBundle(Regime::univariate, DenseTensor({n}, std::move(values)));
  }
  return SeriesBundle(Regime::multivariate, DenseTensor({rows.size(), width}, std::move(values)));
}

SeriesBundle read_csv_series(const std::filesystem::path& path, CsvLayout layout) {
  return parse_csv_series(read_text_file(path), layout, path.string());
}

DenseTensor read_series_file(const std::filesystem::path& path) {
  if (path.extension() == ".dnt") return read_dnt(path);
  const std::string text = read_text_file(path);
  // A single row or column reads as one series; anything else as rows of series.
  SeriesBundle b = parse_csv_series(text, CsvLayout::rows_are_series, path.string());
  const DenseTensor& d = b.data();
  if (d.rows() == 1) return DenseTensor({d.cols()}, d.storage());
  if (d.cols() == 1) return DenseTensor({d.rows()}, d.storage());
  return d;
}

// ---- trips ---------------------------------------------------------------------------

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  s = trim(s);
  int y, mo, d, h, mi, sec;
  if (!digits(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !digits(s, 5, 2, mo) || s[7] != '-' ||
      !digits(s, 8, 2, d) || (s[10] != ' ' && s[10] != 'T' && s[10] != 't') || !digits(s, 11, 2, h) ||
      s[13] != ':' || !digits(s, 14, 2, mi) || s[16] != ':' || !digits(s, 17, 2, sec)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;

  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t frac = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == frac) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    const char z = s[pos];
    if ((z == 'Z' || z == 'z') && pos + 1 == s.size()) {
      offset = 0;
    } else if ((z == '+' || z == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
      int oh, om;
      if (!digits(s, pos + 1, 2, oh) || !digits(s, pos + 4, 2, om) || oh > 23 || om > 59) return std::nullopt;
      offset = (z == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    } else {
      return std::nullopt;
    }
  }
  const std::int64_t days = sys_days(ymd).time_since_epoch().count();
  return days * 86400 + h * 3600 + mi * 60 + sec - offset;
}

std::string format_timestamp(std::int64_t seconds) {
  using namespace std::chrono;
  const std::int64_t day_count = seconds >= 0 ? seconds / 86400 : -((-seconds + 86399) / 86400);
  const std::int64_t rem = seconds - day_count * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

TripAggregator::TripAggregator(std::size_t zones, std::int64_t start, std::size_t hours)
    : zones_(zones), start_(start), hours_(hours) {
  if (zones < 1) throw InvalidArgument("zone count must be at least 1");
  if (hours < 1) throw InvalidArgument("hour count must be at least 1");
  counts_ = DenseTensor({zones, zones, hours});
}

void TripAggregator::add(const TripRecord& r) {
  const auto z = static_cast<std::int64_t>(zones_);
  if (r.pickup_zone < 0 || r.pickup_zone >= z || r.dropoff_zone < 0 || r.dropoff_zone >= z) {
    throw InvalidArgument("zone id out of range [0, " + std::to_string(zones_) + "): pickup " +
                          std::to_string(r.pickup_zone) + ", dropoff " + std::to_string(r.dropoff_zone));
  }
  const std::int64_t dt = r.pickup_time - start_;
  if (dt < 0 || dt / 3600 >= static_cast<std::int64_t>(hours_)) {
    ++skipped_;
    return;
  }
  counts_.at(static_cast<std::size_t>(r.pickup_zone), static_cast<std::size_t>(r.dropoff_zone),
             static_cast<std::size_t>(dt / 3600)) += 1.0;
  ++accepted_;
}

void TripAggregator::merge(const TripAggregator& other) {
  if (other.zones_ != zones_ || other.start_ != start_ || other.hours_ != hours_) {
    throw InvalidArgument("cannot merge trip aggregates over different windows");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  accepted_ += other.accepted_;
  skipped_ += other.skipped_;
}

TripAggregate aggregate_trips(const std::vector<TripRecord>& records, std::size_t zones, std::int64_t start,
                              std::size_t hours) {
  TripAggregator agg(zones, start, hours);
  for (const auto& r : records) agg.add(r);
  return {agg.counts(), agg.accepted(), agg.skipped(), 0, {}};
}

TripAggregate aggregate_trip_csv(std::istream& in, std::size_t zones, std::int64_t start, std::size_t hours,
                                 const TripSchema& schema) {
  TripAggregator agg(zones, start, hours);
  TripAggregate out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!blank(line)) header = split_csv_line(line);
  }
  if (header.empty()) throw InvalidArgument("trip CSV has no header row");

  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto pu = find(schema.pickup_zone);
  const auto dz = find(schema.dropoff_zone);
  std::optional<std::size_t> tc;
  for (const auto& name : schema.pickup_time) {
    if ((tc = find(name))) break;
  }
  if (!pu || !dz || !tc) {
    std::string names;
    for (const auto& n : schema.pickup_time) names += (names.empty() ? "" : "/") + n;
    throw InvalidArgument("trip CSV header lacks required columns " + schema.pickup_zone + ", " +
                          schema.dropoff_zone + ", " + names);
  }
  const std::size_t need = std::max({*pu, *dz, *tc}) + 1;

  auto malformed = [&](const std::string& why) {
    ++out.malformed;
    if (out.malformed_examples.size() < 5) out.malformed_examples.push_back("line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < need) {
      malformed("expected at least " + std::to_string(need) + " cells, found " + std::to_string(cells.size()));
      continue;
    }
    const auto p = parse_int(cells[*pu]);
    const auto d = parse_int(cells[*dz]);
    const auto t = parse_timestamp(cells[*tc]);
    if (!p || !d) {
      malformed("zone id is not an integer");
      continue;
    }
    if (!t) {
      malformed("unparsable timestamp \"" + cells[*tc] + "\"");
      continue;
    }
    agg.add({*p - schema.zone_offset, *d - schema.zone_offset, *t});
  }
  out.counts = agg.counts();
  out.accepted = agg.accepted();
  out.skipped = agg.skipped();
  return out;
}

// ---- synthetic data ---------------------------------------------------------------

namespace {

// A periodic profile: a few harmonics with random amplitudes and phases,
// scaled to unit peak.
std::vector<double> random_profile(std::size_t period, Rng& rng) {
  const std::size_t harmonics = std::max<std::size_t>(1, std::min<std::size_t>(3, period / 2));
  std::vector<double> amp(harmonics), phase(harmonics);
  for (std::size_t h = 0; h < harmonics; ++h) {
    amp[h] = rng.uniform(0.3, 1.0) / static_cast<double>(h + 1);
    phase[h] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  std::vector<double> p(period);
  double peak = 0.0;
  for (std::size_t t = 0; t < period; ++t) {
    double v = 0.0;
    for (std::size_t h = 0; h < harmonics; ++h) {
      v += amp[h] * std::sin(2.0 * std::numbers::pi * static_cast<double>((h + 1) * t) / static_cast<double>(period) +
                             phase[h]);
    }
    p[t] = v;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0) {
    for (double& v : p) v /= peak;
  } else {
    p.assign(period, 1.0);
  }
  return p;
}

// One periodic series of length T: sum over components of a scaled, shifted profile.
void seasonal_series(const std::vector<SeasonalComponent>& comps, const std::vector<std::vector<double>>& profiles,
                     Rng& rng, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const std::size_t period = comps[c].period;
    const double scale = comps[c].amplitude * rng.uniform(0.5, 1.5);
    const std::size_t shift = static_cast<std::size_t>(rng.below(period));
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += scale * profiles[c][(t + shift) % period];
  }
}

}  // namespace

DenseTensor synth_seasonal(const SynthConfig& cfg) {
  if (cfg.dims.empty() || cfg.dims.size() > 4) throw InvalidArgument("synthetic tensor order must be 1-4");
  for (std::size_t d : cfg.dims) {
    if (d == 0) throw InvalidArgument("synthetic tensor dims must be positive");
  }
  const std::size_t T = cfg.dims.back();
  for (const auto& c : cfg.components) {
    if (c.period < 1 || c.period >= T) {
      throw InvalidArgument("period " + std::to_string(c.period) + " must lie in [1, " + std::to_string(T) + ")");
    }
  }
  if (!(cfg.noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be non-negative");
  if (!(cfg.drift_sigma >= 0.0)) throw InvalidArgument("drift sigma must be non-negative");

  Rng rng(cfg.seed);
  DenseTensor out(cfg.dims);
  if (cfg.rank == 0) {
    std::vector<std::vector<double>> profiles;
    for (const auto& c : cfg.components) profiles.push_back(random_profile(c.period, rng));
    const std::size_t fibers = out.size() / T;
    for (std::size_t f = 0; f < fibers; ++f) {
      seasonal_series(cfg.components, profiles, rng, out.data().subspan(f * T, T));
    }
  } else {
    if (cfg.dims.size() != 3) throw InvalidArgument("the low-rank construction needs a third-order shape");
    const std::size_t M = cfg.dims[0], N = cfg.dims[1], R = cfg.rank;
    DenseTensor w = DenseTensor::matrix(M, R), u = DenseTensor::matrix(N, R), v = DenseTensor::matrix(T, R);
    for (double& x : w.data()) x = rng.normal(0.0, 1.0);
    for (double& x : u.data()) x = rng.normal(0.0, 1.0);
    std::vector<double> col(T);
    for (std::size_t r = 0; r < R; ++r) {
      std::vector<std::vector<double>> profiles;
      for (const auto& c : cfg.components) profiles.push_back(random_profile(c.period, rng));
      seasonal_series(cfg.components, profiles, rng, col);
      for (std::size_t t = 0; t < T; ++t) v.at(t, r) = col[t];
    }
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t t = 0; t < T; ++t) {
          double s = 0.0;
          for (std::size_t r = 0; r < R; ++r) s += w.at(m, r) * u.at(n, r) * v.at(t, r);
          out.at(m, n, t) = s;
        }
      }
    }
  }
  if (cfg.drift_sigma > 0.0) {
    std::vector<double> walk(T);
    for (std::size_t f = 0; f < out.size() / T; ++f) {
      double level = 0.0, mean = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        level += rng.normal(0.0, cfg.drift_sigma);
        walk[t] = level;
        mean += level;
      }
      mean /= static_cast<double>(T);
      auto fiber = out.data().subspan(f * T, T);
      for (std::size_t t = 0; t < T; ++t) fiber[t] += walk[t] - mean;
    }
  }
  if (cfg.noise_sigma > 0.0) {
    for (double& x : out.data()) x += rng.normal(0.0, cfg.noise_sigma);
  }
  return out;
}

// ---- kernel JSON ---------------------------------------------------------------------

std::string kernel_to_json(const KernelRecord& rec) {
  const SparseKernel& k = rec.kernel;
  nlohmann::json config = nlohmann::json::parse(rec.config_json.empty() ? "{}" : rec.config_json);
  std::string s = "{\n";
  s += "  \"T\": " + std::to_string(k.length) + ",\n";
  s += "  \"tau\": " + std::to_string(k.tau) + ",\n";
  s += "  \"support\": [";
  for (std::size_t i = 0; i < k.support.size(); ++i) s += (i ? ", " : "") + std::to_string(k.support[i]);
  s += "],\n  \"weights\": [";
  for (std::size_t i = 0; i < k.weights.size(); ++i) s += (i ? ", " : "") + fmt17(k.weights[i]);
  s += "],\n";
  s += "  \"loss\": " + fmt17(k.loss) + ",\n";
  s += "  \"regime\": " + nlohmann::json(rec.regime).dump() + ",\n";
  s += "  \"config\": " + config.dump() + "\n}\n";
  return s;
}

KernelRecord kernel_from_json(std::string_view text, std::string_view source) {
  const std::string where(source);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(where + ": invalid kernel JSON: " + e.what());
  }
  KernelRecord rec;
  try {
    SparseKernel& k = rec.kernel;
    k.length = j.at("T").get<std::size_t>();
    k.tau = j.at("tau").get<std::size_t>();
    k.support = j.at("support").get<std::vector<std::size_t>>();
    k.weights = j.at("weights").get<std::vector<double>>();
    k.loss = j.value("loss", 0.0);
    rec.regime = j.value("regime", std::string{});
    if (j.contains("config")) rec.config_json = j.at("config").dump();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(where + ": malformed kernel JSON: " + e.what());
  }
  const SparseKernel& k = rec.kernel;
  if (k.length < 2) throw InvalidArgument(where + ": kernel length T must be at least 2");
  if (k.support.size() != k.weights.size()) {
    throw InvalidArgument(where + ": support and weights differ in length");
  }
  for (std::size_t i = 0; i < k.support.size(); ++i) {
    if (k.support[i] < 1 || k.support[i] >= k.length) {
      throw InvalidArgument(where + ": lag " + std::to_string(k.support[i]) + " outside [1, T-1]");
    }
    if (i > 0 && k.support[i] <= k.support[i - 1]) throw InvalidArgument(where + ": support must be ascending");
    if (!std::isfinite(k.weights[i])) throw InvalidArgument(where + ": non-finite weight");
  }
  return rec;
}

void write_kernel_json(const std::filesystem::path& path, const KernelRecord& rec) {
  write_text_file(path, kernel_to_json(rec));
}

KernelRecord read_kernel_json(const std::filesystem::path& path) {
  return kernel_from_json(read_text_file(path), path.string());
}

// ---- results table ------------------------------------------------------------------

void write_results_csv(std::ostream& out, const std::vector<SeedResult>& rows) {
  // An RSE with nothing to measure (no hidden entries) is NaN; leave the cell empty.
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt17(v); };
  out << "seed,rse_observed,rse_missing,rse_all,objective,iterations,wall_seconds,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    out << r.seed << ',';
    if (r.error.empty()) {
      out << cell(r.rse_observed) << ',' << cell(r.rse_missing) << ',' << cell(r.rse_all) << ','
          << fmt17(r.objective) << ',' << r.iterations << ',';
    } else {
      out << ",,,,,";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    out << buf << ',';
    if (!err.empty()) out << '"' << err << '"';
    out << '\n';
  }
}

}  // namespace convkernel
