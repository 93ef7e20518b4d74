#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <sstream>

#include "convkernel/data_io.hpp"
#include "convkernel/error.hpp"
#include "convkernel/tensorfact.hpp"
#include "test_support.hpp"

using namespace convkernel;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("convkernel_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                   ::testing::UnitTest::GetInstance()->current_test_info()->name());
  fs::create_directories(p);
  return p;
}

bool bit_equal(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

std::string expect_invalid(const std::function<void()>& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected InvalidArgument";
  return {};
}

}  // namespace

TEST(Dnt, RoundTripIsBitExactForAllOrders) {
  Rng rng(1);
  const fs::path dir = scratch_dir();
  for (const std::vector<std::size_t>& dims :
       std::vector<std::vector<std::size_t>>{{7}, {2, 3}, {2, 3, 4}, {2, 1, 3, 2}}) {
    DenseTensor t = ck_test::random_tensor(rng, dims);
    t[0] = -0.0;
    t[t.size() - 1] = 1e-310;  // subnormal
    write_dnt(dir / "t.dnt", t);
    EXPECT_TRUE(bit_equal(read_dnt(dir / "t.dnt"), t));
    EXPECT_TRUE(bit_equal(decode_dnt(encode_dnt(t)), t));
  }
  fs::remove_all(dir);
}

TEST(Dnt, HeaderLayout) {
  const DenseTensor t({2}, {1.0, -2.0});
  const std::string b = encode_dnt(t);
  ASSERT_EQ(b.size(), 4u + 1u + 8u + 16u);
  EXPECT_EQ(b.substr(0, 4), "DNT1");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 2);
  for (int i = 6; i < 13; ++i) EXPECT_EQ(b[i], 0);
  // 1.0 = 0x3FF0000000000000 little-endian.
  EXPECT_EQ(static_cast<unsigned char>(b[13 + 7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(b[13 + 6]), 0xF0);
}

TEST(Dnt, Errors) {
  const std::string good = encode_dnt(DenseTensor({2, 2}, {1, 2, 3, 4}));
  EXPECT_NE(expect_invalid([&] { decode_dnt("XNT1" + good.substr(4)); }).find("expected \"DNT1\""), std::string::npos);
  EXPECT_NE(expect_invalid([&] { decode_dnt(good.substr(0, good.size() - 3)); }).find("truncated"), std::string::npos);
  EXPECT_NE(expect_invalid([&] { decode_dnt(good + "x"); }).find("trailing"), std::string::npos);
  std::string bad_order = good;
  bad_order[4] = 5;
  EXPECT_NE(expect_invalid([&] { decode_dnt(bad_order); }).find("order"), std::string::npos);
  std::string huge = "DNT1";
  huge.push_back(2);
  for (int i = 0; i < 16; ++i) huge.push_back(static_cast<char>(0xff));
  EXPECT_NE(expect_invalid([&] { decode_dnt(huge); }).find("overflow"), std::string::npos);
  EXPECT_THROW(read_dnt("/nonexistent/file.dnt"), IoError);
}

TEST(CsvSeries, Layouts) {
  const SeriesBundle u = parse_csv_series("1,2,3\n", CsvLayout::univariate);
  EXPECT_EQ(u.kind(), Regime::univariate);
  EXPECT_EQ(u.length(), 3u);
  const SeriesBundle col = parse_csv_series("value\n1\n2\n3\n4\n", CsvLayout::univariate);
  EXPECT_EQ(col.data().storage(), (std::vector<double>{1, 2, 3, 4}));
  const SeriesBundle m = parse_csv_series("a,b,c\n1,2,3\n1,2,3\n", CsvLayout::rows_are_series);
  EXPECT_EQ(m.kind(), Regime::multivariate);
  EXPECT_EQ(m.data().dims(), (std::vector<std::size_t>{2, 3}));
}

TEST(CsvSeries, Errors) {
  EXPECT_NE(expect_invalid([] { parse_csv_series("1,2,3\n4,5\n", CsvLayout::rows_are_series); }).find("line 2"),
            std::string::npos);
  const std::string msg = expect_invalid([] { parse_csv_series("1,2,3\n4,x,6\n", CsvLayout::rows_are_series); });
  EXPECT_NE(msg.find("line 2"), std::string::npos);
  EXPECT_NE(msg.find("column 2"), std::string::npos);
  expect_invalid([] { parse_csv_series("1,2\n3,4\n", CsvLayout::univariate); });
  expect_invalid([] { parse_csv_series("\n\n", CsvLayout::univariate); });
}

TEST(Timestamps, Formats) {
  EXPECT_EQ(parse_timestamp("1970-01-01 00:00:00"), 0);
  EXPECT_EQ(parse_timestamp("1970-01-02T00:00:01Z"), 86401);
  EXPECT_EQ(parse_timestamp("2024-01-01T01:30:00+01:00"), parse_timestamp("2024-01-01 00:30:00"));
  EXPECT_EQ(parse_timestamp("2024-02-29 12:00:00.75"), parse_timestamp("2024-02-29 12:00:00"));
  EXPECT_EQ(*parse_timestamp("2024-01-01 00:00:00"), 1704067200);
  EXPECT_FALSE(parse_timestamp("2023-02-29 00:00:00"));
  EXPECT_FALSE(parse_timestamp("2024-01-01"));
  EXPECT_FALSE(parse_timestamp("2024-01-01 25:00:00"));
  EXPECT_EQ(format_timestamp(1704067200), "2024-01-01T00:00:00Z");
}

TEST(Trips, SingleTripAndHalfOpenWindow) {
  const std::int64_t start = *parse_timestamp("2024-01-01 00:00:00");
  const TripAggregate a = aggregate_trips({{2, 5, start + 1800}}, 6, start, 3);
  EXPECT_EQ(a.accepted, 1u);
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    EXPECT_EQ(a.counts[i], i == (2 * 6 + 5) * 3 ? 1.0 : 0.0);
  }
  const TripAggregate b = aggregate_trips({{0, 0, start + 3 * 3600}, {0, 0, start - 1}}, 1, start, 3);
  EXPECT_EQ(b.accepted, 0u);
  EXPECT_EQ(b.skipped, 2u);
  EXPECT_THROW(aggregate_trips({{6, 0, start}}, 6, start, 3), InvalidArgument);
  EXPECT_THROW(aggregate_trips({{0, -1, start}}, 6, start, 3), InvalidArgument);
}

TEST(Trips, TenTripsOverTwoHours) {
  const std::int64_t start = 1000000;
  std::vector<TripRecord> r;
  for (int i = 0; i < 10; ++i) r.push_back({1, 0, start + i * 720});  // every 12 minutes
  const TripAggregate a = aggregate_trips(r, 2, start, 2);
  EXPECT_EQ(a.counts.at(1, 0, 0), 5.0);
  EXPECT_EQ(a.counts.at(1, 0, 1), 5.0);
  EXPECT_EQ(a.accepted, 10u);
}

TEST(Trips, CsvWithTlcHeaders) {
  std::istringstream in(
      "VendorID,tpep_pickup_datetime,tpep_dropoff_datetime,PULocationID,DOLocationID\n"
      "1,2024-01-01 00:10:00,2024-01-01 00:20:00,1,2\n"
      "2,2024-01-01 01:59:59,2024-01-01 02:20:00,2,2\n"
      "2,not a time,2024-01-01 02:20:00,2,2\n"
      "1,2024-01-01 02:00:00,2024-01-01 02:30:00,3,1\n"
      "1,2024-01-01 00:05:00,2024-01-01 00:30:00,x,1\n");
  TripSchema schema;
  schema.zone_offset = 1;
  const TripAggregate a = aggregate_trip_csv(in, 3, *parse_timestamp("2024-01-01T00:00:00Z"), 2, schema);
  EXPECT_EQ(a.accepted, 2u);
  EXPECT_EQ(a.skipped, 1u);
  EXPECT_EQ(a.malformed, 2u);
  EXPECT_EQ(a.counts.at(0, 1, 0), 1.0);
  EXPECT_EQ(a.counts.at(1, 1, 1), 1.0);
  double total = 0.0;
  for (double v : a.counts.data()) total += v;
  EXPECT_EQ(total, static_cast<double>(a.accepted));
  ASSERT_FALSE(a.malformed_examples.empty());
  EXPECT_NE(a.malformed_examples[0].find("line 4"), std::string::npos);

  std::istringstream missing("a,b,c\n1,2,3\n");
  EXPECT_THROW(aggregate_trip_csv(missing, 3, 0, 2), InvalidArgument);
}

TEST(Trips, MergeAddsCounts) {
  TripAggregator a(2, 0, 2), b(2, 0, 2);
  a.add({0, 1, 10});
  b.add({0, 1, 20});
  b.add({1, 1, 4000});
  a.merge(b);
  EXPECT_EQ(a.counts().at(0, 1, 0), 2.0);
  EXPECT_EQ(a.accepted(), 3u);
  EXPECT_THROW(a.merge(TripAggregator(2, 0, 3)), InvalidArgument);
}

TEST(Synth, ExactPeriodAndDeterminism) {
  SynthConfig cfg;
  cfg.dims = {48};
  cfg.components = {{12, 1.0}};
  cfg.seed = 3;
  const DenseTensor x = synth_seasonal(cfg);
  for (std::size_t t = 0; t < 48; ++t) EXPECT_EQ(x[t], x[(t + 12) % 48]);
  EXPECT_EQ(synth_seasonal(cfg), x);

  cfg.dims = {3, 4, 48};
  cfg.components = {{6, 1.0}, {24, 0.5}};
  cfg.noise_sigma = 0.1;
  const DenseTensor y = synth_seasonal(cfg);
  EXPECT_EQ(synth_seasonal(cfg), y);
  cfg.seed = 4;
  EXPECT_FALSE(synth_seasonal(cfg) == y);

  cfg.components = {{48, 1.0}};
  EXPECT_THROW(synth_seasonal(cfg), InvalidArgument);
  cfg.components = {{6, 1.0}};
  cfg.rank = 2;
  cfg.dims = {4, 48};
  EXPECT_THROW(synth_seasonal(cfg), InvalidArgument);
}

TEST(Synth, DriftBreaksExactRepetition) {
  SynthConfig cfg;
  cfg.dims = {2, 96};
  cfg.components = {{24, 1.0}};
  cfg.seed = 9;
  const DenseTensor base = synth_seasonal(cfg);
  cfg.drift_sigma = 0.01;
  const DenseTensor drifted = synth_seasonal(cfg);
  EXPECT_EQ(synth_seasonal(cfg), drifted);
  double mean = 0.0, moved = 0.0;
  for (std::size_t t = 0; t < 96; ++t) {
    const double d = drifted.at(0, t) - base.at(0, t);
    mean += d;
    moved = std::max(moved, std::abs(d));
  }
  EXPECT_NEAR(mean / 96.0, 0.0, 1e-12);  // the walk is mean-removed
  EXPECT_GT(moved, 0.0);
  cfg.drift_sigma = -1.0;
  EXPECT_THROW(synth_seasonal(cfg), InvalidArgument);
}

TEST(Synth, LagPeriodKernelHasZeroLoss) {
  SynthConfig cfg;
  cfg.dims = {2, 3, 60};
  cfg.components = {{10, 1.0}, {20, 0.4}};
  cfg.seed = 11;
  const SeriesBundle b(Regime::tensor3, synth_seasonal(cfg));
  SparseKernel k;
  k.length = 60;
  k.support = {20};
  k.weights = {1.0};
  EXPECT_NEAR(evaluate_loss(b, k), 0.0, 1e-20);
}

TEST(Synth, RankConstructionIsRecoveredByFactorization) {
  SynthConfig cfg;
  cfg.dims = {5, 6, 40};
  cfg.components = {{10, 1.0}, {20, 0.5}};
  cfg.seed = 5;
  cfg.rank = 2;
  const DenseTensor y = synth_seasonal(cfg);
  TfConfig tf;
  tf.outer_iters = 300;
  tf.outer_tol = 0.0;
  const ObservationMask all({5, 6, 40}, true);
  const FitReport fit = tf_fit(y, all, 2, 0.0, {}, tf);
  EXPECT_LE(fit.objective_history.back(), 1e-8 * frobenius_norm_sq(y.data()));
}

TEST(KernelJson, RoundTripAndFieldOrder) {
  KernelRecord rec;
  rec.kernel.length = 150;
  rec.kernel.tau = 2;
  rec.kernel.support = {1, 149};
  rec.kernel.weights = {0.1 + 0.2, 1.0 / 3.0};
  rec.kernel.loss = 24900.123456789;
  rec.regime = "tensor3";
  rec.config_json = R"({"tau":2})";
  const std::string text = kernel_to_json(rec);
  const auto pos = [&](const char* key) { return text.find(key); };
  EXPECT_LT(pos("\"T\""), pos("\"tau\""));
  EXPECT_LT(pos("\"tau\""), pos("\"support\""));
  EXPECT_LT(pos("\"support\""), pos("\"weights\""));
  EXPECT_LT(pos("\"weights\""), pos("\"loss\""));
  EXPECT_LT(pos("\"loss\""), pos("\"regime\""));
  EXPECT_LT(pos("\"regime\""), pos("\"config\""));
  EXPECT_NE(text.find("0.30000000000000004"), std::string::npos);
  const KernelRecord back = kernel_from_json(text);
  EXPECT_EQ(back.kernel.weights, rec.kernel.weights);
  EXPECT_EQ(back.kernel.support, rec.kernel.support);
  EXPECT_EQ(back.kernel.loss, rec.kernel.loss);
  EXPECT_EQ(back.kernel.length, 150u);
  EXPECT_EQ(back.regime, "tensor3");
}

TEST(KernelJson, Validation) {
  expect_invalid([] { kernel_from_json("{"); });
  expect_invalid([] { kernel_from_json(R"({"T":5,"tau":1,"support":[5],"weights":[1]})"); });
  expect_invalid([] { kernel_from_json(R"({"T":5,"tau":1,"support":[1,2],"weights":[1]})"); });
  expect_invalid([] { kernel_from_json(R"({"T":5,"tau":2,"support":[2,1],"weights":[1,1]})"); });
  expect_invalid([] { kernel_from_json(R"({"tau":1,"support":[1],"weights":[1]})"); });
}

TEST(ResultsCsv, Layout) {
  std::ostringstream out;
  SeedResult ok;
  ok.seed = 3;
  ok.rse_observed = 1.5;
  ok.rse_missing = 2.5;
  ok.rse_all = 2.0;
  ok.objective = 10.0;
  ok.iterations = 7;
  SeedResult bad;
  bad.seed = 4;
  bad.error = "conjugate gradient breakdown";
  write_results_csv(out, {ok, bad});
  std::istringstream in(out.str());
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_EQ(header, "seed,rse_observed,rse_missing,rse_all,objective,iterations,wall_seconds,error");
  EXPECT_EQ(row1.rfind("3,1.5,2.5,2,10,7,", 0), 0u);
  EXPECT_EQ(row2.rfind("4,,,,,,", 0), 0u);
  EXPECT_NE(row2.find("breakdown"), std::string::npos);
}
