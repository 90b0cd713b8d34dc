#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "regimes/data.hpp"
#include "regimes/error.hpp"

using namespace regimes;

namespace {

const char* kHeader = "year,week,poa_t,poa_f,lgs_t,lgs_f,hoa_t,hoa_f,lpv_t,lpv_f,hlv_t,hlv_f,phv_t,phv_f\n";

std::string row(int year, int week, double base, double fx = 25.0) {
  std::ostringstream o;
  o << year << ',' << week << ',' << base << ',' << base + 0.01 << ',' << base - 0.1 << ',' << base - 0.09 << ','
    << base + 0.1 << ',' << base + 0.11 << ',' << fx << ',' << fx + 0.1 << ',' << 13.6 << ',' << 13.7 << ','
    << 185 << ',' << 186 << '\n';
  return o.str();
}

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

QuotationWeek full_week(int week, double poa, double lgs, double hoa) {
  QuotationWeek w;
  w.when = {1821, week};
  for (int d = 0; d < 2; ++d) {
    const auto day = static_cast<QuoteDay>(d);
    w.at(Series::poa, day) = poa;
    w.at(Series::lgs, day) = lgs;
    w.at(Series::hoa, day) = hoa;
    w.at(Series::lpv, day) = 25.0 + week;
    w.at(Series::hlv, day) = 13.0 + 0.1 * week * (d + 1);
    w.at(Series::phv, day) = 185.0 - week;
  }
  return w;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind{};
}

}  // namespace

TEST(Parse, FullRowHasNoMissingFlags) {
  const auto d = parse(std::string(kHeader) + "1821,1,15.7,15.71,15.6,15.61,15.8,15.81,25.2,25.3,13.6,13.7,185,186\n");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(d[0].complete());
  EXPECT_DOUBLE_EQ(*d[0].at(Series::poa, QuoteDay::friday), 15.71);
  EXPECT_DOUBLE_EQ(*d[0].at(Series::phv, QuoteDay::tuesday), 185.0);
  EXPECT_EQ(d[0].when.label(), "1821-W01");
}

TEST(Parse, EmptyCellIsMissing) {
  const auto d = parse(std::string(kHeader) + "1821,1,15.7,,15.6,15.61,15.8,15.81,25.2,25.3,13.6,13.7,185,186\n");
  EXPECT_FALSE(d[0].at(Series::poa, QuoteDay::friday).has_value());
  EXPECT_TRUE(d[0].at(Series::poa, QuoteDay::tuesday).has_value());
  EXPECT_FALSE(d[0].complete());
}

TEST(Parse, ColumnsInAnyOrder) {
  const auto d = parse(
      "week,year,poa_f,poa_t,lgs_t,lgs_f,hoa_t,hoa_f,lpv_t,lpv_f,hlv_t,hlv_f,phv_t,phv_f\n"
      "3,1821,15.71,15.7,15.6,15.61,15.8,15.81,25.2,25.3,13.6,13.7,185,186\n");
  EXPECT_EQ(d[0].when.week, 3);
  EXPECT_DOUBLE_EQ(*d[0].at(Series::poa, QuoteDay::tuesday), 15.7);
}

TEST(Parse, WeeksOutOfOrder) {
  try {
    parse(std::string(kHeader) + row(1821, 2, 15.7) + row(1821, 1, 15.7));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("weeks out of order"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Parse, DuplicateWeekNamesTheWeek) {
  try {
    parse(std::string(kHeader) + row(1821, 5, 15.7) + row(1821, 5, 15.7));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate week 1821-W05"), std::string::npos);
  }
}

TEST(Parse, NonPositivePriceRejected) {
  EXPECT_EQ(kind_of([] { parse(std::string(kHeader) + "1821,1,0,15.7,15.6,15.61,15.8,15.81,25.2,25.3,13.6,13.7,185,186\n"); }),
            ErrorKind::data);
}

TEST(Parse, MalformedRowGivesLineNumber) {
  try {
    parse(std::string(kHeader) + row(1821, 1, 15.7) + "1821,2,abc,15.7,15.6,15.61,15.8,15.81,25.2,25.3,13.6,13.7,185,186\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(kind_of([] { parse(std::string(kHeader) + "1821,1,15.7\n"); }), ErrorKind::data);
}

TEST(Parse, EmptyInputs) {
  try {
    parse(kHeader);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no data rows"), std::string::npos);
  }
  EXPECT_EQ(kind_of([] { parse(""); }), ErrorKind::data);
}

TEST(Parse, RoundTrip) {
  const std::string text = std::string(kHeader) + row(1821, 1, 15.7) +
                           "1821,2,15.72,,15.6,15.61,15.8,15.81,25.2,25.3,13.6,13.7,185,186\n" + row(1822, 1, 15.9);
  const auto d = parse(text);
  std::ostringstream out;
  write_dataset(out, d);
  const auto again = parse(out.str());
  ASSERT_EQ(again.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(again[i].when, d[i].when);
    EXPECT_EQ(again[i].values, d[i].values);
  }
  std::ostringstream out2;
  write_dataset(out2, again);
  EXPECT_EQ(out.str(), out2.str());
}

TEST(Impute, MidpointInterpolation) {
  Dataset d{full_week(1, 15.70, 15.6, 15.8), full_week(2, 15.70, 15.6, 15.8), full_week(3, 15.74, 15.6, 15.8)};
  d[1].at(Series::poa, QuoteDay::tuesday).reset();
  const auto r = impute_missing(d);
  EXPECT_NEAR(*r.data[1].at(Series::poa, QuoteDay::tuesday), 15.72, 1e-12);
  ASSERT_EQ(r.report.cells.size(), 1u);
  EXPECT_EQ(r.report.cells[0].method, ImputeMethod::interpolate);
  EXPECT_EQ(r.report.cells[0].week, (WeekRef{1821, 2}));
}

TEST(Impute, BoundaryFill) {
  Dataset d{full_week(1, 15.7, 15.6, 15.8), full_week(2, 15.71, 15.6, 15.8), full_week(3, 15.72, 15.6, 15.8)};
  d[0].at(Series::poa, QuoteDay::friday).reset();
  d[2].at(Series::hoa, QuoteDay::tuesday).reset();
  const auto r = impute_missing(d);
  EXPECT_DOUBLE_EQ(*r.data[0].at(Series::poa, QuoteDay::friday), 15.71);
  EXPECT_DOUBLE_EQ(*r.data[2].at(Series::hoa, QuoteDay::tuesday), 15.8);
  ASSERT_EQ(r.report.cells.size(), 2u);
  for (const auto& w : r.data) EXPECT_TRUE(w.complete());
}

TEST(Impute, GapLongerThanMaxGap) {
  Dataset d;
  for (int w = 1; w <= 8; ++w) d.push_back(full_week(w, 15.7, 15.6, 15.8));
  for (int w = 2; w <= 6; ++w) d[w - 1].at(Series::lgs, QuoteDay::friday).reset();
  try {
    impute_missing(d, {4});
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lgs_f"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1821-W02"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1821-W06"), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(impute_missing(d, {5}));
}

TEST(Features, HplDifference) {
  Dataset d{full_week(1, 15.8, 15.7, 15.9), full_week(2, 15.6, 15.5, 15.95)};
  const auto f = build_features(d);
  EXPECT_NEAR(f.vectors[0].hpl[0], 0.15, 1e-12);
  EXPECT_NEAR(f.vectors[0].hpl[1], 0.15, 1e-12);
  EXPECT_EQ(f.dimension(), 14u);
  EXPECT_EQ(f.vectors[0].raw().size(), 14u);
}

TEST(Features, HplCanBeDropped) {
  Dataset d{full_week(1, 15.8, 15.7, 15.9), full_week(2, 15.6, 15.5, 15.95)};
  FeatureOptions opts;
  opts.include_hpl = false;
  const auto f = build_features(d, opts);
  EXPECT_EQ(f.dimension(), 12u);
  EXPECT_EQ(f.vectors[0].standardized.size(), 12u);
}

TEST(Features, IdenticalWeeksFail) {
  Dataset d{full_week(1, 15.8, 15.7, 15.9), full_week(1, 15.8, 15.7, 15.9)};
  d[1].when.week = 2;
  EXPECT_EQ(kind_of([&] { build_features(d); }), ErrorKind::data);
}

TEST(Features, StandardizedMomentsAreZeroAndOne) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  Dataset d;
  for (int w = 1; w <= 40; ++w) {
    auto q = full_week(w, 15.7 + u(rng), 15.6 + u(rng), 15.8 + u(rng));
    q.at(Series::poa, QuoteDay::friday) = 15.7 + u(rng);
    q.at(Series::lpv, QuoteDay::friday) = 25.0 + u(rng);
    d.push_back(q);
  }
  const auto f = build_features(d);
  for (std::size_t c = 0; c < f.dimension(); ++c) {
    double m = 0.0;
    double v = 0.0;
    for (const auto& fv : f.vectors) m += fv.standardized[c];
    m /= static_cast<double>(f.vectors.size());
    for (const auto& fv : f.vectors) v += (fv.standardized[c] - m) * (fv.standardized[c] - m);
    v /= static_cast<double>(f.vectors.size());
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-9);
  }
}

TEST(Spread, Arithmetic) {
  EXPECT_NEAR(quotation_spread(15.8, 15.7, 15.9), 0.2, 1e-12);
  EXPECT_EQ(quotation_spread(15.7, 15.7, 15.7), 0.0);
  const auto s = compute_spread({full_week(1, 15.8, 15.7, 15.9)});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s.values[0], 0.2, 1e-12);
}

TEST(Spread, PermutationAndShiftInvariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(15.0, 16.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const double s = quotation_spread(a, b, c);
    EXPECT_GE(s, 0.0);
    EXPECT_DOUBLE_EQ(s, quotation_spread(c, a, b));
    EXPECT_DOUBLE_EQ(s, quotation_spread(b, c, a));
    EXPECT_NEAR(s, quotation_spread(a + 3.0, b + 3.0, c + 3.0), 1e-12);
  }
}

TEST(Spread, PerQuotationAggregation) {
  auto w = full_week(1, 15.8, 15.7, 15.9);
  w.at(Series::hoa, QuoteDay::friday) = 16.1;
  const auto weekly = compute_spread({w});
  const auto per = compute_spread({w}, SpreadAggregation::per_quotation);
  ASSERT_EQ(per.size(), 2u);
  EXPECT_NEAR(per.values[0], 0.2, 1e-12);
  EXPECT_NEAR(per.values[1], 0.4, 1e-12);
  EXPECT_NEAR(weekly.values[0], 0.3, 1e-12);
  EXPECT_EQ(per.labels[1], "1821-W01-fri");
  EXPECT_EQ(per.week_index[1], 0u);
}
