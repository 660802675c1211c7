#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dynalloc/data_panel.hpp"

using namespace dynalloc;

namespace {
ReturnPanel parse(const std::string& text, PanelKind kind = PanelKind::returns) {
  std::istringstream in(text);
  return parse_panel(in, kind);
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ConfigError;
}
}  // namespace

TEST(DataPanel, ParsesReturnsVerbatim) {
  const auto p = parse("date,a,b\n2020-01-02,0.01,-0.02\n");
  ASSERT_EQ(p.rows(), 1);
  ASSERT_EQ(p.cols(), 2);
  EXPECT_EQ(p.values()(0, 0), 0.01);
  EXPECT_EQ(p.values()(0, 1), -0.02);
  EXPECT_EQ(p.dates()[0], (Date{2020, 1, 2}));
  EXPECT_EQ(p.assets()[1], "b");
}

TEST(DataPanel, PricesBecomeSimpleReturns) {
  const auto p = parse("date,a\n2020-01-02,100\n2020-01-03,101\n", PanelKind::prices);
  ASSERT_EQ(p.rows(), 1);
  EXPECT_NEAR(p.values()(0, 0), 0.01, 1e-15);
  EXPECT_EQ(p.dates()[0], (Date{2020, 1, 3}));
}

TEST(DataPanel, ValidationErrors) {
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-01-02,NaN\n"); }), ErrorKind::MissingValue);
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-01-02,\n"); }), ErrorKind::MissingValue);
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-01-03,0.1\n2020-01-02,0.1\n"); }), ErrorKind::NonMonotonicDates);
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-01-02,0.1\n2020-01-02,0.1\n"); }), ErrorKind::NonMonotonicDates);
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-01-02,0\n2020-01-03,1\n", PanelKind::prices); }),
            ErrorKind::NonPositivePrice);
  EXPECT_EQ(kind_of([] { parse("date,a,a\n2020-01-02,0.1,0.1\n"); }), ErrorKind::DuplicateAsset);
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-01-02,1.5\n"); }), ErrorKind::ReturnOutOfRange);
  EXPECT_EQ(kind_of([] { parse("date,a\n2020-13-02,0.1\n"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { load_panel("/nonexistent/file.csv", PanelKind::returns); }), ErrorKind::FileNotFound);
}

TEST(DataPanel, CompositeIndex) {
  const auto p = parse("date,eq,bd,cm\n2020-01-02,0.01,0.00,-0.01\n");
  const auto c = composite_index(p, saa_spec("eq", "bd", "cm"));
  EXPECT_NEAR(c.values()(0, 0), 0.004, 1e-15);

  const auto single = composite_index(p, CompositeSpec{{{"bd", 1.0}}});
  EXPECT_EQ(single.values()(0, 0), p.values()(0, 1));

  EXPECT_EQ(kind_of([&] { composite_index(p, CompositeSpec{{{"eq", 0.6}, {"bd", 0.6}}}); }),
            ErrorKind::WeightSumError);
  EXPECT_EQ(kind_of([&] { composite_index(p, CompositeSpec{{{"xx", 1.0}}}); }), ErrorKind::UnknownAsset);
}

TEST(DataPanel, CompositeIsLinear) {
  const auto dates = business_days(Date{2021, 1, 1}, 50);
  Matrix v = Matrix::Random(50, 3) * 0.02;
  const ReturnPanel p(dates, {"a", "b", "c"}, v);
  const ReturnPanel p3(dates, {"a", "b", "c"}, 3.0 * v);
  const CompositeSpec spec{{{"a", 0.2}, {"b", 0.3}, {"c", 0.5}}};
  const Vector lhs = composite_index(p3, spec).values().col(0);
  const Vector rhs = 3.0 * composite_index(p, spec).values().col(0);
  EXPECT_LT((lhs - rhs).lpNorm<Eigen::Infinity>(), 1e-15);
}

TEST(DataPanel, MonthEnds) {
  const auto p = parse("date,a\n2021-01-30,0\n2021-01-31,0\n2021-02-27,0\n");
  const auto me = month_ends(p);
  ASSERT_EQ(me.size(), 2u);
  EXPECT_EQ(me[0], (Date{2021, 1, 31}));
  EXPECT_EQ(me[1], (Date{2021, 2, 27}));

  const auto one = parse("date,a\n2021-03-04,0\n");
  EXPECT_EQ(month_ends(one), std::vector<Date>{(Date{2021, 3, 4})});

  const ReturnPanel empty({}, {"a"}, Matrix(0, 1));
  EXPECT_EQ(kind_of([&] { month_ends(empty); }), ErrorKind::EmptyPanel);
}

TEST(DataPanel, MonthEndsAreSortedSubsetOfDates) {
  const auto dates = business_days(Date{2019, 12, 20}, 400);
  const ReturnPanel p(dates, {"a"}, Matrix::Zero(400, 1));
  const auto me = month_ends(p);
  for (std::size_t i = 0; i < me.size(); ++i) {
    EXPECT_TRUE(std::binary_search(dates.begin(), dates.end(), me[i]));
    if (i) {
      EXPECT_LT(me[i - 1], me[i]);
    }
  }
  EXPECT_EQ(me.front(), (Date{2019, 12, 31}));
}

TEST(DataPanel, PriceReturnWealthRoundTrip) {
  std::ostringstream csv;
  csv << "date,a\n";
  const auto dates = business_days(Date{2020, 1, 1}, 300);
  std::mt19937_64 eng(3);
  std::normal_distribution<double> g(0.0, 0.01);
  double price = 50.0;
  const double first = price;
  for (const auto& d : dates) {
    csv << d.to_string() << ',' << csv::format(price) << '\n';
    price *= 1.0 + g(eng);
  }
  // The last written price is the one before the final multiplication.
  const auto p = parse(csv.str(), PanelKind::prices);
  double wealth = 1.0;
  for (Eigen::Index t = 0; t < p.rows(); ++t) wealth *= 1.0 + p.values()(t, 0);
  std::istringstream again(csv.str());
  std::string line, last;
  while (std::getline(again, line)) last = line;
  const double last_price = std::stod(last.substr(last.find(',') + 1));
  EXPECT_NEAR(wealth, last_price / first, 1e-12);
}

TEST(DataPanel, DateSerialRoundTrip) {
  for (long s = -1000; s < 40000; s += 37) EXPECT_EQ(Date::from_serial(s).serial(), s);
  EXPECT_EQ((Date{1970, 1, 1}).weekday(), 4);
  EXPECT_EQ((Date{2024, 2, 29}).to_string(), "2024-02-29");
  EXPECT_THROW(Date::parse("2023-02-29"), Error);
}

TEST(DataPanel, InnerJoinAlignsDates) {
  const ReturnPanel a({{2020, 1, 2}, {2020, 1, 3}, {2020, 1, 6}}, {"a"}, Matrix::Constant(3, 1, 0.01));
  const ReturnPanel b({{2020, 1, 3}, {2020, 1, 6}, {2020, 1, 7}}, {"b"}, Matrix::Constant(3, 1, 0.02));
  const auto j = inner_join({a, b});
  ASSERT_EQ(j.rows(), 2);
  EXPECT_EQ(j.dates()[0], (Date{2020, 1, 3}));
  EXPECT_EQ(j.values()(1, 1), 0.02);
}
