#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "ganreg/csv.hpp"
#include "ganreg/error.hpp"
#include "ganreg/rng.hpp"

using namespace ganreg;

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(csv::format_double(0.1), "0.1");
  EXPECT_EQ(csv::format_double(1.0), "1");
  EXPECT_EQ(csv::format_double(-2.5e-300), "-2.5e-300");
  EXPECT_EQ(csv::format_double(std::nan("")), "nan");
  EXPECT_EQ(csv::format_double(-std::numeric_limits<double>::infinity()), "-inf");
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<int>(rng.uniform_index(40)) - 20);
    const double back = csv::parse_double(csv::format_double(v));
    EXPECT_EQ(std::memcmp(&v, &back, sizeof v), 0);
  }
}

TEST(Csv, StrictParse) {
  EXPECT_EQ(csv::parse_double("-0.25"), -0.25);
  EXPECT_EQ(csv::parse_double("1e3"), 1000.0);
  EXPECT_THROW(csv::parse_double(""), IoError);
  EXPECT_THROW(csv::parse_double("1.5x"), IoError);
  EXPECT_THROW(csv::parse_double(" 1"), IoError);
}

TEST(Csv, WriterAndReader) {
  std::ostringstream os;
  {
    csv::Writer w(os, {"name", "n", "x"});
    w.row("a", 3, 0.5);
    w.row(std::string("b"), -1L, 1e-20);
    w.row_strings({"c", "0", "nan"});
  }
  EXPECT_EQ(os.str(), "name,n,x\na,3,0.5\nb,-1,1e-20\nc,0,nan\n");
  std::istringstream is(os.str());
  const auto t = csv::read(is);
  EXPECT_EQ(t.header.size(), 3u);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.column("x"), 2u);
  EXPECT_EQ(t.rows[1][t.column("x")], "1e-20");
  EXPECT_THROW(t.column("y"), IoError);
}

TEST(Csv, ReaderErrors) {
  std::istringstream empty("");
  EXPECT_THROW(csv::read(empty), IoError);
  std::istringstream ragged("a,b\n1,2\n3\n");
  EXPECT_THROW(csv::read(ragged), IoError);
  std::istringstream crlf("a,b\r\n1,2\r\n");
  const auto t = csv::read(crlf);
  EXPECT_EQ(t.header[1], "b");
  EXPECT_EQ(t.rows[0][1], "2");
  EXPECT_THROW(csv::read_file("/nonexistent/file.csv"), IoError);
}
