#include "rngd/error.hpp"
#include "rngd/io.hpp"
#include "rngd/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rngd;

namespace {

std::filesystem::path fixture(const char* name) { return std::filesystem::path(RNGD_FIXTURES_DIR) / name; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Runtime;
}

}  // namespace

TEST(Libsvm, SingleLine) {
  std::istringstream in("1 1:0.5 3:2.0\n");
  const Dataset ds = parse_libsvm(in, 3);
  ASSERT_EQ(ds.n(), 1);
  ASSERT_EQ(ds.d(), 3);
  EXPECT_EQ(ds.X(0, 0), 0.5);
  EXPECT_EQ(ds.X(0, 1), 0.0);
  EXPECT_EQ(ds.X(0, 2), 2.0);
  EXPECT_EQ(ds.label_names.at(static_cast<std::size_t>(ds.y(0))), "1");
}

TEST(Libsvm, Errors) {
  EXPECT_EQ(kind_of([] {
              std::istringstream in("");
              parse_libsvm(in);
            }),
            ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_libsvm(fixture("bad_index.libsvm")); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_libsvm(fixture("bad_token.libsvm")); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_libsvm(fixture("does_not_exist.libsvm")); }), ErrorKind::IoError);
  try {
    parse_libsvm(fixture("bad_token.libsvm"));
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos) << e.what();
  }
}

TEST(Libsvm, FixtureRoundTripIsByteIdentical) {
  const std::string original = slurp(fixture("sample100.libsvm"));
  const Dataset ds = parse_libsvm(fixture("sample100.libsvm"));
  EXPECT_EQ(ds.n(), 100);
  EXPECT_EQ(ds.d(), 12);
  std::ostringstream first;
  write_libsvm(first, ds);
  EXPECT_EQ(first.str(), original);
  std::istringstream back(first.str());
  std::ostringstream second;
  write_libsvm(second, parse_libsvm(back));
  EXPECT_EQ(second.str(), first.str());
}

TEST(Csv, TwoByTwo) {
  std::istringstream in("1,2,0\n3,4,1\n");
  const Dataset ds = parse_csv(in);
  Mat X(2, 2);
  X << 1, 2, 3, 4;
  EXPECT_EQ(ds.X, X);
  EXPECT_EQ(ds.y(1), 1.0);
}

TEST(Csv, QuotedFields) {
  CsvOptions o;
  o.header = true;
  const Dataset ds = parse_csv(fixture("iris_small.csv"), o);
  EXPECT_EQ(ds.n(), 5);
  EXPECT_EQ(ds.d(), 2);
  EXPECT_EQ(ds.classes, 3);
  EXPECT_EQ(ds.y(1), 0.0);
  EXPECT_EQ(ds.label_names.at(2), "virginica");
}

TEST(Csv, LabelByName) {
  std::istringstream in("y,a,b\n1,0.5,2\n0,1e3,-4\n");
  CsvOptions o;
  o.header = true;
  o.label_name = "y";
  const Dataset ds = parse_csv(in, o);
  EXPECT_EQ(ds.X(1, 0), 1000.0);
  EXPECT_EQ(ds.y(0), 1.0);
}

TEST(Csv, Errors) {
  EXPECT_EQ(kind_of([] { parse_csv(fixture("bad_ragged.csv"), CsvOptions{true, -1, "", ','}); }),
            ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] {
              std::istringstream in("1,abc,0\n");
              parse_csv(in);
            }),
            ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] {
              std::istringstream in("a,b\n1,2\n");
              parse_csv(in, CsvOptions{true, -1, "nope", ','});
            }),
            ErrorKind::ConfigError);
}

TEST(Csv, RoundTrip) {
  LogisticGenParams p;
  p.n = 40;
  p.d = 5;
  const Dataset ds = gen_logistic(p, 3);
  std::ostringstream os;
  write_csv(os, ds, true);
  std::istringstream in(os.str());
  CsvOptions o;
  o.header = true;
  o.label_column = 0;
  const Dataset back = parse_csv(in, o);
  EXPECT_EQ(back.X, ds.X);
  EXPECT_EQ(back.y, ds.y);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-1.5e-10), "-1.5e-10");
  for (double v : {1.0 / 3.0, 1e300, -2.2250738585072014e-308, 123456.789}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(AtomicWrite, ReplacesWholeFile) {
  const auto dir = std::filesystem::temp_directory_path() / "rngd-io-test";
  std::filesystem::create_directories(dir);
  const auto p = dir / "out.txt";
  write_file_atomic(p, "first version, longer\n");
  write_file_atomic(p, "second\n");
  EXPECT_EQ(slurp(p), "second\n");
  std::filesystem::remove_all(dir);
}

TEST(Idx, ImagesAndLabels) {
  const auto dir = std::filesystem::temp_directory_path() / "rngd-idx-test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream img(dir / "img", std::ios::binary);
    const unsigned char head[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 1};
    img.write(reinterpret_cast<const char*>(head), sizeof head);
    const unsigned char px[] = {0, 255, 51, 102};
    img.write(reinterpret_cast<const char*>(px), sizeof px);
    std::ofstream lab(dir / "lab", std::ios::binary);
    const unsigned char lh[] = {0, 0, 8, 1, 0, 0, 0, 2, 7, 3};
    lab.write(reinterpret_cast<const char*>(lh), sizeof lh);
  }
  const Dataset ds = parse_idx(dir / "img", dir / "lab");
  EXPECT_EQ(ds.n(), 2);
  EXPECT_EQ(ds.d(), 2);
  EXPECT_DOUBLE_EQ(ds.X(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(ds.X(1, 0), 0.2);
  EXPECT_EQ(ds.y(0), 1.0);  // labels {3, 7} map to {0, 1}
  std::filesystem::remove_all(dir);
}
