#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "gsw/io.hpp"
#include "gsw/sampler.hpp"

namespace gsw {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gsw_io_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(Csv, ParsesNumericGrid) {
  std::istringstream in("1, 2.5\n-3,4e-1\n\n");
  const Matrixd x = read_numeric_csv(in, "x");
  ASSERT_EQ(x.rows(), 2);
  EXPECT_DOUBLE_EQ(x(1, 1), 0.4);
}

TEST(Csv, RaggedRowNamesRow) {
  std::istringstream in("1,2\n3\n");
  try {
    read_numeric_csv(in, "x.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(Csv, RejectsNonFiniteAndGarbage) {
  std::istringstream a("1,inf\n");
  EXPECT_THROW(read_numeric_csv(a, "x"), DataError);
  std::istringstream b("1,abc\n");
  try {
    read_numeric_csv(b, "x");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
  }
}

TEST(Dataset, SpecExample) {
  const auto dir = temp_dir("dataset");
  write(dir / "X.csv", "1\n1\n");
  write(dir / "o.csv", "a,b\n3,0\n1,0\n");
  const auto ds = load_dataset((dir / "X.csv").string(), (dir / "o.csv").string());
  EXPECT_EQ(ds.n(), 2);
  EXPECT_EQ(ds.d(), 1);
  EXPECT_EQ(*ds.outcome_sum(), (Vectord(2) << 3, 1).finished());
  EXPECT_EQ(ds.x_digest.size(), 64u);
}

TEST(Dataset, MuOnlyDisablesEstimation) {
  const auto dir = temp_dir("mu");
  write(dir / "X.csv", "1\n2\n");
  write(dir / "o.csv", "mu\n3\n1\n");
  const auto ds = load_dataset((dir / "X.csv").string(), (dir / "o.csv").string());
  EXPECT_FALSE(ds.has_potential_outcomes());
  EXPECT_TRUE(ds.outcome_sum().has_value());
  EXPECT_THROW(ds.outcomes(), DataError);
}

TEST(Dataset, DimensionAndConsistencyErrors) {
  const auto dir = temp_dir("errors");
  write(dir / "X.csv", "1\n2\n");
  write(dir / "short.csv", "a,b\n3,0\n");
  write(dir / "bad.csv", "a,b,mu\n3,0,3\n1,0,2\n");
  write(dir / "unknown.csv", "a,c\n1,2\n3,4\n");
  EXPECT_THROW(load_dataset((dir / "X.csv").string(), (dir / "short.csv").string()), DataError);
  EXPECT_THROW(load_dataset((dir / "X.csv").string(), (dir / "bad.csv").string()), DataError);
  EXPECT_THROW(load_dataset((dir / "X.csv").string(), (dir / "unknown.csv").string()), DataError);
  EXPECT_THROW(load_dataset((dir / "missing.csv").string(), std::nullopt), DataError);
}

TEST(Assignment, RoundTripIsExact) {
  Vectord z(5);
  z << 1, -1, -1, 1, 1;
  std::ostringstream out;
  write_assignment(out, z);
  std::istringstream in(out.str());
  EXPECT_EQ(read_assignment(in, "z"), z);
  std::istringstream bad("1\n0.5\n");
  EXPECT_THROW(read_assignment(bad, "z"), DataError);
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, KnownKeysAndUnknownKeyNamed) {
  std::istringstream ok("phi = 0.3  # comment\nseed=4\n\n");
  const auto cfg = parse_config(ok, "c");
  EXPECT_EQ(cfg.at("phi"), "0.3");
  EXPECT_EQ(cfg.at("seed"), "4");
  std::istringstream bad("phi=0.3\nreplicates=5\n");
  try {
    parse_config(bad, "c");
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("replicates"), std::string::npos);
  }
}

TEST(Report, OrderedKeysAndSeventeenDigits) {
  Json r;
  r["schema_version"] = 1;
  r["zeta"] = 0.1;
  r["alpha"] = Json::array({1, 2});
  const std::string text = dump_report(r);
  EXPECT_LT(text.find("zeta"), text.find("alpha"));
  EXPECT_NE(text.find("0.10000000000000001"), std::string::npos);
  EXPECT_EQ(text, dump_report(r));
}

TEST(Report, NanBecomesNullWithWarning) {
  Json r;
  r["value"] = std::numeric_limits<double>::quiet_NaN();
  const auto parsed = Json::parse(dump_report(r));
  EXPECT_TRUE(parsed["value"].is_null());
  ASSERT_EQ(parsed["warnings"].size(), 1u);
  EXPECT_NE(parsed["warnings"][0].get<std::string>().find("/value"), std::string::npos);
}

TEST(Report, MissingDirectoryPolicy) {
  const auto dir = temp_dir("report");
  Json r{{"a", 1}};
  EXPECT_THROW(emit_report(r, dir / "sub" / "r.json", false), DataError);
  emit_report(r, dir / "sub" / "r.json", true);
  EXPECT_TRUE(fs::exists(dir / "sub" / "r.json"));
}

}  // namespace
}  // namespace gsw
