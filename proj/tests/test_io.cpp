#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "opreg/errors.hpp"
#include "opreg/io.hpp"
#include "test_support.hpp"

using namespace opreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("opreg_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Trajectory small_trajectory() {
  const GridConfig grid{8, 2.0 * std::numbers::pi};
  std::mt19937_64 rng(1);
  Trajectory t{grid, 0.05, 2, 1.5, {}};
  for (int i = 0; i < 3; ++i) t.snapshots.push_back(opreg::testing::random_field(grid, rng));
  return t;
}

}  // namespace

TEST_CASE("trajectory binary layout") {
  const Trajectory t = small_trajectory();
  const std::string bytes = encode_trajectory(t);
  const std::size_t header = 4 + 2 + 4 + 8 + 8 + 4 + 8 + 8;
  REQUIRE(bytes.size() == header + 3 * 8 * 8);
  CHECK(bytes.substr(0, 4) == "OPRG");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  CHECK(static_cast<unsigned char>(bytes[6]) == 8);  // n, little endian
  double L = 0.0;
  std::memcpy(&L, bytes.data() + 10, 8);
  CHECK(L == t.grid.length);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + header, 8);
  CHECK(first == t.snapshots[0][0]);
  double last = 0.0;
  std::memcpy(&last, bytes.data() + bytes.size() - 8, 8);
  CHECK(last == t.snapshots[2][7]);
}

TEST_CASE("trajectory round trip is exact and byte-stable") {
  const Trajectory t = small_trajectory();
  const std::string bytes = encode_trajectory(t);
  const Trajectory back = decode_trajectory(bytes);
  CHECK(back == t);
  CHECK(encode_trajectory(back) == bytes);

  const fs::path dir = scratch_dir("traj");
  write_trajectory(dir / "a.oprg", t);
  CHECK(read_trajectory(dir / "a.oprg") == t);
  CHECK(read_file(dir / "a.oprg") == bytes);
  // No temporary left behind.
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
}

TEST_CASE("malformed trajectory files are rejected") {
  const std::string good = encode_trajectory(small_trajectory());
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_trajectory(bad_magic), FormatError);
  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_trajectory(bad_version), FormatError);
  CHECK_THROWS_AS(decode_trajectory(good.substr(0, 20)), FormatError);
  CHECK_THROWS_AS(decode_trajectory(good.substr(0, good.size() - 1)), FormatError);
  CHECK_THROWS_AS(decode_trajectory(good + "x"), FormatError);
  std::string odd_n = good;
  odd_n[6] = 7;
  CHECK_THROWS_AS(decode_trajectory(odd_n), FormatError);
  CHECK_THROWS_AS(read_trajectory("/nonexistent/file.oprg"), FormatError);
}

TEST_CASE("hexadecimal doubles") {
  CHECK(hex_double(-3.0) == "-0x1.8p+1");
  CHECK(hex_double(0.0) == "0x0p+0");
  CHECK(parse_hex_double("-0x1.8p+1") == -3.0);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 2000; ++i) {
    double v = 0.0;
    const std::uint64_t b = bits(rng);
    std::memcpy(&v, &b, 8);
    if (!std::isfinite(v)) continue;
    const double back = parse_hex_double(hex_double(v));
    CHECK(std::memcmp(&back, &v, 8) == 0);
  }
  CHECK(std::signbit(parse_hex_double(hex_double(-0.0))));
  CHECK(parse_hex_double(hex_double(std::numeric_limits<double>::denorm_min())) ==
        std::numeric_limits<double>::denorm_min());
  CHECK_THROWS_AS(parse_hex_double("1.5"), FormatError);
  CHECK_THROWS_AS(parse_hex_double("0x1.8p+1junk"), FormatError);
}

TEST_CASE("checkpoint round trip") {
  const GridConfig grid{192, 32.0 * std::numbers::pi};
  OperatorModel m = default_model(grid, Mlp::default_layer_sizes(), 5, 1.0 / 3.0);
  m.branches.push_back(ks_exact_model(grid).branches[0]);
  const std::string text = encode_checkpoint(m);
  const OperatorModel back = decode_checkpoint(text);
  CHECK(back.grid == m.grid);
  CHECK(back.mask.keep == m.mask.keep);
  CHECK(back.g_input_scale == m.g_input_scale);
  CHECK(back.branches == m.branches);
  CHECK(encode_checkpoint(back) == text);

  const fs::path dir = scratch_dir("ckpt");
  write_checkpoint(dir / "m.json", m);
  CHECK(read_file(dir / "m.json") == text);
  CHECK(read_checkpoint(dir / "m.json").branches == m.branches);
}

TEST_CASE("malformed checkpoints are rejected") {
  const GridConfig grid{64, 2.0 * std::numbers::pi};
  const nlohmann::json good = checkpoint_to_json(default_model(grid, {1, 2, 1}, 1));
  CHECK_NOTHROW(checkpoint_from_json(good));

  nlohmann::json j = good;
  j["format"] = "something-else";
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["version"] = 2;
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j.erase("branches");
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["branches"][0]["h"]["parameters"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["branches"][0]["parity"] = "sideways";
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["branches"][0]["g"]["type"] = "spline";
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  j = good;
  j["grid"]["n"] = 7;
  CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
  CHECK_THROWS_AS(decode_checkpoint("{ not json"), FormatError);
}

TEST_CASE("shortest double formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(1e-300) == "1e-300");
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = normal(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("csv encoding") {
  CsvTable t{{"name", "value"}, {{"plain", "1.5"}, {"with,comma", "2"}, {"quote\"inside", "3"}, {"line\nbreak", ""}}};
  const std::string text = encode_csv(t);
  CHECK(text.substr(0, 12) == "name,value\r\n");
  CHECK(text.find("\"with,comma\"") != std::string::npos);
  CHECK(text.find("\"quote\"\"inside\"") != std::string::npos);
  const CsvTable back = decode_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(encode_csv(back) == text);

  // LF-only input is accepted too.
  const CsvTable lf = decode_csv("a,b\n1,2\n");
  CHECK(lf.rows == std::vector<std::vector<std::string>>{{"1", "2"}});

  CHECK_THROWS_AS(decode_csv("a,b\r\n1\r\n"), FormatError);
  CHECK_THROWS_AS(decode_csv("a,b\r\n\"1,2\r\n"), FormatError);
  CHECK_THROWS_AS(decode_csv(""), FormatError);

  const fs::path dir = scratch_dir("csv");
  write_csv(dir / "t.csv", t);
  CHECK(read_file(dir / "t.csv") == text);
  CHECK(read_csv(dir / "t.csv").rows == t.rows);
}

TEST_CASE("json with comments") {
  const auto j = parse_json_text("// leading\n{ \"a\": 1, /* inline */ \"b\": [2, 3] }\n", "test");
  CHECK(j["a"] == 1);
  CHECK(j["b"].size() == 2);
  CHECK_THROWS_AS(parse_json_text("{ \"a\": }", "test"), FormatError);
}

TEST_CASE("flag names") {
  for (Parity p : {Parity::none, Parity::even, Parity::odd}) CHECK(parse_parity(parity_name(p)) == p);
  for (Realness r : {Realness::real, Realness::imaginary}) CHECK(parse_realness(realness_name(r)) == r);
  CHECK_THROWS_AS(parse_realness("complex"), FormatError);
}
