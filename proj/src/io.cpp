#include "opreg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "opreg/errors.hpp"

namespace opreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    if (pos_ + sizeof(U) > bytes_.size()) {
      throw FormatError(std::string("snapshot file truncated while reading ") + field);
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_trajectory(const Trajectory& traj) {
  traj.validate();
  std::string out;
  const std::size_t n = static_cast<std::size_t>(traj.grid.n);
  out.reserve(48 + traj.snapshots.size() * n * 8);
  out.append(kTrajectoryMagic, 4);
  put_le<std::uint16_t>(out, kTrajectoryVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(traj.grid.n));
  put_le<double>(out, traj.grid.length);
  put_le<double>(out, traj.dt);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(traj.save_stride));
  put_le<std::uint64_t>(out, traj.snapshots.size());
  put_le<double>(out, traj.t0);
  for (const Field& f : traj.snapshots) {
    for (double v : f.values()) put_le<double>(out, v);
  }
  return out;
}

Trajectory decode_trajectory(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTrajectoryMagic, 4) != 0) {
    throw FormatError("snapshot file: bad magic (expected \"OPRG\")");
  }
  Reader r(bytes);
  r.skip(4);
  const auto version = r.get<std::uint16_t>("version");
  if (version != kTrajectoryVersion) {
    throw FormatError("snapshot file: unsupported version " + std::to_string(version));
  }
  Trajectory traj;
  traj.grid.n = static_cast<int>(r.get<std::uint32_t>("n"));
  traj.grid.length = r.get<double>("L");
  traj.dt = r.get<double>("dt");
  traj.save_stride = static_cast<int>(r.get<std::uint32_t>("save_stride"));
  const auto count = r.get<std::uint64_t>("snapshot_count");
  traj.t0 = r.get<double>("t0");
  try {
    traj.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("snapshot file: invalid grid: ") + e.what());
  }
  if (!(traj.dt > 0.0) || traj.save_stride < 1 || count == 0) {
    throw FormatError("snapshot file: invalid header (dt, save_stride or snapshot_count)");
  }
  const std::size_t n = static_cast<std::size_t>(traj.grid.n);
  if (r.remaining() != count * n * 8) {
    throw FormatError("snapshot file: payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(count * n * 8));
  }
  traj.snapshots.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    std::vector<double> values(n);
    for (std::size_t j = 0; j < n; ++j) values[j] = r.get<double>("sample");
    traj.snapshots.emplace_back(traj.grid, std::move(values));
  }
  return traj;
}

void write_trajectory(const fs::path& path, const Trajectory& traj) { write_file_atomic(path, encode_trajectory(traj)); }

Trajectory read_trajectory(const fs::path& path) {
  try {
    return decode_trajectory(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string hex_double(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("hex_double: non-finite value");
  char buf[64];
  const bool negative = std::signbit(v);
  const auto res = std::to_chars(buf, buf + sizeof(buf), std::abs(v), std::chars_format::hex);
  std::string out = negative ? "-0x" : "0x";
  out.append(buf, res.ptr);
  return out;
}

double parse_hex_double(std::string_view text) {
  const std::string_view original = text;
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (text.size() < 3 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
    throw FormatError("expected hexadecimal float, got '" + std::string(original) + "'");
  }
  text.remove_prefix(2);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("malformed hexadecimal float '" + std::string(original) + "'");
  }
  return negative ? -v : v;
}

const char* parity_name(Parity p) {
  switch (p) {
    case Parity::none:
      return "none";
    case Parity::even:
      return "even";
    case Parity::odd:
      return "odd";
  }
  return "none";
}

Parity parse_parity(const std::string& name) {
  if (name == "none") return Parity::none;
  if (name == "even") return Parity::even;
  if (name == "odd") return Parity::odd;
  throw FormatError("unknown parity '" + name + "'");
}

const char* realness_name(Realness r) { return r == Realness::real ? "real" : "imaginary"; }

Realness parse_realness(const std::string& name) {
  if (name == "real") return Realness::real;
  if (name == "imaginary") return Realness::imaginary;
  throw FormatError("unknown realness '" + name + "'");
}

namespace {

json function_to_json(const ScalarFunction& f) {
  if (const Mlp* net = f.network()) {
    json params = json::array();
    for (double p : net->parameters()) params.push_back(hex_double(p));
    return {{"type", "mlp"}, {"layer_sizes", net->layer_sizes()}, {"parameters", params}};
  }
  const Closure& c = *f.closure();
  return {{"type", "closure"}, {"name", Closure::name(c.kind)}, {"coefficient", hex_double(c.coefficient)}};
}

double json_double(const json& j, const std::string& what) {
  if (j.is_string()) return parse_hex_double(j.get<std::string>());
  if (j.is_number()) return j.get<double>();
  throw FormatError("checkpoint: " + what + " must be a number or hexadecimal string");
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(where + ": missing key '" + key + "'");
  return j.at(key);
}

ScalarFunction function_from_json(const json& j, const std::string& where) {
  const std::string type = require(j, "type", where).get<std::string>();
  if (type == "mlp") {
    Mlp net(require(j, "layer_sizes", where).get<std::vector<int>>());
    const json& params = require(j, "parameters", where);
    if (!params.is_array() || params.size() != net.parameter_count()) {
      throw FormatError(where + ": expected " + std::to_string(net.parameter_count()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) net.parameters()[i] = json_double(params[i], where);
    return net;
  }
  if (type == "closure") {
    Closure c;
    try {
      c.kind = Closure::parse(require(j, "name", where).get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw FormatError(where + ": " + e.what());
    }
    c.coefficient = j.contains("coefficient") ? json_double(j.at("coefficient"), where) : 1.0;
    return c;
  }
  throw FormatError(where + ": unknown function type '" + type + "'");
}

}  // namespace

json checkpoint_to_json(const OperatorModel& model) {
  model.validate();
  json branches = json::array();
  for (const OperatorBranch& b : model.branches) {
    branches.push_back({{"realness", realness_name(b.g_realness)},
                        {"parity", parity_name(b.h_parity)},
                        {"conservation", b.conservation},
                        {"g", function_to_json(b.g)},
                        {"h", function_to_json(b.h)}});
  }
  return {{"format", "opreg-checkpoint"},
          {"version", 1},
          {"grid", {{"n", model.grid.n}, {"length", hex_double(model.grid.length)}}},
          {"kept_bins", model.mask.kept_prefix()},
          {"g_input_scale", hex_double(model.g_input_scale)},
          {"branches", branches}};
}

OperatorModel checkpoint_from_json(const json& j) {
  try {
    if (require(j, "format", "checkpoint") != "opreg-checkpoint") throw FormatError("checkpoint: wrong format tag");
    if (require(j, "version", "checkpoint") != 1) throw FormatError("checkpoint: unsupported version");
    OperatorModel model;
    const json& grid = require(j, "grid", "checkpoint");
    model.grid.n = require(grid, "n", "checkpoint.grid").get<int>();
    model.grid.length = json_double(require(grid, "length", "checkpoint.grid"), "grid.length");
    try {
      model.grid.validate();
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("checkpoint.grid: ") + e.what());
    }
    const auto kept = require(j, "kept_bins", "checkpoint").get<std::size_t>();
    if (kept < 1 || kept > static_cast<std::size_t>(model.grid.half_size())) {
      throw FormatError("checkpoint: kept_bins out of range");
    }
    model.mask.keep.assign(static_cast<std::size_t>(model.grid.half_size()), false);
    for (std::size_t k = 0; k < kept; ++k) model.mask.keep[k] = true;
    model.g_input_scale = j.contains("g_input_scale") ? json_double(j.at("g_input_scale"), "g_input_scale") : 1.0;
    const json& branches = require(j, "branches", "checkpoint");
    if (!branches.is_array() || branches.empty()) throw FormatError("checkpoint: branches must be a non-empty array");
    for (std::size_t i = 0; i < branches.size(); ++i) {
      const std::string where = "checkpoint.branches[" + std::to_string(i) + "]";
      const json& bj = branches[i];
      OperatorBranch b;
      b.g_realness = parse_realness(require(bj, "realness", where).get<std::string>());
      b.h_parity = parse_parity(require(bj, "parity", where).get<std::string>());
      b.conservation = require(bj, "conservation", where).get<bool>();
      b.g = function_from_json(require(bj, "g", where), where + ".g");
      b.h = function_from_json(require(bj, "h", where), where + ".h");
      model.branches.push_back(std::move(b));
    }
    try {
      model.validate();
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

std::string encode_checkpoint(const OperatorModel& model) { return checkpoint_to_json(model).dump(2) + "\n"; }

OperatorModel decode_checkpoint(std::string_view text) {
  return checkpoint_from_json(parse_json_text(text, "checkpoint"));
}

void write_checkpoint(const fs::path& path, const OperatorModel& model) {
  write_file_atomic(path, encode_checkpoint(model));
}

OperatorModel read_checkpoint(const fs::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string quote_csv(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string encode_csv(const CsvTable& table) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out.push_back(',');
      out += quote_csv(row[i]);
    }
    out += "\r\n";
  };
  emit(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw std::invalid_argument("encode_csv: ragged row");
    emit(row);
  }
  return out;
}

CsvTable decode_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool quoted = false;
  bool cell_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"' && !cell_started) {
      quoted = true;
      cell_started = true;
    } else if (c == ',') {
      record.push_back(std::move(cell));
      cell.clear();
      cell_started = false;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(std::move(cell));
      cell.clear();
      cell_started = false;
      records.push_back(std::move(record));
      record.clear();
    } else {
      cell.push_back(c);
      cell_started = true;
    }
  }
  if (quoted) throw FormatError("csv: unterminated quoted field");
  if (cell_started || !record.empty()) {
    record.push_back(std::move(cell));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw FormatError("csv: missing header line");
  CsvTable table{std::move(records.front()), {}};
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw FormatError("csv: row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                        " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) { write_file_atomic(path, encode_csv(table)); }

CsvTable read_csv(const fs::path& path) {
  try {
    return decode_csv(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw FormatError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_text(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace opreg
