#pragma once

// On-disk formats: snapshot binaries, model checkpoints, CSV tables.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "opreg/dynamics.hpp"
#include "opreg/operator.hpp"
#include "json.hpp"

namespace opreg {

inline constexpr char kTrajectoryMagic[4] = {'O', 'P', 'R', 'G'};
inline constexpr std::uint16_t kTrajectoryVersion = 1;

/// Little-endian snapshot binary: magic, u16 version, u32 n, f64 L, f64 dt,
/// u32 save_stride, u64 snapshot_count, f64 t0, then the samples time-major.
std::string encode_trajectory(const Trajectory& traj);
Trajectory decode_trajectory(std::string_view bytes);

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

/// Exact hexadecimal encoding, e.g. "-0x1.8p+1".
std::string hex_double(double v);
double parse_hex_double(std::string_view text);

nlohmann::json checkpoint_to_json(const OperatorModel& model);
OperatorModel checkpoint_from_json(const nlohmann::json& j);
std::string encode_checkpoint(const OperatorModel& model);
OperatorModel decode_checkpoint(std::string_view text);
void write_checkpoint(const std::filesystem::path& path, const OperatorModel& model);
OperatorModel read_checkpoint(const std::filesystem::path& path);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string encode_csv(const CsvTable& table);
CsvTable decode_csv(std::string_view text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Parses JSON allowing // and /* */ comments. Throws FormatError.
nlohmann::json parse_json_text(std::string_view text, const std::string& what);

const char* parity_name(Parity p);
Parity parse_parity(const std::string& name);
const char* realness_name(Realness r);
Realness parse_realness(const std::string& name);

}  // namespace opreg
