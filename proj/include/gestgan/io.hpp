#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gestgan/params.hpp"
#include "gestgan/tensor.hpp"

namespace gestgan {

// All persistence is plain text. Floating-point payloads (checkpoints,
// schedules, manifests that must round-trip bitwise) use C99 hexfloats;
// human-facing CSVs use 17-significant-digit decimal, which also
// round-trips exactly.
std::string format_hex(double v);
double parse_double(const std::string& s);  // accepts hex and decimal forms
std::string format_g17(double v);

// ---- key=value manifests -------------------------------------------------
// One `key=value` pair per line, '#' comments and blank lines ignored, keys
// unique. Used for run configs, dataset metadata, and checkpoint headers.
using Manifest = std::map<std::string, std::string>;

void write_manifest(std::ostream& os, const Manifest& m);
void write_manifest_file(const std::string& path, const Manifest& m);
Manifest read_manifest(std::istream& is);
Manifest read_manifest_file(const std::string& path);

const std::string& manifest_get(const Manifest& m, const std::string& key);  // throws IoError
double manifest_get_double(const Manifest& m, const std::string& key);
std::size_t manifest_get_size(const Manifest& m, const std::string& key);

// ---- named tensor blocks ---------------------------------------------------
// Format per tensor:  name <name> / shape <d0> <d1> ... / data <hex> <hex> ...
// preceded by a single `tensors <count>` line. Round-trips bit-exact.
void save_tensors(std::ostream& os, const TensorDict& dict);
TensorDict load_tensors(std::istream& is);

// ---- CSV -------------------------------------------------------------------
// Minimal numeric CSV: header row + comma-separated cells, no quoting (the
// schemas in this project never contain commas or newlines in cells).
void write_csv_row(std::ostream& os, const std::vector<std::string>& cells);
std::vector<std::string> split_csv_row(const std::string& line);

// Reads a whole CSV file; first row is returned as `header`.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv_file(const std::string& path);

// Opens for writing, throws IoError on failure; parent directory must exist.
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace gestgan
