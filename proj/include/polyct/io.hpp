#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "polyct/constraints.hpp"
#include "polyct/geometry.hpp"
#include "polyct/model.hpp"
#include "polyct/solvers.hpp"
#include "polyct/system_matrix.hpp"

namespace polyct {

using Json = nlohmann::json;

// Shortest round-trip decimal form ("%.17g"); NaN prints as "nan".
std::string format_double(double v);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// {"windows":[{"intensity":..,"weights":[..],"attenuations":[..]}]}
WindowedSpectra spectra_from_json(const Json& doc);
Json spectra_to_json(const WindowedSpectra& spectra);

// {"type":"intersection","first":{...},"second":{...},"ball":{...}?}
ConstraintSet constraint_from_json(const Json& doc);
Json constraint_to_json(const ConstraintSet& set);

// 16-bit big-endian PGM normalized by the image maximum, plus "<path>.json"
// holding the scale. Row r = side - 1 is written first so +y points up.
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);

// CSV with header row,col,value.
void write_image_csv(const std::filesystem::path& path, const Image& image);
Image read_image_csv(const std::filesystem::path& path);

// First line {"n":..,"d":..,"format":..}; then row,col,weight lines.
void write_matrix_csv(const std::filesystem::path& path, const SystemMatrix& A);
SystemMatrix read_matrix_csv(const std::filesystem::path& path);

// Header iter,dist_to_truth,avg_movement,loss,wall_ms.
std::string trace_csv(const SolverTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace);

// Header index,window,count.
void write_measurements_csv(const std::filesystem::path& path, const MeasurementSet& y);
MeasurementSet read_measurements_csv(const std::filesystem::path& path);

} // namespace polyct
