#include "polyct/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "polyct/errors.hpp"

namespace polyct {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) {
        throw ConfigError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

Vec number_array(const Json& doc, const std::string& where) {
    if (!doc.is_array()) {
        throw ConfigError(where + ": expected an array of numbers");
    }
    Vec out;
    out.reserve(doc.size());
    for (std::size_t k = 0; k < doc.size(); ++k) {
        if (!doc[k].is_number()) {
            throw ConfigError(where + "[" + std::to_string(k) + "]: expected a number");
        }
        out.push_back(doc[k].get<double>());
    }
    return out;
}

const Json& field(const Json& doc, const char* key, const std::string& where) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw ConfigError(where + ": missing field '" + key + "'");
    }
    return doc.at(key);
}

double number_field(const Json& doc, const char* key, const std::string& where) {
    const Json& v = field(doc, key, where);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse number '" + s + "'");
    }
}

std::size_t parse_index(const std::string& s, const std::string& where) {
    const double v = parse_number(s, where);
    if (v < 0.0 || v != std::floor(v)) {
        throw ConfigError(where + ": expected a nonnegative integer, got '" + s + "'");
    }
    return static_cast<std::size_t>(v);
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json read_json_file(const fs::path& path) {
    std::ifstream in = open_in(path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path, true);
    out << text;
}

// ----------------------------------------------------------------- spectra

WindowedSpectra spectra_from_json(const Json& doc) {
    const Json& windows = field(doc, "windows", "spectra");
    if (!windows.is_array() || windows.empty()) {
        throw ConfigError("spectra.windows: expected a nonempty array");
    }
    WindowedSpectra out;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const std::string where = "windows[" + std::to_string(w) + "]";
        Spectrum s;
        s.intensity = number_field(windows[w], "intensity", where);
        s.weights = number_array(field(windows[w], "weights", where), where + ".weights");
        s.attenuations = number_array(field(windows[w], "attenuations", where), where + ".attenuations");
        out.windows.push_back(std::move(s));
    }
    try {
        out.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return out;
}

Json spectra_to_json(const WindowedSpectra& spectra) {
    Json windows = Json::array();
    for (const auto& s : spectra.windows) {
        windows.push_back({{"intensity", s.intensity}, {"weights", s.weights}, {"attenuations", s.attenuations}});
    }
    return Json{{"windows", windows}};
}

// -------------------------------------------------------------- constraints

namespace {

ConstraintSet member_from_json(const Json& doc, const std::string& where) {
    const Json& type = field(doc, "type", where);
    if (!type.is_string()) {
        throw ConfigError(where + ".type: expected a string");
    }
    const std::string t = type.get<std::string>();
    if (t == "nonneg") {
        return ConstraintSet::nonneg();
    }
    if (t == "box") {
        return ConstraintSet::box(number_field(doc, "lower", where), number_field(doc, "upper", where));
    }
    if (t == "tv_ball") {
        const double tau = number_field(doc, "tau", where);
        if (tau < 0.0) {
            throw ConfigError(where + ".tau: must be >= 0");
        }
        std::size_t side = 0;
        if (doc.contains("grid_side")) {
            side = static_cast<std::size_t>(number_field(doc, "grid_side", where));
        }
        return ConstraintSet::tv_ball(tau, side);
    }
    if (t == "l2_ball") {
        const double r = number_field(doc, "radius", where);
        if (!(r > 0.0)) {
            throw ConfigError(where + ".radius: must be > 0");
        }
        Vec center;
        if (doc.contains("center")) {
            center = number_array(doc.at("center"), where + ".center");
        }
        return ConstraintSet::l2_ball(r, std::move(center));
    }
    if (t == "intersection") {
        throw ConfigError(where + ": intersections may not be nested");
    }
    throw ConfigError(where + ".type: unknown constraint type '" + t + "'");
}

Json member_to_json(const ConstraintSet& s) {
    switch (s.kind) {
    case ConstraintSet::Kind::nonneg: return {{"type", "nonneg"}};
    case ConstraintSet::Kind::box: return {{"type", "box"}, {"lower", s.lower}, {"upper", s.upper}};
    case ConstraintSet::Kind::tv_ball: return {{"type", "tv_ball"}, {"tau", s.tau}, {"grid_side", s.grid_side}};
    case ConstraintSet::Kind::l2_ball: return {{"type", "l2_ball"}, {"radius", s.radius}, {"center", s.center}};
    case ConstraintSet::Kind::intersection: break;
    }
    return {};
}

} // namespace

ConstraintSet constraint_from_json(const Json& doc) {
    const Json& type = field(doc, "type", "constraint");
    if (type.is_string() && type.get<std::string>() == "intersection") {
        ConstraintSet s = ConstraintSet::intersection(member_from_json(field(doc, "first", "constraint"), "constraint.first"),
                                                      member_from_json(field(doc, "second", "constraint"), "constraint.second"));
        if (doc.contains("ball")) {
            ConstraintSet ball = member_from_json(doc.at("ball"), "constraint.ball");
            if (ball.kind != ConstraintSet::Kind::l2_ball) {
                throw ConfigError("constraint.ball: must be an l2_ball");
            }
            s = s.with_ball(ball.radius, ball.center);
        }
        return s;
    }
    return member_from_json(doc, "constraint");
}

Json constraint_to_json(const ConstraintSet& set) {
    if (set.kind != ConstraintSet::Kind::intersection) {
        return member_to_json(set);
    }
    Json doc{{"type", "intersection"}, {"first", member_to_json(set.members.at(0))},
             {"second", member_to_json(set.members.at(1))}};
    if (set.members.size() == 3) {
        doc["ball"] = member_to_json(set.members[2]);
    }
    return doc;
}

// ------------------------------------------------------------------ images

void write_pgm(const fs::path& path, const Image& image) {
    if (image.values.size() != image.side * image.side) {
        throw DimensionError("write_pgm: image is not square");
    }
    double scale = 0.0;
    for (double v : image.values) {
        scale = std::max(scale, v);
    }
    std::ofstream out = open_out(path, true);
    out << "P5\n" << image.side << " " << image.side << "\n65535\n";
    for (std::size_t rr = image.side; rr-- > 0;) {
        for (std::size_t c = 0; c < image.side; ++c) {
            const double v = scale > 0.0 ? std::clamp(image.at(rr, c) / scale, 0.0, 1.0) : 0.0;
            const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
            out.put(static_cast<char>((q >> 8) & 0xFF));
            out.put(static_cast<char>(q & 0xFF));
        }
    }
    fs::path meta = path;
    meta += ".json";
    write_text_file(meta, Json{{"side", image.side}, {"scale", scale}}.dump(2) + "\n");
}

Image read_pgm(const fs::path& path) {
    std::ifstream in = open_in(path, true);
    std::string magic;
    std::size_t w = 0;
    std::size_t h = 0;
    unsigned maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    if (magic != "P5" || w != h || w == 0 || maxval != 65535) {
        throw ConfigError("'" + path.string() + "' is not a square 16-bit PGM");
    }
    double scale = 1.0;
    fs::path meta = path;
    meta += ".json";
    if (fs::exists(meta)) {
        scale = read_json_file(meta).value("scale", 1.0);
    }
    Image img = blank_image(w);
    for (std::size_t rr = w; rr-- > 0;) {
        for (std::size_t c = 0; c < w; ++c) {
            const int hi = in.get();
            const int lo = in.get();
            if (!in) {
                throw ConfigError("'" + path.string() + "' is truncated");
            }
            img.at(rr, c) = static_cast<double>((hi << 8) | lo) / 65535.0 * scale;
        }
    }
    return img;
}

void write_image_csv(const fs::path& path, const Image& image) {
    std::ostringstream out;
    out << "row,col,value\n";
    for (std::size_t r = 0; r < image.side; ++r) {
        for (std::size_t c = 0; c < image.side; ++c) {
            out << r << "," << c << "," << format_double(image.at(r, c)) << "\n";
        }
    }
    write_text_file(path, out.str());
}

Image read_image_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::getline(in, line);
    if (line != "row,col,value") {
        throw ConfigError("'" + path.string() + "': expected header row,col,value");
    }
    std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
    std::size_t side = 0;
    for (std::size_t ln = 2; std::getline(in, line); ++ln) {
        if (line.empty()) {
            continue;
        }
        const auto parts = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(ln);
        if (parts.size() != 3) {
            throw ConfigError(where + ": expected 3 columns");
        }
        const std::size_t r = parse_index(parts[0], where);
        const std::size_t c = parse_index(parts[1], where);
        cells.emplace_back(r, c, parse_number(parts[2], where));
        side = std::max({side, r + 1, c + 1});
    }
    if (cells.size() != side * side) {
        throw ConfigError("'" + path.string() + "': image is not a full square grid");
    }
    Image img = blank_image(side);
    for (const auto& [r, c, v] : cells) {
        img.at(r, c) = v;
    }
    return img;
}

// ----------------------------------------------------------------- matrices

void write_matrix_csv(const fs::path& path, const SystemMatrix& A) {
    std::ostringstream out;
    out << Json{{"n", A.rows()}, {"d", A.cols()}, {"format", A.format()}}.dump() << "\n";
    for (const auto& t : A.triplets()) {
        out << t.row << "," << t.col << "," << format_double(t.weight) << "\n";
    }
    write_text_file(path, out.str());
}

SystemMatrix read_matrix_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::getline(in, line);
    Json header;
    try {
        header = Json::parse(line);
    } catch (const Json::parse_error&) {
        throw ConfigError("'" + path.string() + "': first line must be a JSON header");
    }
    const auto n = static_cast<std::size_t>(number_field(header, "n", "matrix header"));
    const auto d = static_cast<std::size_t>(number_field(header, "d", "matrix header"));
    const std::string format = header.value("format", "sparse");
    std::vector<Triplet> trips;
    for (std::size_t ln = 2; std::getline(in, line); ++ln) {
        if (line.empty()) {
            continue;
        }
        const auto parts = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(ln);
        if (parts.size() != 3) {
            throw ConfigError(where + ": expected 3 columns");
        }
        trips.push_back({parse_index(parts[0], where), parse_index(parts[1], where), parse_number(parts[2], where)});
    }
    if (format == "dense") {
        Vec values(n * d, 0.0);
        for (const auto& t : trips) {
            if (t.row >= n || t.col >= d) {
                throw ConfigError("'" + path.string() + "': triplet out of range");
            }
            values[t.row * d + t.col] = t.weight;
        }
        return SystemMatrix::dense(n, d, std::move(values));
    }
    try {
        return SystemMatrix::from_triplets(n, d, trips);
    } catch (const DimensionError& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

// ------------------------------------------------------------------- traces

std::string trace_csv(const SolverTrace& trace) {
    std::ostringstream out;
    out << "iter,dist_to_truth,avg_movement,loss,wall_ms\n";
    for (const auto& r : trace.records) {
        out << r.iter << "," << format_double(r.dist_to_truth) << "," << format_double(r.avg_movement) << ","
            << format_double(r.loss) << "," << format_double(r.wall_ms) << "\n";
    }
    return out.str();
}

void write_trace_csv(const fs::path& path, const SolverTrace& trace) { write_text_file(path, trace_csv(trace)); }

void write_measurements_csv(const fs::path& path, const MeasurementSet& y) {
    std::ostringstream out;
    out << "index,window,count\n";
    for (std::size_t w = 0; w < y.window_count(); ++w) {
        for (std::size_t m = y.window_offsets[w]; m < y.window_offsets[w + 1]; ++m) {
            out << m << "," << w << "," << format_double(y.counts[m]) << "\n";
        }
    }
    write_text_file(path, out.str());
}

MeasurementSet read_measurements_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::getline(in, line);
    if (line != "index,window,count") {
        throw ConfigError("'" + path.string() + "': expected header index,window,count");
    }
    MeasurementSet y;
    y.window_offsets.push_back(0);
    std::size_t current = 0;
    for (std::size_t ln = 2; std::getline(in, line); ++ln) {
        if (line.empty()) {
            continue;
        }
        const auto parts = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(ln);
        if (parts.size() != 3) {
            throw ConfigError(where + ": expected 3 columns");
        }
        const std::size_t idx = parse_index(parts[0], where);
        const std::size_t w = parse_index(parts[1], where);
        if (idx != y.counts.size() || w < current || w > current + 1) {
            throw ConfigError(where + ": measurements must be listed in order");
        }
        if (w == current + 1) {
            y.window_offsets.push_back(y.counts.size());
            current = w;
        }
        y.counts.push_back(parse_number(parts[2], where));
    }
    y.window_offsets.push_back(y.counts.size());
    return y;
}

} // namespace polyct
