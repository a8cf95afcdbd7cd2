#include "gestgan/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gestgan/common.hpp"

namespace gestgan {

std::string format_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw IoError("parse_double: not a number: '" + s + "'");
    return v;
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_manifest(std::ostream& os, const Manifest& m) {
    for (const auto& [k, v] : m) os << k << "=" << v << "\n";
}

void write_manifest_file(const std::string& path, const Manifest& m) {
    std::ostringstream os;
    write_manifest(os, m);
    write_text_file(path, os.str());
}

Manifest read_manifest(std::istream& is) {
    Manifest m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("manifest: missing '=' in line: " + line);
        const std::string key = line.substr(0, eq);
        if (m.count(key)) throw IoError("manifest: duplicate key: " + key);
        m[key] = line.substr(eq + 1);
    }
    return m;
}

Manifest read_manifest_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("manifest: cannot open " + path);
    return read_manifest(is);
}

const std::string& manifest_get(const Manifest& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) throw IoError("manifest: missing key: " + key);
    return it->second;
}

double manifest_get_double(const Manifest& m, const std::string& key) {
    return parse_double(manifest_get(m, key));
}

std::size_t manifest_get_size(const Manifest& m, const std::string& key) {
    const std::string& s = manifest_get(m, key);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw IoError("manifest: bad integer for " + key);
    return static_cast<std::size_t>(v);
}

void save_tensors(std::ostream& os, const TensorDict& dict) {
    os << "tensors " << dict.size() << "\n";
    for (std::size_t i = 0; i < dict.size(); ++i) {
        const Tensor& t = dict.values[i];
        os << "name " << dict.names[i] << "\n";
        os << "shape";
        for (std::size_t e : t.shape()) os << " " << e;
        os << "\n";
        os << "data";
        for (std::size_t k = 0; k < t.size(); ++k) os << " " << format_hex(t[k]);
        os << "\n";
    }
    if (!os) throw IoError("save_tensors: write failure");
}

namespace {

std::string expect_line_word(std::istream& is, const std::string& word) {
    std::string tag;
    if (!(is >> tag) || tag != word) {
        throw IoError("load_tensors: expected '" + word + "', got '" + tag + "'");
    }
    std::string rest;
    if (!(is >> rest)) throw IoError("load_tensors: truncated after '" + word + "'");
    return rest;
}

}  // namespace

TensorDict load_tensors(std::istream& is) {
    std::string tag;
    std::size_t count = 0;
    if (!(is >> tag >> count) || tag != "tensors") {
        throw IoError("load_tensors: missing 'tensors <count>' header");
    }
    TensorDict dict;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string name = expect_line_word(is, "name");
        if (!(is >> tag) || tag != "shape") throw IoError("load_tensors: expected 'shape'");
        std::vector<std::size_t> shape;
        // shape extents run until the 'data' tag
        while (is >> tag && tag != "data") {
            char* end = nullptr;
            const unsigned long long e = std::strtoull(tag.c_str(), &end, 10);
            if (end == tag.c_str() || *end != '\0') {
                throw IoError("load_tensors: bad shape extent '" + tag + "'");
            }
            shape.push_back(static_cast<std::size_t>(e));
        }
        if (tag != "data") throw IoError("load_tensors: missing 'data' for " + name);
        const std::size_t n = Tensor::numel_of(shape);
        std::vector<double> data(n);
        for (std::size_t k = 0; k < n; ++k) {
            std::string cell;
            if (!(is >> cell)) throw IoError("load_tensors: truncated data for " + name);
            data[k] = parse_double(cell);
        }
        dict.add(name, Tensor(std::move(shape), std::move(data)));
    }
    return dict;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ",";
        os << cells[i];
    }
    os << "\n";
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("csv: cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(is, line)) throw IoError("csv: empty file " + path);
    table.header = split_csv_row(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        table.rows.push_back(split_csv_row(line));
        if (table.rows.back().size() != table.header.size()) {
            throw IoError("csv: ragged row in " + path);
        }
    }
    return table;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << contents;
    if (!os) throw IoError("write failure: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace gestgan
