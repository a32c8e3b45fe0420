#include "distreg/data_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "distreg/error.hpp"

namespace distreg {

bool Column::missing(std::size_t i) const {
    return categorical ? cat[i].empty() : std::isnan(num[i]);
}

std::vector<std::string> Column::levels() const {
    std::set<std::string> s;
    for (const auto& v : cat)
        if (!v.empty()) s.insert(v);
    return {s.begin(), s.end()};
}

void DataTable::add_(Column c) {
    if (has(c.name)) throw DataError("duplicate column '" + c.name + "'");
    if (!columns_.empty() && c.size() != nrows_)
        throw DataError("column '" + c.name + "' has " + std::to_string(c.size()) + " rows, expected " +
                        std::to_string(nrows_));
    nrows_ = c.size();
    columns_.push_back(std::move(c));
}

void DataTable::add_numeric(std::string name, std::vector<double> values) {
    Column c;
    c.name = std::move(name);
    c.num = std::move(values);
    add_(std::move(c));
}

void DataTable::add_categorical(std::string name, std::vector<std::string> values) {
    Column c;
    c.name = std::move(name);
    c.categorical = true;
    c.cat = std::move(values);
    add_(std::move(c));
}

bool DataTable::has(const std::string& name) const {
    return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

const Column& DataTable::column(const std::string& name) const {
    for (const auto& c : columns_)
        if (c.name == name) return c;
    throw DataError("unknown column '" + name + "'");
}

DataTable DataTable::select_rows(const std::vector<std::size_t>& rows) const {
    DataTable out;
    for (const auto& c : columns_) {
        Column s;
        s.name = c.name;
        s.categorical = c.categorical;
        for (auto r : rows) {
            if (r >= nrows_) throw DataError("row index out of range");
            if (c.categorical) s.cat.push_back(c.cat[r]);
            else s.num.push_back(c.num[r]);
        }
        out.add_(std::move(s));
    }
    out.nrows_ = rows.size();
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

bool parse_number(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

}

DataTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV input");
    auto header = split_line(line);
    for (auto& h : header) h = trim(h);
    std::vector<std::vector<std::string>> cells(header.size());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_line(line);
        if (f.size() != header.size())
            throw DataError("CSV line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                            " fields, expected " + std::to_string(header.size()));
        for (std::size_t j = 0; j < f.size(); ++j) cells[j].push_back(trim(f[j]));
    }
    DataTable t;
    for (std::size_t j = 0; j < header.size(); ++j) {
        bool numeric = true;
        std::vector<double> nums;
        nums.reserve(cells[j].size());
        for (const auto& s : cells[j]) {
            double v;
            if (is_missing(s)) nums.push_back(std::numeric_limits<double>::quiet_NaN());
            else if (parse_number(s, v)) nums.push_back(v);
            else {
                numeric = false;
                break;
            }
        }
        if (numeric) {
            t.add_numeric(header[j], std::move(nums));
        } else {
            std::vector<std::string> cats;
            for (const auto& s : cells[j]) cats.push_back(is_missing(s) ? std::string() : s);
            t.add_categorical(header[j], std::move(cats));
        }
    }
    return t;
}

DataTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open data file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

void write_csv(const DataTable& table, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write '" + path + "'");
    const auto& cols = table.columns();
    for (std::size_t j = 0; j < cols.size(); ++j) f << (j ? "," : "") << cols[j].name;
    f << '\n';
    char buf[64];
    for (std::size_t i = 0; i < table.nrows(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (j) f << ',';
            if (cols[j].missing(i)) {
                f << "NA";
            } else if (cols[j].categorical) {
                f << cols[j].cat[i];
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", cols[j].num[i]);
                f << buf;
            }
        }
        f << '\n';
    }
}

}
