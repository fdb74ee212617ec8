#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "assocnet/error.hpp"

namespace assocnet {

// Minimal RFC 4180 reader: quoted fields, "" escapes, LF or CRLF records.
class CsvParser {
public:
    explicit CsvParser(std::istream& in) : in_(in) {}

    // Reads one record into `fields`; returns false at end of input.
    bool next(std::vector<std::string>& fields) {
        fields.clear();
        int c = in_.get();
        if (c == EOF) return false;
        std::string field;
        bool quoted = false;
        ++line_;
        while (true) {
            if (quoted) {
                if (c == EOF) fail("csv: unterminated quoted field at line ", line_);
                if (c == '"') {
                    int nxt = in_.get();
                    if (nxt == '"') {
                        field.push_back('"');
                    } else {
                        quoted = false;
                        c = nxt;
                        continue;
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(static_cast<char>(c));
                }
            } else {
                if (c == EOF || c == '\n') {
                    if (!field.empty() && field.back() == '\r') field.pop_back();
                    fields.push_back(std::move(field));
                    return true;
                }
                if (c == ',') {
                    fields.push_back(std::move(field));
                    field.clear();
                } else if (c == '"' && field.empty()) {
                    quoted = true;
                } else {
                    field.push_back(static_cast<char>(c));
                }
            }
            c = in_.get();
        }
    }

    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline void write_csv_field(std::ostream& out, const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) {
        out << field;
        return;
    }
    out << '"';
    for (char c : field) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        write_csv_field(out, fields[i]);
    }
    out << '\n';
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file for reading: ", path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open file for writing: ", path);
    return out;
}

}  // namespace assocnet
