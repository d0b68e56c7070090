#pragma once

#include <string>

#include "elsem/sim.hpp"

namespace elsem {

// Parses a JSON study configuration. Every field is optional and defaults to
// the standard study setup; unknown keys are rejected with ConfigError.
McConfig parse_config(const std::string& json_text);
McConfig load_config(const std::string& path);

// Data files carry a header row y1..yd,x1..xc followed by numeric rows.
struct DataFile {
    Matrix data;
    int d = 0;
    int c = 0;
};

DataFile read_data_csv(const std::string& path);
void write_data_csv(const std::string& path, const Matrix& data, int d, int c);

}  // namespace elsem
