#pragma once

#include <stdexcept>
#include <string>

namespace longdiff {

// Bad user-facing configuration: invalid ranges, malformed config values.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Problems with input/output data: files, formats, dataset contracts.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Volume file with unrecognized magic bytes or a corrupt header.
struct format_error : data_error {
    explicit format_error(const std::string& what) : data_error(what) {}
};

// Volume/checkpoint file that ends before its declared payload.
struct truncated_error : data_error {
    explicit truncated_error(const std::string& what) : data_error(what) {}
};

// File written by an incompatible format version.
struct version_error : data_error {
    explicit version_error(const std::string& what) : data_error(what) {}
};

// Non-finite values or other numerical breakdown inside the engine.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace longdiff
