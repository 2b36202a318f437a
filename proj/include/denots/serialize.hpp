#pragma once

#include "denots/autodiff.hpp"

#include <cstdint>
#include <string>

namespace denots {

// Self-describing binary weight container: magic, version, named shape
// table, raw little-endian doubles, FNV-1a checksum of the payload.
void save_params(const std::string& path, const ad::ParamSet& params,
                 std::uint64_t config_hash = 0);

struct LoadedParams {
    ad::ParamSet params;
    std::uint64_t config_hash = 0;
};

LoadedParams load_params(const std::string& path);

std::uint64_t file_checksum(const std::string& path);
std::string hex64(std::uint64_t value);

// Minimal SVG polyline chart, enough for sweep/attack curves.
struct SvgSeries {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series, bool log_x = false);

} // namespace denots
