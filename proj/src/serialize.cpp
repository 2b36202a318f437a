#include "denots/serialize.hpp"

#include "denots/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace denots {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("load_params: truncated file");
    return v;
}

} // namespace

void save_params(const std::string& path, const ad::ParamSet& params,
                 std::uint64_t config_hash) {
    std::ostringstream payload(std::ios::binary);
    put(payload, static_cast<std::uint32_t>(params.count()));
    for (const auto& e : params.entries()) {
        put(payload, static_cast<std::uint16_t>(e.name.size()));
        payload.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put(payload, static_cast<std::uint8_t>(e.value.shape().size()));
        for (std::size_t d : e.value.shape()) put(payload, static_cast<std::uint64_t>(d));
    }
    for (const auto& e : params.entries()) {
        payload.write(reinterpret_cast<const char*>(e.value.data().data()),
                      static_cast<std::streamsize>(e.value.size() * sizeof(double)));
    }
    const std::string body = payload.str();
    const std::uint64_t checksum = fnv1a64_bytes(body.data(), body.size());

    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("save_params: cannot open " + path);
    file.write(kMagic, 4);
    put(file, kVersion);
    put(file, config_hash);
    put(file, static_cast<std::uint64_t>(body.size()));
    file.write(body.data(), static_cast<std::streamsize>(body.size()));
    put(file, checksum);
}

LoadedParams load_params(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("load_params: cannot open " + path);
    char magic[4];
    file.read(magic, 4);
    if (!file || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_params: bad magic in " + path);
    }
    const auto version = get<std::uint32_t>(file);
    if (version != kVersion) {
        throw std::runtime_error("load_params: unsupported version " + std::to_string(version));
    }
    LoadedParams out;
    out.config_hash = get<std::uint64_t>(file);
    const auto body_size = get<std::uint64_t>(file);
    std::string body(body_size, '\0');
    file.read(body.data(), static_cast<std::streamsize>(body_size));
    if (!file) throw std::runtime_error("load_params: truncated body in " + path);
    const auto checksum = get<std::uint64_t>(file);
    if (checksum != fnv1a64_bytes(body.data(), body.size())) {
        throw std::runtime_error("load_params: checksum mismatch in " + path);
    }

    std::istringstream is(body, std::ios::binary);
    const auto count = get<std::uint32_t>(is);
    std::vector<std::pair<std::string, std::vector<std::size_t>>> headers;
    headers.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rank = get<std::uint8_t>(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is));
        headers.emplace_back(std::move(name), std::move(shape));
    }
    for (auto& [name, shape] : headers) {
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data().data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw std::runtime_error("load_params: truncated tensor data");
        out.params.add(name, std::move(t));
    }
    return out;
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("file_checksum: cannot open " + path);
    std::uint64_t h = 14695981039346656037ull;
    char buf[1 << 16];
    while (file) {
        file.read(buf, sizeof(buf));
        h = fnv1a64_bytes(buf, static_cast<std::size_t>(file.gcount()), h);
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return s;
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<SvgSeries>& series, bool log_x) {
    const int width = 640, height = 420, pad = 50;
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            const double x = log_x ? std::log10(std::max(s.xs[i], 1e-300)) : s.xs[i];
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, s.ys[i]);
            y_max = std::max(y_max, s.ys[i]);
        }
    }
    if (!(x_max > x_min)) x_max = x_min + 1.0;
    if (!(y_max > y_min)) y_max = y_min + 1.0;
    auto px = [&](double x) {
        if (log_x) x = std::log10(std::max(x, 1e-300));
        return pad + (x - x_min) / (x_max - x_min) * (width - 2 * pad);
    };
    auto py = [&](double y) { return height - pad - (y - y_min) / (y_max - y_min) * (height - 2 * pad); };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};
    std::ofstream file(path);
    if (!file) throw std::runtime_error("write_svg_chart: cannot open " + path);
    file << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
         << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    file << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
         << "</text>\n";
    file << "<line x1='" << pad << "' y1='" << height - pad << "' x2='" << width - pad << "' y2='"
         << height - pad << "' stroke='black'/>\n";
    file << "<line x1='" << pad << "' y1='" << pad << "' x2='" << pad << "' y2='" << height - pad
         << "' stroke='black'/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        file << "<polyline fill='none' stroke='" << palette[s % 6] << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < series[s].xs.size(); ++i) {
            file << px(series[s].xs[i]) << "," << py(series[s].ys[i]) << " ";
        }
        file << "'/>\n";
        file << "<text x='" << width - pad + 4 << "' y='" << pad + 16 * static_cast<int>(s)
             << "' font-size='11' fill='" << palette[s % 6] << "'>" << series[s].label
             << "</text>\n";
    }
    file << "</svg>\n";
}

} // namespace denots
