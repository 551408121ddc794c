#include "lapkm/image.hpp"
#include "lapkm/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace lapkm {
namespace {

/// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
    std::string tok;
    int ch = 0;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

long header_number(std::istream& in, const char* what) {
    const auto tok = header_token(in);
    if (tok.empty()) throw_data(std::string("pgm: truncated header (missing ") + what + ")");
    for (char c : tok) {
        if (!std::isdigit(static_cast<unsigned char>(c))) throw_data(std::string("pgm: malformed ") + what + " '" + tok + "'");
    }
    return std::stol(tok);
}

}  // namespace

GrayImage parse_pgm(std::istream& in) {
    const auto magic = header_token(in);
    if (magic != "P5" && magic != "P2") throw_data("pgm: unsupported magic '" + magic + "' (expected P2 or P5)");
    GrayImage img;
    img.cols = header_number(in, "width");
    img.rows = header_number(in, "height");
    const long maxval = header_number(in, "maxval");
    if (img.cols <= 0 || img.rows <= 0) throw_data("pgm: image dimensions must be positive");
    if (maxval <= 0 || maxval > 65535) throw_data("pgm: maxval must be in 1..65535");
    img.maxval = static_cast<int>(maxval);
    const auto count = static_cast<std::size_t>(img.rows * img.cols);
    img.pixels.resize(count);

    if (magic == "P5") {
        // header_token consumed exactly one whitespace byte after maxval.
        const std::size_t bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(count * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw_data("pgm: truncated pixel data");
        for (std::size_t i = 0; i < count; ++i) {
            img.pixels[i] = bytes == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const auto tok = header_token(in);
            if (tok.empty()) throw_data("pgm: truncated pixel data");
            for (char c : tok) {
                if (!std::isdigit(static_cast<unsigned char>(c))) throw_data("pgm: malformed pixel value '" + tok + "'");
            }
            img.pixels[i] = static_cast<std::uint16_t>(std::stol(tok));
        }
    }
    for (auto v : img.pixels) {
        if (v > img.maxval) throw_data("pgm: pixel value exceeds maxval");
    }
    return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_data("cannot open " + path.string());
    return parse_pgm(in);
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_data("cannot write " + path.string());
    out << "P5\n" << image.cols << ' ' << image.rows << '\n' << image.maxval << '\n';
    for (auto v : image.pixels) {
        if (image.maxval > 255) out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xff));
    }
}

Dataset pixel_features(const GrayImage& image) {
    Dataset data;
    data.points.resize(image.rows * image.cols, 3);
    for (Index r = 0; r < image.rows; ++r) {
        for (Index c = 0; c < image.cols; ++c) {
            const Index n = r * image.cols + c;
            data.points(n, 0) = static_cast<double>(r) / static_cast<double>(image.rows);
            data.points(n, 1) = static_cast<double>(c) / static_cast<double>(image.cols);
            data.points(n, 2) = static_cast<double>(image.at(r, c)) / static_cast<double>(image.maxval);
        }
    }
    return data;
}

Dataset load_pgm(const std::filesystem::path& path) { return pixel_features(read_pgm(path)); }

GrayImage label_image(const Labels& labels, Index rows, Index cols, int clusters) {
    if (static_cast<Index>(labels.size()) != rows * cols) throw_usage("label_image: label count does not match image size");
    GrayImage img;
    img.rows = rows;
    img.cols = cols;
    img.maxval = 255;
    img.pixels.resize(labels.size());
    const int span = std::max(1, clusters - 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        img.pixels[i] = static_cast<std::uint16_t>(std::max(0, labels[i]) * 255 / span);
    }
    return img;
}

OccluderImage synthetic_occluder(Index size, Index square, double texture, std::uint64_t seed) {
    if (size < 2 || square < 1 || square >= size) throw_usage("occluder: need 1 <= square < size");
    if (!(texture >= 0)) throw_usage("occluder: texture must be nonnegative");
    auto rng = make_stream(seed, Stream::generator);
    OccluderImage out;
    out.image.rows = size;
    out.image.cols = size;
    out.image.maxval = 255;
    out.image.pixels.resize(static_cast<std::size_t>(size * size));
    out.mask.resize(out.image.pixels.size());
    const Index lo = (size - square) / 2;
    for (Index r = 0; r < size; ++r) {
        for (Index c = 0; c < size; ++c) {
            const bool inside = r >= lo && r < lo + square && c >= lo && c < lo + square;
            double v = 0.2;
            if (!inside) v = 0.55 + 0.35 * static_cast<double>(c) / static_cast<double>(size - 1) + texture * gaussian(rng);
            out.image.at(r, c) = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
            out.mask[static_cast<std::size_t>(r * size + c)] = inside;
        }
    }
    return out;
}

}  // namespace lapkm
