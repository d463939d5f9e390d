#include "mcmmf/frame.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "mcmmf/errors.hpp"

namespace mcmmf {

namespace {

// Reads one whitespace/comment separated token of a PGM header.
std::string next_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c == '#') in.unget();
    return tok;
}

long parse_header_int(std::istream& in, const char* what) {
    const std::string tok = next_token(in);
    std::size_t pos = in.tellg() < 0 ? 0 : static_cast<std::size_t>(in.tellg());
    if (tok.empty())
        throw format_error(std::string("pgm: missing ") + what, pos);
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw format_error(std::string("pgm: bad ") + what + " '" + tok + "'", pos);
    }
}

} // namespace

void write_pgm(const SpeckleFrame& frame, const std::string& path) {
    if (frame.width <= 0 || frame.height <= 0)
        throw std::invalid_argument("write_pgm: empty frame");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << frame.width << " " << frame.height << "\n"
        << SpeckleFrame::kMaxCount << "\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(frame.width) * 2);
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const std::uint16_t v = frame.at(x, y);
            row[2 * static_cast<std::size_t>(x)] = static_cast<unsigned char>(v >> 8);
            row[2 * static_cast<std::size_t>(x) + 1] = static_cast<unsigned char>(v & 0xff);
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

SpeckleFrame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm: cannot open " + path);

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '5')
        throw format_error("pgm: expected magic 'P5'", 0);

    const long w = parse_header_int(in, "width");
    const long h = parse_header_int(in, "height");
    const long maxval = parse_header_int(in, "maxval");
    const std::size_t header_end =
        in.tellg() < 0 ? 0 : static_cast<std::size_t>(in.tellg());
    if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20)
        throw format_error("pgm: unreasonable dimensions", header_end);
    if (maxval != SpeckleFrame::kMaxCount)
        throw format_error("pgm: maxval must be 4095, got " + std::to_string(maxval),
                           header_end);

    SpeckleFrame frame(static_cast<int>(w), static_cast<int>(h));
    std::vector<unsigned char> raw(frame.counts.size() * 2);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw format_error("pgm: truncated pixel data",
                           header_end + static_cast<std::size_t>(in.gcount()));
    for (std::size_t i = 0; i < frame.counts.size(); ++i) {
        const std::uint16_t v = static_cast<std::uint16_t>(
            (static_cast<std::uint16_t>(raw[2 * i]) << 8) | raw[2 * i + 1]);
        if (v > SpeckleFrame::kMaxCount)
            throw format_error("pgm: sample exceeds maxval", header_end + 2 * i);
        frame.counts[i] = v;
    }
    return frame;
}

} // namespace mcmmf
