#include "nodulecad/image_io.hpp"

#include <png.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace nodulecad::imaging {

namespace {

std::string describe(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Reads the next whitespace-delimited PGM header token, skipping comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
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

long parse_header_int(std::istream& in, const std::filesystem::path& path) {
    const std::string tok = next_token(in);
    try {
        std::size_t used = 0;
        long v = std::stol(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InputError("malformed PGM header in " + describe(path));
    }
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

LoadedImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image " + describe(path));
    if (next_token(in) != "P5") throw InputError("not a binary PGM (P5) file: " + describe(path));
    const long width = parse_header_int(in, path);
    const long height = parse_header_int(in, path);
    const long maxval = parse_header_int(in, path);
    if (maxval > 65535) throw InputError("PGM maxval above 65535 in " + describe(path));
    // next_token consumed exactly one whitespace byte after maxval.

    LoadedImage out;
    out.bit_depth = maxval > 255 ? 16 : 8;
    out.raw.width = static_cast<int>(width);
    out.raw.height = static_cast<int>(height);
    const std::size_t count = static_cast<std::size_t>(width) * height;
    const std::size_t bytes = count * (out.bit_depth == 16 ? 2 : 1);
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw InputError("truncated PGM pixel data in " + describe(path));

    out.raw.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t v = out.bit_depth == 16 ? (std::uint32_t{buf[2 * i]} << 8) | buf[2 * i + 1]
                                              : std::uint32_t{buf[i]};
        if (v > static_cast<std::uint32_t>(maxval))
            throw InputError("PGM sample exceeds maxval in " + describe(path));
        out.raw.values[i] = v;
    }
    return out;
}

namespace {

// libpng reports through callbacks; keep the message for the exception instead
// of printing it.
void png_fail(png_structp png, png_const_charp msg) {
    if (auto* out = static_cast<std::string*>(png_get_error_ptr(png))) *out = msg;
    png_longjmp(png, 1);
}

void png_quiet(png_structp, png_const_charp) {}

}  // namespace

LoadedImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw InputError("cannot open image " + describe(path));

    std::string png_message;
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &png_message, png_fail, png_quiet);
    if (!png) throw InputError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw InputError("libpng initialisation failed");
    }

    LoadedImage out;
    std::vector<png_byte> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("corrupt PNG file " + describe(path) + ": " + png_message);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("PNG is not single-channel grayscale: " + describe(path));
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    png_read_update_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = buf.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    out.bit_depth = depth;
    out.raw.width = static_cast<int>(width);
    out.raw.height = static_cast<int>(height);
    out.raw.values.resize(static_cast<std::size_t>(width) * height);
    for (png_uint_32 r = 0; r < height; ++r) {
        for (png_uint_32 c = 0; c < width; ++c) {
            const png_byte* p = rows[r];
            out.raw.values[static_cast<std::size_t>(r) * width + c] =
                depth == 16 ? (std::uint32_t{p[2 * c]} << 8) | p[2 * c + 1] : std::uint32_t{p[c]};
        }
    }
    return out;
}

LoadedImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image " + describe(path));
    std::array<char, 8> sig{};
    in.read(sig.data(), sig.size());
    if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
    if (in.gcount() == 8 &&
        png_sig_cmp(reinterpret_cast<png_const_bytep>(sig.data()), 0, sig.size()) == 0)
        return read_png(path);
    throw InputError("unsupported image format (expected PGM P5 or PNG): " + describe(path));
}

void write_pgm(const std::filesystem::path& path, const RawImage& img, std::uint32_t maxval) {
    if (maxval == 0 || maxval > 65535) throw ContractError("write_pgm: maxval out of range");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write image " + describe(path));
    out << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
    const bool wide = maxval > 255;
    for (std::uint32_t v : img.values) {
        if (v > maxval) throw ContractError("write_pgm: sample exceeds maxval");
        if (wide) out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xFF));
    }
    if (!out) throw InputError("failed writing image " + describe(path));
}

}  // namespace nodulecad::imaging
