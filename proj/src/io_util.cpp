#include "fluencyforge/io_util.hpp"

#include "fluencyforge/errors.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fluencyforge::io {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open file for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad())
        throw DataError("read failure on file: " + path);
    return std::move(buf).str();
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) {
                std::string_view line = text.substr(start);
                if (!line.empty() && line.back() == '\r')
                    line.remove_suffix(1);
                lines.emplace_back(line);
            }
            break;
        }
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

std::vector<std::string> read_lines(const std::string& path) {
    return split_lines(read_file(path));
}

void write_file_atomic(const std::string& path, std::string_view content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot open file for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            throw DataError("write failure on file: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::string err = std::strerror(errno);
        std::remove(tmp.c_str());
        throw DataError("cannot move " + tmp + " to " + path + ": " + err);
    }
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string format_sig(double value, int sig) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", sig, value);
    return buf;
}

void BinWriter::raw(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
}

void BinWriter::u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    }
    raw(b, 8);
}

void BinWriter::f64(double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
}

BinReader::BinReader(std::string_view data, std::string name)
    : data_(data), name_(std::move(name)) {}

std::string_view BinReader::bytes(std::size_t n) {
    if (n > data_.size() - pos_) {
        throw DataError(name_ + ": truncated file (need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", have " +
                        std::to_string(data_.size() - pos_) + ")");
    }
    std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::uint64_t BinReader::u64() {
    std::string_view b = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    }
    return v;
}

double BinReader::f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

} // namespace fluencyforge::io
