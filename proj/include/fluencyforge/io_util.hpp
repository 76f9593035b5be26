#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fluencyforge::io {

// Reads a whole file into memory. Throws DataError if the file cannot be
// opened or read.
std::string read_file(const std::string& path);

// Splits text into lines on '\n', dropping a trailing '\r' on each line
// (tolerates CRLF input). A trailing newline does not produce an empty
// final line.
std::vector<std::string> split_lines(std::string_view text);

// read_file + split_lines.
std::vector<std::string> read_lines(const std::string& path);

// Writes content to `path` atomically: the bytes go to a temporary file in
// the same directory which is then renamed over the target, so a crash
// mid-write never leaves a truncated artifact. Throws DataError on failure.
void write_file_atomic(const std::string& path, std::string_view content);

// FNV-1a 64-bit hash, used for content fingerprints in report sidecars.
std::uint64_t fnv1a64(std::string_view data);

// Fixed-width lowercase hex rendering of a 64-bit hash.
std::string hex64(std::uint64_t value);

// Formats a double with up to `sig` significant digits, trimming trailing
// zeros ("0.123456", "1.5", "0"). Used for stable numeric fields in reports.
std::string format_sig(double value, int sig);

// Little-endian binary writer for checkpoint files. Accumulates into an
// in-memory buffer; callers persist it with write_file_atomic.
class BinWriter {
  public:
    void raw(const void* data, std::size_t n);
    void bytes(std::string_view s) { raw(s.data(), s.size()); }
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);

    const std::string& buffer() const { return buf_; }

  private:
    std::string buf_;
};

// Little-endian binary reader over a byte buffer. Reading past the end
// throws DataError mentioning `name` (typically the file path).
class BinReader {
  public:
    BinReader(std::string_view data, std::string name);

    std::string_view bytes(std::size_t n);
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();

    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }
    const std::string& name() const { return name_; }

  private:
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string name_;
};

} // namespace fluencyforge::io
