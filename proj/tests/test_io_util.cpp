#include "fluencyforge/io_util.hpp"

#include "fluencyforge/errors.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

using namespace fluencyforge;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "ff_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("io_util") {

TEST_CASE("split_lines handles LF, CRLF, and missing trailing newline") {
    auto lines = io::split_lines("a\nb\r\nc");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "a");
    CHECK(lines[1] == "b");
    CHECK(lines[2] == "c");

    CHECK(io::split_lines("").empty());
    CHECK(io::split_lines("x\n").size() == 1);

    auto blank = io::split_lines("a\n\nb\n");
    REQUIRE(blank.size() == 3);
    CHECK(blank[1] == "");
}

TEST_CASE("write_file_atomic + read_file round-trip, leaves no temp file") {
    auto path = (temp_dir() / "roundtrip.txt").string();
    std::string payload = "line one\nстрока два\n";
    io::write_file_atomic(path, payload);
    CHECK(io::read_file(path) == payload);
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    io::write_file_atomic(path, "replaced");
    CHECK(io::read_file(path) == "replaced");
    std::filesystem::remove(path);
}

TEST_CASE("read_file on a missing path throws DataError") {
    CHECK_THROWS_AS(io::read_file("/nonexistent/definitely/missing.txt"), DataError);
}

TEST_CASE("fnv1a64 matches published reference values") {
    // Reference digests of the FNV-1a 64 specification.
    CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(io::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hex64 renders fixed-width lowercase hex") {
    CHECK(io::hex64(0) == "0000000000000000");
    CHECK(io::hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
    CHECK(io::hex64(0xFULL) == "000000000000000f");
}

TEST_CASE("format_sig trims to significant digits") {
    CHECK(io::format_sig(0.0, 6) == "0");
    CHECK(io::format_sig(1.5, 6) == "1.5");
    CHECK(io::format_sig(0.123456789, 6) == "0.123457");
    CHECK(io::format_sig(1234567.0, 6) == "1.23457e+06");
}

} // TEST_SUITE
