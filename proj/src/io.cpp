#include "traitlab/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "traitlab/config.hpp"
#include "traitlab/errors.hpp"
#include "traitlab/version.hpp"

namespace traitlab {

namespace fs = std::filesystem;

std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string header_lines(const OutputMeta& meta) {
    std::ostringstream os;
    os << "# traitlab " << kToolVersion << " " << meta.command << "\n";
    os << "# config_hash=" << hash_hex(meta.config_hash) << " base_seed=" << meta.base_seed
       << "\n";
    return os.str();
}

void atomic_write(const std::string& path, const std::string& body) {
    fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("io: cannot write '" + tmp + "'");
        out << body;
        if (!out) throw IoError("io: short write to '" + tmp + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("io: cannot rename '" + tmp + "' to '" + path + "'");
}

std::string format_value(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

TableWriter::TableWriter(std::string path, OutputMeta meta, std::vector<std::string> columns)
    : path_(std::move(path)), meta_(std::move(meta)) {
    payload_ = header_lines(meta_);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        payload_ += columns[i];
        payload_ += (i + 1 == columns.size()) ? "\n" : ",";
    }
}

void TableWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        payload_ += format_value(values[i]);
        payload_ += (i + 1 == values.size()) ? "\n" : ",";
    }
}

void TableWriter::raw_row(const std::string& line) {
    payload_ += line;
    payload_ += "\n";
}

std::uint64_t TableWriter::close() {
    if (closed_) throw IoError("io: writer already closed");
    closed_ = true;
    std::uint64_t h = fnv1a64(payload_);
    atomic_write(path_, payload_ + "# content_hash=" + hash_hex(h) + "\n");
    return h;
}

JsonlWriter::JsonlWriter(std::string path, OutputMeta meta)
    : path_(std::move(path)), meta_(std::move(meta)) {
    payload_ = "{\"meta\":{\"tool\":\"traitlab " + std::string(kToolVersion) +
               "\",\"command\":\"" + meta_.command + "\",\"config_hash\":\"" +
               hash_hex(meta_.config_hash) + "\",\"base_seed\":" +
               std::to_string(meta_.base_seed) + "}}\n";
}

void JsonlWriter::record(const std::string& json_line) {
    payload_ += json_line;
    payload_ += "\n";
}

std::uint64_t JsonlWriter::close() {
    if (closed_) throw IoError("io: writer already closed");
    closed_ = true;
    std::uint64_t h = fnv1a64(payload_);
    atomic_write(path_, payload_ + "{\"content_hash\":\"" + hash_hex(h) + "\"}\n");
    return h;
}

VerifyResult verify_output_file(const std::string& path, std::uint64_t expect_config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {false, "cannot open " + path};
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    // The trailer is the final line carrying content_hash.
    std::size_t pos = text.rfind("content_hash");
    if (pos == std::string::npos) return {false, "no content_hash trailer in " + path};
    std::size_t line_start = text.rfind('\n', pos);
    line_start = line_start == std::string::npos ? 0 : line_start + 1;
    std::string payload = text.substr(0, line_start);
    std::size_t hex = text.find("0x", pos);
    if (hex == std::string::npos) return {false, "malformed trailer in " + path};
    std::uint64_t stated = std::stoull(text.substr(hex + 2, 16), nullptr, 16);
    std::uint64_t actual = fnv1a64(payload);
    if (stated != actual) {
        return {false, path + ": content hash mismatch (stated " + hash_hex(stated) +
                           ", recomputed " + hash_hex(actual) + ")"};
    }
    if (expect_config_hash != 0) {
        std::string want = hash_hex(expect_config_hash);
        if (payload.find(want) == std::string::npos) {
            return {false, path + ": config hash " + want + " not found in header"};
        }
    }
    return {true, path + ": ok"};
}

}  // namespace traitlab
