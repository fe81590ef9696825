#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace traitlab {

// Provenance carried in every output file header: the config hash and seed
// make each file re-derivable; the trailing content hash lets `--verify`
// check integrity without recomputation.
struct OutputMeta {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t base_seed = 0;
};

// Buffered writers: payload is hashed before anything touches disk and files
// are written atomically (tmp + rename).
class TableWriter {
public:
    TableWriter(std::string path, OutputMeta meta, std::vector<std::string> columns);
    void row(const std::vector<double>& values);
    void raw_row(const std::string& line);
    // Writes the file; returns the content hash.
    std::uint64_t close();

private:
    std::string path_;
    OutputMeta meta_;
    std::string payload_;
    bool closed_ = false;
};

class JsonlWriter {
public:
    JsonlWriter(std::string path, OutputMeta meta);
    void record(const std::string& json_line);
    std::uint64_t close();

private:
    std::string path_;
    OutputMeta meta_;
    std::string payload_;
    bool closed_ = false;
};

struct VerifyResult {
    bool ok = false;
    std::string detail;
};

// Recomputes the content hash of a written file against its trailer and
// optionally checks the embedded config hash.
VerifyResult verify_output_file(const std::string& path, std::uint64_t expect_config_hash = 0);

std::string hash_hex(std::uint64_t h);

}  // namespace traitlab
