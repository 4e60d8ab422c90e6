#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace delaylens {

inline constexpr std::string_view kToolName = "delaylens";
inline constexpr std::string_view kToolVersion = "0.1.0";

// --- Content hashing (audit manifests) ---------------------------------------

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
// Digest of "relative-path NUL file-digest LF" lines over the regular files
// under dir, sorted by relative path. Stable across traversal order.
std::string sha256_tree(const std::filesystem::path& dir);

// --- Run manifest -------------------------------------------------------------

// One audit record per command invocation. Everything in it is a pure
// function of the inputs and the resolved configuration, so rerunning a
// command rewrites the same bytes.
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;   // resolved option values
    std::map<std::string, std::string> inputs;   // path given on the CLI -> digest
    std::map<std::string, std::string> outputs;  // file name in out dir -> digest

    void add_input(const std::string& path);        // file or directory
    void add_output(const std::filesystem::path& out_dir, const std::string& name);
};

// Writes <out_dir>/run-manifest.json.
void write_run_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

// --- Summary report -----------------------------------------------------------

struct SummaryVariable {
    std::string name;
    std::vector<double> values;
};

struct SummaryRow {
    std::string name;
    std::size_t n = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Quartiles use the same interpolated percentile as the winsorization rules.
// Throws DataError on an empty variable.
SummaryRow summarize_variable(const SummaryVariable& variable);

// Markdown table: Variable | N | Min | Q1 | Median | Mean | Q3 | Max.
std::string summary_markdown(const std::vector<SummaryVariable>& variables);

// --- Fetch --------------------------------------------------------------------

// Downloads url_template with "{date}" substituted per date and writes
// <out_dir>/<date>.csv. The bearer token goes into the Authorization header.
// Returns the file names written. Throws UsageError on a malformed template
// and DataError on transport or non-200 responses.
std::vector<std::string> fetch_releases(const std::string& url_template,
                                        const std::vector<std::string>& dates,
                                        const std::string& token,
                                        const std::filesystem::path& out_dir);

// --- Entry point ----------------------------------------------------------------

// Full command-line surface. Returns a process exit code: 0 success, 2 usage
// or configuration error, 3 data error, 4 numerical non-convergence.
int run_cli(int argc, const char* const* argv);

}  // namespace delaylens
