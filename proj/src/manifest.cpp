#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "delaylens/cli.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

namespace {

std::string to_hex(const unsigned char* digest, unsigned int len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

struct DigestCtx {
    EVP_MD_CTX* ctx;

    DigestCtx() : ctx(EVP_MD_CTX_new()) {
        if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("sha256 context initialization failed");
        }
    }
    ~DigestCtx() { EVP_MD_CTX_free(ctx); }
    DigestCtx(const DigestCtx&) = delete;
    DigestCtx& operator=(const DigestCtx&) = delete;

    void update(const void* data, std::size_t len) {
        if (EVP_DigestUpdate(ctx, data, len) != 1) {
            throw std::runtime_error("sha256 update failed");
        }
    }
    std::string finish() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
            throw std::runtime_error("sha256 finalization failed");
        }
        return to_hex(digest, len);
    }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    DigestCtx ctx;
    ctx.update(bytes.data(), bytes.size());
    return ctx.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    DigestCtx ctx;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        if (got > 0) ctx.update(buf, static_cast<std::size_t>(got));
    }
    return ctx.finish();
}

std::string sha256_tree(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("'" + dir.string() + "' is not a directory");
    }
    std::vector<std::pair<std::string, std::filesystem::path>> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        files.emplace_back(entry.path().lexically_relative(dir).generic_string(), entry.path());
    }
    std::sort(files.begin(), files.end());
    DigestCtx ctx;
    for (const auto& [rel, path] : files) {
        const std::string line = rel + '\0' + sha256_file(path) + '\n';
        ctx.update(line.data(), line.size());
    }
    return ctx.finish();
}

void RunManifest::add_input(const std::string& path) {
    const std::filesystem::path p(path);
    inputs[path] = std::filesystem::is_directory(p) ? sha256_tree(p) : sha256_file(p);
}

void RunManifest::add_output(const std::filesystem::path& out_dir, const std::string& name) {
    outputs[name] = sha256_file(out_dir / name);
}

void write_run_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest) {
    nlohmann::ordered_json doc;
    doc["tool"] = std::string(kToolName);
    doc["version"] = std::string(kToolVersion);
    doc["command"] = manifest.command;
    doc["config"] = manifest.config;
    doc["inputs"] = manifest.inputs;
    doc["outputs"] = manifest.outputs;
    std::ofstream out(out_dir / "run-manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write run-manifest.json in '" + out_dir.string() + "'");
    out << doc.dump(1) << '\n';
}

}  // namespace delaylens
