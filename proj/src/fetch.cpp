// All network code lives in this translation unit.

#include <fstream>

#include <httplib.h>

#include "delaylens/cli.hpp"
#include "delaylens/errors.hpp"

namespace delaylens {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // leading slash included
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw UsageError("url '" + url + "' has no scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string substitute_date(const std::string& url_template, const std::string& date) {
    const std::string placeholder = "{date}";
    const auto pos = url_template.find(placeholder);
    if (pos == std::string::npos) {
        throw UsageError("url template must contain '{date}'");
    }
    std::string url = url_template;
    do {
        url.replace(url.find(placeholder), placeholder.size(), date);
    } while (url.find(placeholder) != std::string::npos);
    return url;
}

}  // namespace

std::vector<std::string> fetch_releases(const std::string& url_template,
                                        const std::vector<std::string>& dates,
                                        const std::string& token,
                                        const std::filesystem::path& out_dir) {
    if (dates.empty()) throw UsageError("no release dates requested");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (const std::string& date : dates) {
        const SplitUrl url = split_url(substitute_date(url_template, date));
        httplib::Client client(url.origin);
        client.set_connection_timeout(10);
        client.set_read_timeout(60);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        httplib::Result res = client.Get(url.path, headers);
        if (!res) {
            throw DataError("fetch of '" + url.origin + url.path +
                            "' failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw DataError("fetch of '" + url.origin + url.path + "' returned status " +
                            std::to_string(res->status));
        }
        const std::string name = date + ".csv";
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw DataError("cannot write '" + (out_dir / name).string() + "'");
        out << res->body;
        written.push_back(name);
    }
    return written;
}

}  // namespace delaylens
