#include "vidinfer/cache.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace vidinfer {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("sha256: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
    std::ifstream in(dir_ / key, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void ResponseCache::put(const std::string& key, std::string_view payload) const {
    // Unique-enough temp name across processes sharing the cache directory.
    static const unsigned process_token = std::random_device{}();
    const unsigned n = counter_.fetch_add(1);
    const fs::path tmp =
        dir_ / (".tmp-" + key + "-" + std::to_string(process_token) + "-" + std::to_string(n));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cache: cannot write '" + tmp.string() + "'");
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    fs::rename(tmp, dir_ / key);
}

}  // namespace vidinfer
