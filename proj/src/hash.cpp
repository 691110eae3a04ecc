#include "robscat/hash.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>
#include <vector>

#include "robscat/errors.hpp"

namespace robscat {

namespace {

std::string digest_hex(const unsigned char* md, unsigned int len) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
        throw IoError("sha256_hex: digest failure");
    return digest_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("sha256_file: cannot open " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return sha256_hex(buf.str());
}

}  // namespace robscat
