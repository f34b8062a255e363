#include "cugr/digest.hpp"

#include "cugr/common.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>

namespace cugr {

Digest::Digest() {
    EVP_MD_CTX* c = EVP_MD_CTX_new();
    check(c != nullptr, "sha256: failed to allocate context");
    EVP_DigestInit_ex(c, EVP_sha256(), nullptr);
    ctx_ = c;
}

Digest::~Digest() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Digest::update(const void* data, size_t len) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len);
}

std::string Digest::hex() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int out_len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out, &out_len);
    static const char* digits = "0123456789abcdef";
    std::string s(out_len * 2, '0');
    for (unsigned int i = 0; i < out_len; ++i) {
        s[2 * i] = digits[out[i] >> 4];
        s[2 * i + 1] = digits[out[i] & 0xf];
    }
    return s;
}

std::string sha256_hex(const void* data, size_t len) {
    Digest d;
    d.update(data, len);
    return d.hex();
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "sha256: cannot open " + path);
    Digest d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        d.update(buf, static_cast<size_t>(in.gcount()));
    }
    return d.hex();
}

} // namespace cugr
