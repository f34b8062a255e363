#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cugr {

// Streaming SHA-256, hex-encoded. Digests identify artifacts (configs,
// parameter blobs, files) for the freeze audits and --verify.
class Digest {
public:
    Digest();
    ~Digest();
    Digest(const Digest&) = delete;
    Digest& operator=(const Digest&) = delete;

    void update(const void* data, size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    template <typename T>
    void update_pod(const T& v) { update(&v, sizeof(T)); }

    std::string hex(); // finalizes; object must not be reused afterwards

private:
    void* ctx_;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

} // namespace cugr
