#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "plra/adapter.hpp"

namespace plra {

enum class AdapterIoErrorKind {
    bad_magic,
    bad_version,
    bad_header,
    truncated,
    shape_mismatch,
    io_failure,
};

class AdapterIoError : public std::runtime_error {
public:
    AdapterIoError(AdapterIoErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    AdapterIoErrorKind kind() const { return kind_; }

private:
    AdapterIoErrorKind kind_;
};

// Container layout (little-endian throughout):
//   magic "PLRA" | u32 version = 1 | u64 header length | JSON header |
//   per slot in header order: raw f32 blob of A, then raw f32 blob of B.
// Header JSON: {"rank": r, "scaling": s, "slots": [{"name", "a_shape", "b_shape"}]}.
std::vector<unsigned char> serialize_adapter(const AdapterState& a);
AdapterState deserialize_adapter(const std::vector<unsigned char>& bytes);

void save_adapter(const AdapterState& a, const std::filesystem::path& path);
AdapterState load_adapter(const std::filesystem::path& path);

}  // namespace plra
