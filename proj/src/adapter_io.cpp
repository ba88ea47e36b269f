#include "plra/adapter_io.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace plra {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'R', 'A'};
constexpr uint32_t kVersion = 1;

void put_u32le(std::vector<unsigned char>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
}

void put_u64le(std::vector<unsigned char>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
}

uint32_t get_u32le(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

uint64_t get_u64le(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

void put_blob(std::vector<unsigned char>& out, const Tensor2D& t) {
    // Raw little-endian f32; this build targets little-endian hosts.
    const size_t n = t.data.size() * sizeof(float);
    const size_t off = out.size();
    out.resize(off + n);
    if (n > 0) {
        std::memcpy(out.data() + off, t.data.data(), n);
    }
}

}  // namespace

std::vector<unsigned char> serialize_adapter(const AdapterState& a) {
    nlohmann::json header;
    header["rank"] = a.rank;
    header["scaling"] = static_cast<double>(a.scaling);
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& [name, pair] : a.slots) {
        nlohmann::json s;
        s["name"] = name;
        s["a_shape"] = {pair.a.rows, pair.a.cols};
        s["b_shape"] = {pair.b.rows, pair.b.cols};
        slots.push_back(s);
    }
    header["slots"] = slots;
    const std::string header_str = header.dump();

    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32le(out, kVersion);
    put_u64le(out, static_cast<uint64_t>(header_str.size()));
    out.insert(out.end(), header_str.begin(), header_str.end());
    for (const auto& [name, pair] : a.slots) {
        put_blob(out, pair.a);
        put_blob(out, pair.b);
    }
    return out;
}

AdapterState deserialize_adapter(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw AdapterIoError(AdapterIoErrorKind::bad_magic, "adapter container: bad magic bytes");
    }
    if (bytes.size() < 16) {
        throw AdapterIoError(AdapterIoErrorKind::truncated, "adapter container: truncated preamble");
    }
    const uint32_t version = get_u32le(bytes.data() + 4);
    if (version != kVersion) {
        throw AdapterIoError(AdapterIoErrorKind::bad_version,
                             "adapter container: unsupported version " + std::to_string(version));
    }
    const uint64_t header_len = get_u64le(bytes.data() + 8);
    if (bytes.size() < 16 + header_len) {
        throw AdapterIoError(AdapterIoErrorKind::truncated, "adapter container: truncated header");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw AdapterIoError(AdapterIoErrorKind::bad_header,
                             std::string("adapter container: malformed header: ") + e.what());
    }

    AdapterState out;
    try {
        out.rank = header.at("rank").get<int>();
        out.scaling = static_cast<float>(header.at("scaling").get<double>());
        size_t offset = 16 + header_len;
        for (const auto& s : header.at("slots")) {
            const std::string name = s.at("name").get<std::string>();
            const auto a_shape = s.at("a_shape").get<std::vector<int>>();
            const auto b_shape = s.at("b_shape").get<std::vector<int>>();
            if (a_shape.size() != 2 || b_shape.size() != 2 || a_shape[0] < 0 || a_shape[1] < 0 ||
                b_shape[0] < 0 || b_shape[1] < 0) {
                throw AdapterIoError(AdapterIoErrorKind::shape_mismatch,
                                     "adapter container: malformed shape for slot " + name);
            }
            if (a_shape[0] != out.rank || b_shape[1] != out.rank) {
                throw AdapterIoError(AdapterIoErrorKind::shape_mismatch,
                                     "adapter container: slot " + name + " rank disagrees with header rank");
            }
            FactorPair pair;
            pair.a = Tensor2D(a_shape[0], a_shape[1]);
            pair.b = Tensor2D(b_shape[0], b_shape[1]);
            for (Tensor2D* t : {&pair.a, &pair.b}) {
                const size_t n = t->data.size() * sizeof(float);
                if (offset + n > bytes.size()) {
                    throw AdapterIoError(AdapterIoErrorKind::truncated,
                                         "adapter container: blob truncated in slot " + name);
                }
                if (n > 0) {
                    std::memcpy(t->data.data(), bytes.data() + offset, n);
                }
                offset += n;
            }
            out.slots.emplace_back(name, std::move(pair));
        }
        if (offset != bytes.size()) {
            throw AdapterIoError(AdapterIoErrorKind::shape_mismatch,
                                 "adapter container: trailing bytes after declared blobs");
        }
    } catch (const AdapterIoError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw AdapterIoError(AdapterIoErrorKind::bad_header,
                             std::string("adapter container: header fields missing or mistyped: ") + e.what());
    }
    return out;
}

void save_adapter(const AdapterState& a, const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = serialize_adapter(a);
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw AdapterIoError(AdapterIoErrorKind::io_failure, "cannot open for write: " + path.string());
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw AdapterIoError(AdapterIoErrorKind::io_failure, "write failed: " + path.string());
    }
}

AdapterState load_adapter(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw AdapterIoError(AdapterIoErrorKind::io_failure, "cannot open for read: " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_adapter(bytes);
}

}  // namespace plra
