#include "unshadow/tensor_archive.hpp"

#include <cstring>
#include <fstream>

#include "unshadow/errors.hpp"

namespace unshadow {

namespace {

enum class DtypeCode : uint8_t { F32 = 0, F64 = 1, I64 = 2 };

DtypeCode dtype_code(const torch::Tensor &t) {
    switch (t.scalar_type()) {
    case torch::kFloat32: return DtypeCode::F32;
    case torch::kFloat64: return DtypeCode::F64;
    case torch::kInt64: return DtypeCode::I64;
    default: throw IoError("TensorArchive: unsupported dtype");
    }
}

torch::ScalarType code_dtype(uint8_t code) {
    switch (static_cast<DtypeCode>(code)) {
    case DtypeCode::F32: return torch::kFloat32;
    case DtypeCode::F64: return torch::kFloat64;
    case DtypeCode::I64: return torch::kInt64;
    }
    throw IoError("TensorArchive: unknown dtype code");
}

template <typename T>
void put(std::ostream &os, T v) {
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T take(std::istream &is) {
    T v{};
    is.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!is)
        throw IoError("TensorArchive: truncated file");
    return v;
}

} // namespace

void TensorArchive::add(const std::string &name, const torch::Tensor &t) {
    entries_.emplace_back(name, t.detach().cpu().contiguous());
}

bool TensorArchive::has(const std::string &name) const {
    for (const auto &[n, _] : entries_)
        if (n == name)
            return true;
    return false;
}

const torch::Tensor &TensorArchive::get(const std::string &name) const {
    for (const auto &[n, t] : entries_)
        if (n == name)
            return t;
    throw IoError("TensorArchive: missing tensor '" + name + "'");
}

void TensorArchive::save(const std::filesystem::path &path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("TensorArchive: cannot open for write: " + path.string());
    os.write("USNT", 4);
    put<uint32_t>(os, kVersion);
    put<uint64_t>(os, metadata.size());
    os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    put<uint64_t>(os, entries_.size());
    for (const auto &[name, t] : entries_) {
        put<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint8_t>(os, static_cast<uint8_t>(dtype_code(t)));
        put<uint8_t>(os, static_cast<uint8_t>(t.dim()));
        for (int64_t d = 0; d < t.dim(); ++d)
            put<uint64_t>(os, static_cast<uint64_t>(t.size(d)));
        uint64_t bytes = static_cast<uint64_t>(t.numel()) * t.element_size();
        put<uint64_t>(os, bytes);
        os.write(static_cast<const char *>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    }
    if (!os)
        throw IoError("TensorArchive: write failed: " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("TensorArchive: cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "USNT", 4) != 0)
        throw IoError("TensorArchive: bad magic in " + path.string());
    auto version = take<uint32_t>(is);
    if (version != kVersion)
        throw IoError("TensorArchive: unsupported version " + std::to_string(version));

    TensorArchive ar;
    auto meta_len = take<uint64_t>(is);
    ar.metadata.resize(meta_len);
    is.read(ar.metadata.data(), static_cast<std::streamsize>(meta_len));

    auto count = take<uint64_t>(is);
    for (uint64_t i = 0; i < count; ++i) {
        auto name_len = take<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        auto dtype = code_dtype(take<uint8_t>(is));
        auto ndim = take<uint8_t>(is);
        std::vector<int64_t> dims(ndim);
        for (auto &d : dims)
            d = static_cast<int64_t>(take<uint64_t>(is));
        auto bytes = take<uint64_t>(is);
        auto t = torch::empty(dims, dtype);
        if (static_cast<uint64_t>(t.numel()) * t.element_size() != bytes)
            throw IoError("TensorArchive: size mismatch for '" + name + "'");
        is.read(static_cast<char *>(t.data_ptr()), static_cast<std::streamsize>(bytes));
        if (!is)
            throw IoError("TensorArchive: truncated tensor '" + name + "'");
        ar.entries_.emplace_back(std::move(name), std::move(t));
    }
    return ar;
}

} // namespace unshadow
