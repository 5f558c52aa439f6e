#ifndef UNSHADOW_TENSOR_ARCHIVE_HPP
#define UNSHADOW_TENSOR_ARCHIVE_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace unshadow {

/// Flat binary container of named tensors plus a free-form JSON metadata
/// string. Writing is fully deterministic: identical content produces an
/// identical byte stream, which makes checkpoint round-trips byte-exact.
///
/// Layout (little endian):
///   "USNT" | u32 version | u64 meta_len | meta bytes | u64 tensor count
///   then per tensor: u32 name_len | name | u8 dtype | u8 ndim | u64 dims[] |
///   u64 byte_len | raw data
class TensorArchive {
public:
    static constexpr uint32_t kVersion = 1;

    std::string metadata; // JSON payload, opaque to the container

    void add(const std::string &name, const torch::Tensor &t);
    bool has(const std::string &name) const;
    const torch::Tensor &get(const std::string &name) const;
    const std::vector<std::pair<std::string, torch::Tensor>> &entries() const { return entries_; }

    void save(const std::filesystem::path &path) const;
    static TensorArchive load(const std::filesystem::path &path);

private:
    std::vector<std::pair<std::string, torch::Tensor>> entries_;
};

} // namespace unshadow

#endif
