#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vnn/network.hpp"

namespace vnn {

enum class Split : std::uint8_t { Train, Validation, Test };

const char* split_name(Split split);

// Samples with exactly one split tag each. All inputs share one dimension.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<LabeledSample> samples, std::vector<Split> splits, std::size_t num_classes);

    std::size_t size() const noexcept { return samples_.size(); }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }

    const std::vector<LabeledSample>& samples() const noexcept { return samples_; }
    const std::vector<Split>& splits() const noexcept { return splits_; }

    std::vector<LabeledSample> subset(Split split) const;
    std::size_t count(Split split) const;

    bool operator==(const Dataset&) const = default;

private:
    std::vector<LabeledSample> samples_;
    std::vector<Split> splits_;
    std::size_t input_dim_ = 0;
    std::size_t num_classes_ = 0;
};

struct MnistOptions {
    // Keep the first 400 items; 0-199 validation, 200-399 test.
    bool paper_split = false;
    // Tag used for every item when paper_split is off.
    Split default_split = Split::Test;
};

// IDX parsing (big-endian; magic 0x00000803 for images, 0x00000801 for labels).
Dataset parse_mnist(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                    const MnistOptions& options = {});
Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path, const MnistOptions& options = {});

// Gaussian clusters clipped to [0,1]^dim; 60/20/20 train/validation/test split.
Dataset synth_blobs(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed,
                    double spread = 0.08);

// CSV rows "label,v0,v1,...", one per sample of the requested split.
void export_csv(const std::vector<LabeledSample>& samples, const std::filesystem::path& path);
std::vector<LabeledSample> import_csv(const std::filesystem::path& path);

}  // namespace vnn
