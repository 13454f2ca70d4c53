#include "vnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "vnn/error.hpp"
#include "vnn/io_util.hpp"
#include "vnn/model_io.hpp"

namespace vnn {

const char* split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

Dataset::Dataset(std::vector<LabeledSample> samples, std::vector<Split> splits,
                 std::size_t num_classes)
    : samples_(std::move(samples)), splits_(std::move(splits)), num_classes_(num_classes) {
    if (samples_.size() != splits_.size()) {
        throw DataError("every sample needs exactly one split tag");
    }
    if (!samples_.empty()) input_dim_ = samples_.front().input.size();
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const LabeledSample& s = samples_[i];
        if (s.input.size() != input_dim_) {
            throw DataError("sample " + std::to_string(i) + " has dimension " +
                            std::to_string(s.input.size()) + ", expected " +
                            std::to_string(input_dim_));
        }
        if (s.label >= num_classes_) {
            throw DataError("sample " + std::to_string(i) + " label " + std::to_string(s.label) +
                            " out of range");
        }
        for (double v : s.input) {
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                throw DataError("sample " + std::to_string(i) + " has a value outside [0,1]");
            }
        }
    }
}

std::vector<LabeledSample> Dataset::subset(Split split) const {
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (splits_[i] == split) out.push_back(samples_[i]);
    }
    return out;
}

std::size_t Dataset::count(Split split) const {
    return static_cast<std::size_t>(std::count(splits_.begin(), splits_.end(), split));
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
    if (offset + 4 > bytes.size()) {
        throw FormatError(std::string(what) + ": truncated header at offset " +
                          std::to_string(offset));
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

Dataset parse_mnist(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                    const MnistOptions& options) {
    constexpr std::uint32_t kImageMagic = 0x00000803;
    constexpr std::uint32_t kLabelMagic = 0x00000801;

    const std::uint32_t image_magic = read_be32(images, 0, "images");
    if (image_magic != kImageMagic) {
        throw FormatError("images: bad magic number at offset 0");
    }
    const std::uint32_t n_images = read_be32(images, 4, "images");
    const std::uint32_t rows = read_be32(images, 8, "images");
    const std::uint32_t cols = read_be32(images, 12, "images");

    const std::uint32_t label_magic = read_be32(labels, 0, "labels");
    if (label_magic != kLabelMagic) {
        throw FormatError("labels: bad magic number at offset 0");
    }
    const std::uint32_t n_labels = read_be32(labels, 4, "labels");

    if (n_images != n_labels) {
        throw FormatError("count mismatch: images header at offset 4 declares " +
                          std::to_string(n_images) + " items, labels header at offset 4 declares " +
                          std::to_string(n_labels));
    }
    const std::size_t pixels = std::size_t{rows} * cols;
    if (pixels == 0) throw FormatError("images: zero-sized image at offset 8");
    const std::size_t image_bytes = 16 + pixels * n_images;
    if (images.size() < image_bytes) {
        throw FormatError("images: truncated payload at offset " + std::to_string(images.size()) +
                          ", expected " + std::to_string(image_bytes) + " bytes");
    }
    if (labels.size() < 8 + std::size_t{n_labels}) {
        throw FormatError("labels: truncated payload at offset " + std::to_string(labels.size()) +
                          ", expected " + std::to_string(8 + std::size_t{n_labels}) + " bytes");
    }

    std::size_t keep = n_images;
    if (options.paper_split) {
        if (n_images < 400) {
            throw DataError("paper split needs at least 400 items, file has " +
                            std::to_string(n_images));
        }
        keep = 400;
    }

    std::vector<LabeledSample> samples;
    std::vector<Split> splits;
    samples.reserve(keep);
    std::size_t num_classes = 0;
    for (std::size_t i = 0; i < keep; ++i) {
        LabeledSample s;
        s.input.resize(pixels);
        const std::uint8_t* px = images.data() + 16 + i * pixels;
        for (std::size_t p = 0; p < pixels; ++p) s.input[p] = px[p] / 255.0;
        s.label = labels[8 + i];
        num_classes = std::max(num_classes, s.label + 1);
        samples.push_back(std::move(s));
        if (options.paper_split) {
            splits.push_back(i < 200 ? Split::Validation : Split::Test);
        } else {
            splits.push_back(options.default_split);
        }
    }
    // MNIST has ten digits; keep that even when the retained slice misses one.
    num_classes = std::max<std::size_t>(num_classes, 10);
    return Dataset(std::move(samples), std::move(splits), num_classes);
}

Dataset load_mnist(const std::filesystem::path& images_path,
                   const std::filesystem::path& labels_path, const MnistOptions& options) {
    const auto images = read_bytes(images_path);
    const auto labels = read_bytes(labels_path);
    return parse_mnist(images, labels, options);
}

Dataset synth_blobs(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed,
                    double spread) {
    if (classes == 0 || dim == 0) throw ConfigError("synth_blobs: dim and classes must be positive");
    if (n < classes) throw ConfigError("synth_blobs: need n >= classes");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.2, 0.8);

    // Cluster centres, re-drawn a bounded number of times to keep them apart.
    std::vector<std::vector<double>> centres;
    const double min_sep = 0.3;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> best;
        double best_sep = -1.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::vector<double> cand(dim);
            for (double& v : cand) v = unit(rng);
            double sep = std::numeric_limits<double>::infinity();
            for (const auto& other : centres) {
                double d = 0.0;
                for (std::size_t k = 0; k < dim; ++k) d += (cand[k] - other[k]) * (cand[k] - other[k]);
                sep = std::min(sep, std::sqrt(d));
            }
            if (sep > best_sep) {
                best_sep = sep;
                best = cand;
            }
            if (sep >= min_sep) break;
        }
        centres.push_back(std::move(best));
    }

    std::normal_distribution<double> noise(0.0, spread);
    std::vector<LabeledSample> drawn(n);
    for (std::size_t i = 0; i < n; ++i) {
        LabeledSample& s = drawn[i];
        s.label = i % classes;
        s.input.resize(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            s.input[k] = std::clamp(centres[s.label][k] + noise(rng), 0.0, 1.0);
        }
    }
    std::shuffle(drawn.begin(), drawn.end(), rng);

    const std::size_t n_train = (6 * n) / 10;
    const std::size_t n_val = (2 * n) / 10;
    std::vector<Split> splits(n, Split::Test);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) {
            splits[i] = Split::Train;
        } else if (i < n_train + n_val) {
            splits[i] = Split::Validation;
        }
    }
    return Dataset(std::move(drawn), std::move(splits), classes);
}

void export_csv(const std::vector<LabeledSample>& samples, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const LabeledSample& s : samples) {
        out << s.label;
        for (double v : s.input) out << ',' << format_real(v);
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

std::vector<LabeledSample> import_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("dataset not found: " + path.string());
    std::vector<LabeledSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() < 2) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected label and at least one value");
        }
        LabeledSample s;
        std::string label = trim(fields[0]);
        auto [lp, lec] = std::from_chars(label.data(), label.data() + label.size(), s.label);
        if (lec != std::errc() || lp != label.data() + label.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + " field 1: bad label");
        }
        for (std::size_t f = 1; f < fields.size(); ++f) {
            std::string tok = trim(fields[f]);
            double v = 0.0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + " field " +
                                 std::to_string(f + 1) + ": bad value '" + tok + "'");
            }
            s.input.push_back(v);
        }
        if (!samples.empty() && s.input.size() != samples.front().input.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": inconsistent row width");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace vnn
