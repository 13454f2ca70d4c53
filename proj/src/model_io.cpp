#include "vnn/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "vnn/error.hpp"
#include "vnn/io_util.hpp"

namespace vnn {

namespace {

constexpr const char* kHeader = "vnn-model v1";

const char* activation_tag(Activation act) {
    return act == Activation::ReLU ? "relu" : "identity";
}

class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    // Next non-empty line split on whitespace.
    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            std::istringstream ss(line);
            std::vector<std::string> fields;
            std::string f;
            while (ss >> f) fields.push_back(f);
            if (!fields.empty()) return fields;
        }
        fail("unexpected end of file");
    }

    [[noreturn]] void fail(const std::string& msg, std::size_t field = 0) const {
        std::string where = source_ + ":" + std::to_string(line_no_);
        if (field > 0) where += " field " + std::to_string(field);
        throw ParseError(where + ": " + msg);
    }

    double real(const std::string& token, std::size_t field) const {
        double v = 0.0;
        const char* first = token.data();
        const char* last = first + token.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) fail("invalid real '" + token + "'", field);
        if (!std::isfinite(v)) fail("non-finite value '" + token + "'", field);
        return v;
    }

    std::size_t count(const std::string& token, std::size_t field) const {
        std::size_t v = 0;
        const char* first = token.data();
        const char* last = first + token.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) fail("invalid integer '" + token + "'", field);
        return v;
    }

    void expect(const std::vector<std::string>& fields, std::size_t idx, const std::string& word) const {
        if (fields.size() <= idx || fields[idx] != word) {
            fail("expected '" + word + "'", idx + 1);
        }
    }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

}  // namespace

std::string format_real(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw IoError("cannot format real");
    return std::string(buf, ptr);
}

void write_network(std::ostream& out, const Network& net) {
    out << kHeader << '\n';
    out << "layers " << net.num_layers() << '\n';
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
        const Layer& layer = net.layer(k);
        out << "layer " << (k + 1) << " in " << layer.in_dim() << " out " << layer.out_dim()
            << " act " << activation_tag(layer.activation()) << '\n';
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            for (std::size_t c = 0; c < layer.in_dim(); ++c) {
                if (c > 0) out << ' ';
                out << format_real(layer.weight(r, c));
            }
            out << '\n';
        }
        out << "bias";
        for (double b : layer.biases()) out << ' ' << format_real(b);
        out << '\n';
    }
    out << "end\n";
}

Network read_network(std::istream& in, const std::string& source) {
    LineReader reader(in, source);

    auto header = reader.next();
    if (header.size() != 2 || header[0] != "vnn-model" || header[1] != "v1") {
        reader.fail("missing 'vnn-model v1' header");
    }
    auto count_line = reader.next();
    reader.expect(count_line, 0, "layers");
    if (count_line.size() != 2) reader.fail("expected 'layers <N>'");
    const std::size_t n_layers = reader.count(count_line[1], 2);
    if (n_layers == 0) reader.fail("layer count must be positive", 2);

    std::vector<Layer> layers;
    for (std::size_t k = 0; k < n_layers; ++k) {
        auto head = reader.next();
        if (head.size() != 8) reader.fail("expected 'layer <k> in <n> out <m> act <tag>'");
        reader.expect(head, 0, "layer");
        if (reader.count(head[1], 2) != k + 1) reader.fail("layer index out of order", 2);
        reader.expect(head, 2, "in");
        const std::size_t in_dim = reader.count(head[3], 4);
        reader.expect(head, 4, "out");
        const std::size_t out_dim = reader.count(head[5], 6);
        reader.expect(head, 6, "act");
        Activation act;
        if (head[7] == "relu") {
            act = Activation::ReLU;
        } else if (head[7] == "identity") {
            act = Activation::Identity;
        } else {
            reader.fail("unknown activation '" + head[7] + "'", 8);
        }
        if (in_dim == 0 || out_dim == 0) reader.fail("layer dimensions must be positive");

        std::vector<double> weights;
        weights.reserve(in_dim * out_dim);
        for (std::size_t r = 0; r < out_dim; ++r) {
            auto row = reader.next();
            if (row.size() != in_dim) {
                reader.fail("expected " + std::to_string(in_dim) + " weights, found " +
                            std::to_string(row.size()));
            }
            for (std::size_t c = 0; c < in_dim; ++c) weights.push_back(reader.real(row[c], c + 1));
        }
        auto bias = reader.next();
        reader.expect(bias, 0, "bias");
        if (bias.size() != out_dim + 1) {
            reader.fail("expected " + std::to_string(out_dim) + " biases, found " +
                        std::to_string(bias.size() - 1));
        }
        std::vector<double> biases;
        for (std::size_t r = 0; r < out_dim; ++r) biases.push_back(reader.real(bias[r + 1], r + 2));
        layers.emplace_back(in_dim, out_dim, std::move(weights), std::move(biases), act);
    }
    auto tail = reader.next();
    if (tail.size() != 1 || tail[0] != "end") reader.fail("expected 'end'");

    try {
        return Network(std::move(layers));
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ostringstream out;
    write_network(out, net);
    write_file_atomic(path, out.str());
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("model not found: " + path.string());
    return read_network(in, path.string());
}

}  // namespace vnn
