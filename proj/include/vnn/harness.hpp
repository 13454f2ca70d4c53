#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vnn/baselines.hpp"
#include "vnn/dataset.hpp"
#include "vnn/network.hpp"
#include "vnn/oracle.hpp"
#include "vnn/sparsify.hpp"
#include "vnn/verify.hpp"

namespace vnn {

// ----- fixtures -----

struct FixtureSpec {
    std::string name;
    std::vector<std::size_t> hidden;
    std::size_t dim = 2;
    std::size_t classes = 2;
    std::size_t samples = 250;  // 60/20/20 train/validation/test
    std::uint64_t seed = 1;
    std::size_t epochs = 40;
};

// The committed fixture set: two 2x8 nets, 2x20, 3x16 and 4x32.
std::vector<FixtureSpec> standard_fixtures();

struct Fixture {
    std::string name;
    Network net;
    std::vector<LabeledSample> validation;
    std::vector<LabeledSample> test;
};

Fixture build_fixture(const FixtureSpec& spec);

// Files <name>.vnn, <name>.val.csv and <name>.test.csv in `dir`.
void save_fixture(const Fixture& fixture, const std::filesystem::path& dir);
Fixture load_fixture(const std::filesystem::path& dir, const std::string& name);

// ----- sparsify configuration file -----

// Plain key=value lines: epsilon, epsilon_mode, margin, zero_threshold and
// layers (comma-separated, 1-based). '#' starts a comment. Keys not present
// keep the values already in `base`. Throws ConfigError on unknown keys or
// malformed values; the result is validated.
SparsifyConfig parse_sparsify_config(std::string_view text, SparsifyConfig base = {});
std::vector<std::size_t> parse_layer_list(std::string_view text);  // 1-based in, 0-based out

// ----- verification sweeps -----

struct SweepRow {
    std::size_t sample_id = 0;
    double delta = 0.0;
    VerifyMethod method = VerifyMethod::Interval;
    bool misclassified = false;  // skipped; counts as not verified
    Verdict verdict = Verdict::Unknown;
    double time_ms = 0.0;
    double min_margin_lb = 0.0;
};

struct SweepOptions {
    std::vector<double> deltas;
    std::vector<VerifyMethod> methods{VerifyMethod::Interval, VerifyMethod::Polyhedral};
    bool clip = false;
    std::size_t jobs = 0;  // 0: OpenMP default
};

// Rows ordered by method, then delta, then sample.
std::vector<SweepRow> verify_sweep(const Network& net, const std::vector<LabeledSample>& samples,
                                   const SweepOptions& options);

struct SweepSummary {
    VerifyMethod method = VerifyMethod::Interval;
    double delta = 0.0;
    std::size_t verified = 0;
    std::size_t total = 0;
    double mean_time_ms = 0.0;  // over the samples actually verified (not skipped)

    double percent() const { return total == 0 ? 0.0 : 100.0 * verified / total; }
};

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);

// sample_id,delta,method,verdict,time_ms,min_margin_lb
std::string sweep_csv(const std::vector<SweepRow>& rows);

// ----- exact-oracle matrix -----

// counts[row][col]: row = original verdict, col = other model's verdict, in
// the order Robust, NotRobust, ResourceExceeded. One entry per sample and
// competing class.
struct OracleMatrix {
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::size_t samples = 0;
    std::size_t classes = 0;
    double delta = 0.0;

    std::size_t total() const;
    std::string markdown(const std::string& original_name, const std::string& other_name) const;
};

// nullopt (with `note` filled) when either model exceeds limits.max_neurons.
std::optional<OracleMatrix> oracle_matrix(const Network& original, const Network& other,
                                          const std::vector<LabeledSample>& samples, double delta,
                                          bool clip, const OracleLimits& limits,
                                          std::string* note = nullptr);

// ----- comparison -----

struct CompareOptions {
    double mbp_rate = 0.5;
    PruneScope mbp_scope = PruneScope::Global;
    SweepOptions sweep;
    bool oracle = false;
    double oracle_delta = 0.02;
    OracleLimits oracle_limits;
};

struct ModelSummary {
    std::string name;
    Network net;
    double accuracy = 0.0;
    std::size_t nnz = 0;
};

struct CurveRow {
    std::string model;
    SweepSummary summary;
};

struct CompareResult {
    std::vector<ModelSummary> models;  // original, vnn, mbp at rate, mbp at matched sparsity
    std::vector<CurveRow> curve;
    std::optional<OracleMatrix> matrix;
    std::string oracle_note;

    // model,method,delta,verified,total,percent,mean_time_ms
    std::string curve_csv() const;
    std::string markdown() const;
};

CompareResult compare_models(const Network& original, const Network& vnn,
                             const std::vector<LabeledSample>& samples, const CompareOptions& options);

}  // namespace vnn
