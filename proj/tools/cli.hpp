#pragma once

// Stage runners behind the `flames` command. Each stage reads its inputs from
// files, writes its outputs plus a manifest into one directory, and returns.
// `pipeline` chains the same runners, so a pipeline tree equals running the
// stages by hand.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "flames/config.hpp"
#include "flames/pipeline.hpp"
#include "flames/synth.hpp"

namespace flames::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = FLAMES_VERSION;
inline constexpr const char* kManifestTag = "flames-manifest-v1";

// Bad flags or flag combinations; maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Context {
    config::Config cfg;           // config file with flag overrides applied
    pipeline::Options opts;
    std::optional<std::uint64_t> seed_override;  // --seed or FLAMES_SEED
    bool quiet = false;
    std::size_t synth_rows = 0;   // per type; 0 = as many as the real table holds

    // Reads [pipeline] keys from cfg. Throws Error{BadFormat} on unknown keys.
    static Context from_config(config::Config cfg, std::optional<std::uint64_t> seed_override, bool quiet);
    // Population spec from cfg with the seed override applied.
    synth::PopulationSpec population() const;
};

// Records inputs and outputs of one stage and writes manifest.txt (data
// only, reproducible) and manifest.time (wall-clock times) on finish().
class Stage {
public:
    Stage(std::string name, fs::path dir, const Context& ctx);

    void input(const fs::path& p);
    fs::path output(const std::string& file);
    void param(const std::string& key, const std::string& value);
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    template <class... Args>
    void progress(fmt::format_string<Args...> f, Args&&... args) {
        if (!quiet_) log(fmt::format(f, std::forward<Args>(args)...));
    }
    void finish();
    const fs::path& dir() const { return dir_; }

private:
    void log(const std::string& msg);

    std::string name_;
    fs::path dir_;
    std::uint64_t seed_;
    bool quiet_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
    std::vector<std::pair<std::string, std::string>> params_;
    std::chrono::system_clock::time_point started_;
    std::chrono::steady_clock::time_point t0_;
};

// FNV-1a 64 over the file bytes.
std::uint64_t file_hash(const fs::path& p);

struct TraceInputs {
    fs::path aplog, netflow, buildings, ouis, dns;
};

struct TestgenResult {
    TraceInputs files;
    fs::path truth;
};

TestgenResult run_testgen(const Context& ctx, const std::optional<fs::path>& spec_file, const fs::path& out);

// Re-emits parsed records in canonical form; copies and validates the side tables.
TraceInputs run_ingest(const Context& ctx, const TraceInputs& in, const fs::path& out);

struct FuseFiles {
    fs::path leases, core;
};
FuseFiles run_fuse(const Context& ctx, const TraceInputs& in, const fs::path& out);

struct ClassifyFiles {
    fs::path ouis, core;
};
ClassifyFiles run_classify(const Context& ctx, const fs::path& core, const fs::path& ouis, const fs::path& dns,
                           const fs::path& aplog, const fs::path& out);

// aplog and ouis are optional; without them the per-type outputs are skipped.
fs::path run_mobility(const Context& ctx, const fs::path& leases, const fs::path& buildings,
                      const std::optional<fs::path>& aplog, const std::optional<fs::path>& ouis, const fs::path& out);

fs::path run_traffic(const Context& ctx, const fs::path& core, const fs::path& out);

fs::path run_features(const Context& ctx, const fs::path& mobility, const fs::path& traffic, const fs::path& out);

void run_correlate(const Context& ctx, const fs::path& features, const fs::path& out);

void run_fit(const Context& ctx, const fs::path& features, const std::optional<fs::path>& core, const fs::path& out);

struct GmmFiles {
    fs::path combined_flute, combined_cello, traffic_flute, traffic_cello;
};

// `sets` empty means all four feature sets (svm, kmeans only).
void run_model_svm(const Context& ctx, const fs::path& features, std::vector<features::FeatureSet> sets,
                   const fs::path& out);
void run_model_kmeans(const Context& ctx, const fs::path& features, std::vector<features::FeatureSet> sets,
                      const fs::path& out);
GmmFiles run_model_gmm(const Context& ctx, const fs::path& features, const fs::path& out);

struct SynthInputs {
    fs::path flute_model, cello_model;
    std::optional<fs::path> features;  // real rows to validate against
    std::optional<fs::path> traffic_flute_model, traffic_cello_model;
};
void run_synth(const Context& ctx, const SynthInputs& in, const fs::path& out);

// Either spec_file (traces are generated first) or `traces` must be given.
void run_pipeline(const Context& ctx, const std::optional<fs::path>& spec_file,
                  const std::optional<TraceInputs>& traces, const fs::path& out);

}  // namespace flames::cli
