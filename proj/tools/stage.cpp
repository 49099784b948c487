#include <algorithm>
#include <ctime>
#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::cli {

namespace {

const char* const kPipelineKeys[] = {
    "seed",           "threads",         "tz_offset_minutes", "lease_max_gap_hours", "ap_granularity",
    "admob_min_devices", "cv_folds",     "svm_lambda",        "svm_epochs",          "kmeans_restarts",
    "gmm_k_max",      "gmm_restarts",    "synth_rows",
};

std::string iso_time(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Paths in manifests are relative to the stage directory when possible.
std::string relative_to(const fs::path& p, const fs::path& base) {
    std::error_code ec;
    auto rel = fs::relative(p, base, ec);
    if (ec || rel.empty()) return p.generic_string();
    return rel.generic_string();
}

}  // namespace

Context Context::from_config(config::Config cfg, std::optional<std::uint64_t> seed_override, bool quiet) {
    for (const auto& key : cfg.keys_in("pipeline")) {
        if (std::find(std::begin(kPipelineKeys), std::end(kPipelineKeys), key) == std::end(kPipelineKeys))
            throw Error(Errc::BadFormat, "unknown config key 'pipeline." + key + "'");
    }
    Context c;
    auto& o = c.opts;
    o.seed = static_cast<std::uint64_t>(cfg.get_int("pipeline.seed", static_cast<long long>(o.seed)));
    if (seed_override) o.seed = *seed_override;
    o.threads = static_cast<int>(cfg.get_int("pipeline.threads", o.threads));
    o.tz_offset_minutes = static_cast<int>(cfg.get_int("pipeline.tz_offset_minutes", o.tz_offset_minutes));
    o.lease_max_gap = static_cast<Millis>(
        cfg.get_double("pipeline.lease_max_gap_hours", static_cast<double>(o.lease_max_gap) / kMsPerHour) *
        kMsPerHour);
    o.ap_granularity = cfg.get_bool("pipeline.ap_granularity", o.ap_granularity);
    o.admob_min_devices =
        static_cast<std::size_t>(cfg.get_int("pipeline.admob_min_devices", static_cast<long long>(o.admob_min_devices)));
    o.cv_folds = static_cast<int>(cfg.get_int("pipeline.cv_folds", o.cv_folds));
    o.svm.lambda = cfg.get_double("pipeline.svm_lambda", o.svm.lambda);
    o.svm.epochs = static_cast<int>(cfg.get_int("pipeline.svm_epochs", o.svm.epochs));
    o.kmeans_restarts = static_cast<int>(cfg.get_int("pipeline.kmeans_restarts", o.kmeans_restarts));
    o.gmm_k_max = static_cast<int>(cfg.get_int("pipeline.gmm_k_max", o.gmm_k_max));
    o.gmm.restarts = static_cast<int>(cfg.get_int("pipeline.gmm_restarts", o.gmm.restarts));
    c.synth_rows = static_cast<std::size_t>(cfg.get_int("pipeline.synth_rows", 0));

    auto bad = [](const std::string& m) { throw Error(Errc::BadFormat, "config: " + m); };
    if (o.threads < 1) bad("threads must be >= 1");
    if (o.lease_max_gap < 0) bad("lease_max_gap_hours must be >= 0");
    if (o.cv_folds < 2) bad("cv_folds must be >= 2");
    if (!(o.svm.lambda > 0)) bad("svm_lambda must be > 0");
    if (o.svm.epochs < 1) bad("svm_epochs must be >= 1");
    if (o.kmeans_restarts < 1) bad("kmeans_restarts must be >= 1");
    if (o.gmm_k_max < 1) bad("gmm_k_max must be >= 1");
    if (o.gmm.restarts < 1) bad("gmm_restarts must be >= 1");

    c.cfg = std::move(cfg);
    c.seed_override = seed_override;
    c.quiet = quiet;
    return c;
}

synth::PopulationSpec Context::population() const {
    auto spec = synth::PopulationSpec::from_config(cfg);
    if (seed_override) spec.seed = *seed_override;
    spec.validate();
    return spec;
}

std::uint64_t file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + p.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

Stage::Stage(std::string name, fs::path dir, const Context& ctx)
    : name_(std::move(name)), dir_(std::move(dir)), seed_(ctx.opts.seed), quiet_(ctx.quiet),
      started_(std::chrono::system_clock::now()), t0_(std::chrono::steady_clock::now()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + dir_.string() + ": " + ec.message());
    progress("start");
}

void Stage::input(const fs::path& p) { inputs_.push_back(p); }

fs::path Stage::output(const std::string& file) {
    outputs_.push_back(dir_ / file);
    return outputs_.back();
}

void Stage::param(const std::string& key, const std::string& value) { params_.emplace_back(key, value); }

void Stage::log(const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::cerr << fmt::format("[{} {:7.2f}s] {}\n", name_, s, msg);
}

void Stage::finish() {
    const fs::path base = fs::absolute(dir_);
    {
        auto out = io::open_output(dir_ / "manifest.txt");
        out << kManifestTag << '\n';
        out << "stage = " << name_ << '\n';
        out << "version = " << kVersion << '\n';
        out << "seed = " << seed_ << '\n';
        out << "[params]\n";
        for (const auto& [k, v] : params_) out << k << " = " << v << '\n';
        out << "[inputs]\n";
        for (const auto& p : inputs_) {
            out << relative_to(fs::absolute(p), base);
            if (fs::is_regular_file(p)) out << ' ' << fs::file_size(p) << fmt::format(" fnv1a64:{:016x}", file_hash(p));
            out << '\n';
        }
        out << "[outputs]\n";
        for (const auto& p : outputs_) {
            out << relative_to(fs::absolute(p), base);
            if (fs::is_regular_file(p)) out << ' ' << fs::file_size(p) << fmt::format(" fnv1a64:{:016x}", file_hash(p));
            out << '\n';
        }
    }
    {
        const auto now = std::chrono::system_clock::now();
        auto out = io::open_output(dir_ / "manifest.time");
        out << "started = " << iso_time(started_) << '\n';
        out << "finished = " << iso_time(now) << '\n';
        out << "elapsed_s = "
            << text::format_double(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count())
            << '\n';
    }
    progress("done, {} outputs", outputs_.size());
}

}  // namespace flames::cli
