// flames: command-line front end for the trace-fusion stages.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cli.hpp"
#include "flames/error.hpp"
#include "flames/text.hpp"

namespace {

using namespace flames;
using namespace flames::cli;

// Flag values kept as text; set ones are written over the config before it is read.
struct Overrides {
    std::vector<std::pair<std::string, CLI::Option*>> flags;
    std::map<std::string, std::string> values;

    CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto* opt = app->add_option(flag, values[key], help);
        flags.emplace_back(key, opt);
        return opt;
    }
    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help,
             const CLI::Validator& check) {
        add(app, flag, key, help)->check(check);
    }

    void apply(config::Config& cfg) const {
        for (const auto& [key, opt] : flags)
            if (opt->count() > 0) cfg.set(key, values.at(key));
    }
};

struct Common {
    std::string config;
    std::string seed;
    std::string out;
    bool quiet = false;
    Overrides over;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* app, Common& c, bool need_out = true) {
    app->add_option("--config", c.config, "Config file ([pipeline] keys and, for generation, the population spec)");
    c.seed_opt = app->add_option("--seed", c.seed, "Seed; overrides FLAMES_SEED and the config")
                     ->check(CLI::NonNegativeNumber);
    auto* o = app->add_option("--out", c.out, "Output directory");
    if (need_out) o->required();
    app->add_flag("-q,--quiet", c.quiet, "No progress on stderr");
    c.over.add(app, "--threads", "pipeline.threads", "Worker threads", CLI::PositiveNumber);
}

Context make_context(const Common& c, const std::string& spec) {
    config::Config cfg;
    if (!spec.empty() && !c.config.empty()) throw UsageError("--spec and --config are mutually exclusive");
    const auto& file = spec.empty() ? c.config : spec;
    if (!file.empty()) cfg = config::Config::load(file);
    c.over.apply(cfg);
    std::optional<std::uint64_t> seed;
    if (c.seed_opt && c.seed_opt->count() > 0) {
        seed = text::parse_uint(c.seed);
        if (!seed) throw UsageError("--seed: not an unsigned integer");
    } else if (const char* env = std::getenv("FLAMES_SEED"); env && *env) {
        seed = text::parse_uint(env);
        if (!seed) throw UsageError("FLAMES_SEED: not an unsigned integer");
    }
    return Context::from_config(std::move(cfg), seed, c.quiet);
}

std::vector<features::FeatureSet> parse_sets(const std::vector<std::string>& names) {
    std::vector<features::FeatureSet> out;
    for (const auto& n : names) {
        if (n == "all") return {};
        try {
            out.push_back(features::feature_set_from_string(n));
        } catch (const Error&) {
            throw UsageError("unknown feature set '" + n + "'");
        }
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"flames: fuse AP association logs with NetFlow records, then characterize and model device types"};
    app.set_version_flag("--version", std::string("flames ") + kVersion);
    app.require_subcommand(1);

    // testgen
    Common tg;
    std::string tg_spec;
    auto* testgen = app.add_subcommand("testgen", "Generate synthetic traces with planted per-type parameters");
    add_common(testgen, tg);
    testgen->add_option("--spec", tg_spec, "Population spec file (defaults when omitted)");

    // ingest / fuse share the raw trace inputs
    auto add_traces = [](CLI::App* a, TraceInputs& t, bool dns) {
        a->add_option("--aplog", t.aplog, "AP association log")->required();
        a->add_option("--netflow", t.netflow, "NetFlow export")->required();
        a->add_option("--buildings", t.buildings, "Building registry")->required();
        a->add_option("--ouis", t.ouis, "OUI label table")->required();
        if (dns) a->add_option("--dns", t.dns, "Destination IP to domain map")->required();
    };
    Common ig;
    TraceInputs ig_in;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse and validate raw inputs, re-emit them canonically");
    add_common(ingest_cmd, ig);
    add_traces(ingest_cmd, ig_in, true);

    Common fu;
    TraceInputs fu_in;
    auto* fuse_cmd = app.add_subcommand("fuse", "Derive leases and attribute flows to devices (CORE)");
    add_common(fuse_cmd, fu);
    add_traces(fuse_cmd, fu_in, false);
    fu.over.add(fuse_cmd, "--max-gap-hours", "pipeline.lease_max_gap_hours",
                "Drop lease intervals longer than this (0 = no cap)", CLI::NonNegativeNumber);

    Common cl;
    std::string cl_core, cl_ouis, cl_dns, cl_aplog;
    auto* classify_cmd = app.add_subcommand("classify", "Label devices flute/cello and relabel CORE");
    add_common(classify_cmd, cl);
    classify_cmd->add_option("--core", cl_core, "CORE file from fuse")->required();
    classify_cmd->add_option("--ouis", cl_ouis, "OUI label table")->required();
    classify_cmd->add_option("--dns", cl_dns, "Destination IP to domain map")->required();
    classify_cmd->add_option("--aplog", cl_aplog, "AP association log (device population)")->required();
    cl.over.add(classify_cmd, "--admob-min-devices", "pipeline.admob_min_devices",
                "Devices per OUI needed before the ad heuristic labels it", CLI::PositiveNumber);

    Common mo;
    std::string mo_leases, mo_buildings, mo_aplog, mo_ouis;
    auto* mobility_cmd = app.add_subcommand("mobility", "Daily mobility features and mobility reports");
    add_common(mobility_cmd, mo);
    mobility_cmd->add_option("--leases", mo_leases, "Leases file from fuse")->required();
    mobility_cmd->add_option("--buildings", mo_buildings, "Building registry")->required();
    mobility_cmd->add_option("--aplog", mo_aplog, "AP log, for hourly association curves");
    mobility_cmd->add_option("--ouis", mo_ouis, "Classified OUI table, for per-type outputs");
    mo.over.add(mobility_cmd, "--tz-offset", "pipeline.tz_offset_minutes", "Local time offset from UTC, minutes");
    bool mo_ap = false;
    mobility_cmd->add_flag("--ap-granularity", mo_ap, "Treat each AP as its own location");

    Common tr;
    std::string tr_core;
    auto* traffic_cmd = app.add_subcommand("traffic", "Daily traffic features and flow statistics");
    add_common(traffic_cmd, tr);
    traffic_cmd->add_option("--core", tr_core, "Classified CORE file")->required();
    tr.over.add(traffic_cmd, "--tz-offset", "pipeline.tz_offset_minutes", "Local time offset from UTC, minutes");

    Common fe;
    std::string fe_mob, fe_tra;
    auto* features_cmd = app.add_subcommand("features", "Join daily mobility and traffic rows; type ratios");
    add_common(features_cmd, fe);
    features_cmd->add_option("--mobility", fe_mob, "daily_mobility.csv")->required();
    features_cmd->add_option("--traffic", fe_tra, "daily_traffic.csv")->required();

    Common co;
    std::string co_feat;
    auto* correlate_cmd = app.add_subcommand("correlate", "Per-type, per-day-class correlation matrices and CFS");
    add_common(correlate_cmd, co);
    correlate_cmd->add_option("--features", co_feat, "features.csv")->required();

    Common fi;
    std::string fi_feat, fi_core;
    auto* fit_cmd = app.add_subcommand("fit", "Fit and rank distribution families");
    add_common(fit_cmd, fi);
    fit_cmd->add_option("--features", fi_feat, "features.csv")->required();
    fit_cmd->add_option("--core", fi_core, "Classified CORE file, for flow sizes and AP inter-arrival times");

    Common md;
    std::string md_kind, md_feat;
    std::vector<std::string> md_sets;
    auto* model_cmd = app.add_subcommand("model", "svm | kmeans | gmm on the feature table");
    add_common(model_cmd, md);
    model_cmd->add_option("kind", md_kind, "svm, kmeans or gmm")
        ->required()
        ->check(CLI::IsMember({"svm", "kmeans", "gmm"}));
    model_cmd->add_option("--features", md_feat, "features.csv")->required();
    model_cmd->add_option("--set", md_sets, "Feature sets: mobility, traffic, combined, combined-dayclass, all");
    md.over.add(model_cmd, "--folds", "pipeline.cv_folds", "Cross-validation folds", CLI::Range(2, 1000));
    md.over.add(model_cmd, "--svm-lambda", "pipeline.svm_lambda", "SVM regularization", CLI::PositiveNumber);
    md.over.add(model_cmd, "--svm-epochs", "pipeline.svm_epochs", "SVM epochs", CLI::PositiveNumber);
    md.over.add(model_cmd, "--kmeans-restarts", "pipeline.kmeans_restarts", "k-means++ restarts", CLI::PositiveNumber);
    md.over.add(model_cmd, "--k-max", "pipeline.gmm_k_max", "Largest GMM component count tried", CLI::PositiveNumber);
    md.over.add(model_cmd, "--gmm-restarts", "pipeline.gmm_restarts", "EM runs per k", CLI::PositiveNumber);

    Common sy;
    SynthInputs sy_in;
    std::string sy_feat, sy_tf, sy_tc;
    auto* synth_cmd = app.add_subcommand("synth", "Sample feature rows from per-type GMMs and validate them");
    add_common(synth_cmd, sy);
    synth_cmd->add_option("--flute-model", sy_in.flute_model, "Combined-feature GMM for flutes")->required();
    synth_cmd->add_option("--cello-model", sy_in.cello_model, "Combined-feature GMM for cellos")->required();
    synth_cmd->add_option("--features", sy_feat, "Real feature rows to validate against");
    synth_cmd->add_option("--traffic-flute-model", sy_tf, "Traffic-only GMM for flutes, for comparison");
    synth_cmd->add_option("--traffic-cello-model", sy_tc, "Traffic-only GMM for cellos, for comparison");
    sy.over.add(synth_cmd, "--rows", "pipeline.synth_rows", "Rows per type (0 = match the real table)",
                CLI::NonNegativeNumber);

    Common pl;
    std::string pl_spec;
    TraceInputs pl_in;
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage in order, one subdirectory per stage");
    add_common(pipeline_cmd, pl);
    pipeline_cmd->add_option("--spec", pl_spec, "Population spec; traces are generated first");
    pipeline_cmd->add_option("--aplog", pl_in.aplog, "AP association log");
    pipeline_cmd->add_option("--netflow", pl_in.netflow, "NetFlow export");
    pipeline_cmd->add_option("--buildings", pl_in.buildings, "Building registry");
    pipeline_cmd->add_option("--ouis", pl_in.ouis, "OUI label table");
    pipeline_cmd->add_option("--dns", pl_in.dns, "Destination IP to domain map");
    pl.over.add(pipeline_cmd, "--tz-offset", "pipeline.tz_offset_minutes", "Local time offset from UTC, minutes");
    pl.over.add(pipeline_cmd, "--max-gap-hours", "pipeline.lease_max_gap_hours", "Lease gap cap", CLI::NonNegativeNumber);
    pl.over.add(pipeline_cmd, "--k-max", "pipeline.gmm_k_max", "Largest GMM component count", CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*testgen) {
            auto ctx = make_context(tg, tg_spec);
            run_testgen(ctx, tg_spec.empty() ? std::nullopt : std::optional<fs::path>(tg_spec), tg.out);
        } else if (*ingest_cmd) {
            run_ingest(make_context(ig, ""), ig_in, ig.out);
        } else if (*fuse_cmd) {
            run_fuse(make_context(fu, ""), fu_in, fu.out);
        } else if (*classify_cmd) {
            run_classify(make_context(cl, ""), cl_core, cl_ouis, cl_dns, cl_aplog, cl.out);
        } else if (*mobility_cmd) {
            auto ctx = make_context(mo, "");
            if (mo_ap) ctx.opts.ap_granularity = true;
            auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
            run_mobility(ctx, mo_leases, mo_buildings, opt(mo_aplog), opt(mo_ouis), mo.out);
        } else if (*traffic_cmd) {
            run_traffic(make_context(tr, ""), tr_core, tr.out);
        } else if (*features_cmd) {
            run_features(make_context(fe, ""), fe_mob, fe_tra, fe.out);
        } else if (*correlate_cmd) {
            run_correlate(make_context(co, ""), co_feat, co.out);
        } else if (*fit_cmd) {
            run_fit(make_context(fi, ""), fi_feat, fi_core.empty() ? std::nullopt : std::optional<fs::path>(fi_core),
                    fi.out);
        } else if (*model_cmd) {
            auto ctx = make_context(md, "");
            const auto sets = parse_sets(md_sets);
            if (md_kind == "svm")
                run_model_svm(ctx, md_feat, sets, md.out);
            else if (md_kind == "kmeans")
                run_model_kmeans(ctx, md_feat, sets, md.out);
            else {
                if (!md_sets.empty()) throw UsageError("--set does not apply to gmm");
                run_model_gmm(ctx, md_feat, md.out);
            }
        } else if (*synth_cmd) {
            if (sy_tf.empty() != sy_tc.empty())
                throw UsageError("--traffic-flute-model and --traffic-cello-model go together");
            if (!sy_feat.empty()) sy_in.features = sy_feat;
            if (!sy_tf.empty()) {
                sy_in.traffic_flute_model = sy_tf;
                sy_in.traffic_cello_model = sy_tc;
            }
            run_synth(make_context(sy, ""), sy_in, sy.out);
        } else if (*pipeline_cmd) {
            const bool any_trace = !pl_in.aplog.empty() || !pl_in.netflow.empty() || !pl_in.buildings.empty() ||
                                   !pl_in.ouis.empty() || !pl_in.dns.empty();
            const bool all_trace = !pl_in.aplog.empty() && !pl_in.netflow.empty() && !pl_in.buildings.empty() &&
                                   !pl_in.ouis.empty() && !pl_in.dns.empty();
            if (!pl_spec.empty() && any_trace) throw UsageError("give either --spec or trace inputs, not both");
            if (pl_spec.empty() && !all_trace)
                throw UsageError("pipeline needs --spec, or all of --aplog --netflow --buildings --ouis --dns");
            auto ctx = make_context(pl, pl_spec);
            run_pipeline(ctx, pl_spec.empty() ? std::nullopt : std::optional<fs::path>(pl_spec),
                         pl_spec.empty() ? std::optional<TraceInputs>(pl_in) : std::nullopt, pl.out);
        }
    } catch (const UsageError& e) {
        std::cerr << "flames: " << e.what() << "\nRun with --help for usage.\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "flames: " << errc_name(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "flames: Io: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "flames: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
