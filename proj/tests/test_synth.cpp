#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/pipeline.hpp"
#include "flames/synth.hpp"
#include "flames/traffic.hpp"

using namespace flames;
namespace fs = std::filesystem;

namespace {

synth::PopulationSpec small_spec() {
    auto s = synth::PopulationSpec::defaults();
    s.flute.devices = 12;
    s.cello.devices = 8;
    s.days = 3;
    return s;
}

Errc spec_error(synth::PopulationSpec s) {
    try {
        s.validate();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("minimal world") {
    auto s = synth::PopulationSpec::defaults();
    s.flute.devices = 1;
    s.cello.devices = 0;
    s.buildings = 1;
    s.days = 1;
    s.flute.weekday.active_prob = 1;
    s.flute.weekend.active_prob = 1;
    const auto t = synth::generate_traces(s);
    REQUIRE(t.devices.size() == 1);
    REQUIRE(t.ap_events.size() >= 2);
    std::set<MacAddress> macs;
    for (const auto& e : t.ap_events) macs.insert(e.user_mac);
    CHECK(macs.size() == 1);
    const auto d = fuse::derive_all_leases(t.ap_events);
    CHECK(d.leases.size() + d.dropped_zero_length == t.ap_events.size() - 1);
}

TEST_CASE("generation is deterministic per seed") {
    const auto s = small_spec();
    const auto a = synth::generate_traces(s);
    const auto b = synth::generate_traces(s);
    CHECK(a.ap_events == b.ap_events);
    CHECK(a.flows == b.flows);
    std::stringstream ma, mb;
    synth::write_manifest(ma, s, a);
    synth::write_manifest(mb, s, b);
    CHECK(ma.str() == mb.str());

    auto other = s;
    other.seed += 1;
    CHECK(synth::generate_traces(other).flows != a.flows);
}

TEST_CASE("manifest lists every device in the logs") {
    const auto s = small_spec();
    const auto t = synth::generate_traces(s);
    std::set<MacAddress> listed;
    for (const auto& d : t.devices) {
        listed.insert(d.mac);
        CHECK(d.type != DeviceType::Unknown);
        CHECK(d.mac.oui() == d.oui);
    }
    for (const auto& e : t.ap_events) CHECK(listed.count(e.user_mac) == 1);
    std::stringstream m;
    synth::write_manifest(m, s, t);
    for (const auto& d : t.devices) CHECK(m.str().find(d.mac.str()) != std::string::npos);
    CHECK(m.str().rfind(synth::kTruthFormatTag, 0) == 0);
}

TEST_CASE("flows respect lease containment") {
    const auto s = small_spec();
    const auto t = synth::generate_traces(s);
    pipeline::Options o;
    o.lease_max_gap = 0;
    const auto f = pipeline::run_fuse(t.ap_events, t.flows, t.registry, t.labels, o);
    CHECK(f.stats.unmatched == t.boundary_crossing_flows);
    CHECK(f.stats.total == t.flows.size());
}

TEST_CASE("spec validation") {
    auto s = small_spec();
    s.days = 0;
    CHECK(spec_error(s) == Errc::SpecInvalid);
    s = small_spec();
    s.flute.admob_prob = 1.5;
    CHECK(spec_error(s) == Errc::SpecInvalid);
    s = small_spec();
    s.flute.devices = 0;
    s.cello.devices = 0;
    CHECK(spec_error(s) == Errc::SpecInvalid);
    s = small_spec();
    s.start_date = "April";
    CHECK(spec_error(s) == Errc::SpecInvalid);

    std::stringstream in("[flute]\nno_such_key = 1\n");
    CHECK_THROWS_AS(synth::PopulationSpec::from_config(config::Config::parse(in)), Error);
    std::stringstream ok("[flute]\ndevices = 3\n[cello.weekend]\nactive_prob = 0.2\n");
    const auto parsed = synth::PopulationSpec::from_config(config::Config::parse(ok));
    CHECK(parsed.flute.devices == 3);
    CHECK(parsed.cello.weekend.active_prob == 0.2);
}

TEST_CASE("written traces read back") {
    const auto s = small_spec();
    const auto t = synth::generate_traces(s);
    const auto dir = fs::temp_directory_path() / "flames_synth_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto files = synth::write_traces(dir, s, t);
    ingest::ParseStats st;
    CHECK(ingest::read_netflow(files.netflow, &st) == t.flows);
    CHECK(st.skipped == 0);
    CHECK(ingest::read_ap_events(files.aplog) == t.ap_events);
    CHECK(ingest::load_oui_labels(files.ouis).entries() == t.labels.entries());
    fs::remove_all(dir);
}

TEST_CASE("feature synthesis") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    const auto names = features::all_names();
    std::map<DeviceType, learn::GmmModel> models;
    for (auto t : {DeviceType::Flute, DeviceType::Cello}) {
        Eigen::MatrixXd x(10000, static_cast<Eigen::Index>(names.size()));
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = 100 + 10 * n01(rng) + (t == DeviceType::Cello ? 30 : 0);
        const auto prep = learn::Preprocessor::fit(x);
        models[t] = learn::fit_gmm(x, 1, prep, names).model;
    }
    const auto rows = synth::synthesize_features(models, 5000, 5);
    CHECK(rows.size() == 10000);
    CHECK(features::matrix(rows, names) == features::matrix(synth::synthesize_features(models, 5000, 5), names));
    for (const auto& r : rows) {
        CHECK(r.device == MacAddress{});
        CHECK(r.day == DayKey{});
    }
    const auto v = pipeline::validate_models(models, rows, names, 9);
    for (const auto& t : v)
        for (const auto& f : t.report.features) CHECK(f.ks < 0.05);

    auto broken = models;
    broken[DeviceType::Flute].feature_names.pop_back();
    try {
        synth::synthesize_features(broken, 10, 1);
        FAIL("expected ModelFeatureMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ModelFeatureMismatch);
    }
}

TEST_CASE("default population recovers the planted flute median flow size") {
    const auto spec = synth::PopulationSpec::defaults();
    const auto t = synth::generate_traces(spec);
    std::set<MacAddress> ap_devices;
    for (const auto& e : t.ap_events) ap_devices.insert(e.user_mac);
    auto f = pipeline::run_fuse(t.ap_events, t.flows, t.registry, t.labels);
    pipeline::run_classify(f.core, t.labels, t.dns, ap_devices);
    std::vector<double> bytes;
    for (const auto& c : f.core)
        if (c.device_type == DeviceType::Flute) bytes.push_back(static_cast<double>(c.flow.flow_bytes));
    REQUIRE(bytes.size() > 1000);
    CHECK(traffic::quantile(bytes, 0.5) == doctest::Approx(678).epsilon(0.05));
}

}
