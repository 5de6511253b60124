#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fourcast/collection.hpp"
#include "fourcast/error.hpp"
#include "fourcast/kv_config.hpp"
#include "fourcast/trace.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace fourcast;

namespace {

CollectionConfig energy_config(std::size_t n, double e) {
    CollectionConfig c;
    c.n = n;
    c.criterion = EnergyThreshold{e};
    return c;
}

std::vector<std::vector<double>> seasonal_series(std::size_t nodes, std::size_t batches, std::size_t n,
                                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out(nodes);
    for (auto& s : out)
        for (std::size_t b = 0; b < batches; ++b) {
            const auto batch = oracle::seasonal_batch(rng, n);
            s.insert(s.end(), batch.begin(), batch.end());
        }
    return out;
}

}  // namespace

TEST_CASE("node buffers until a batch is full") {
    NodeState node;
    const auto cfg = energy_config(4, 0.9);
    for (int i = 0; i < 3; ++i) CHECK_FALSE(node_observe(node, 0.5, cfg).has_value());
    const auto msg = node_observe(node, 0.5, cfg);
    REQUIRE(msg.has_value());
    CHECK(msg->k() == 1);
    CHECK(msg->coefficients[0] == Complex(2.0, 0.0));
    CHECK(msg->batch_index == 0);
    CHECK(node.buffer.empty());
    CHECK(node.batch_index == 1);

    CHECK_THROWS_AS(node_observe(node, NAN, cfg), InvalidInput);
    CHECK_THROWS_AS(node_observe(node, 1.5, cfg), InvalidInput);
}

TEST_CASE("node message matches standalone truncation") {
    std::mt19937_64 rng(8);
    const auto batch = oracle::seasonal_batch(rng, 72);
    const auto cfg = energy_config(72, 0.9);
    NodeState node;
    std::optional<UpdateMessage> msg;
    for (double v : batch) msg = node_observe(node, v, cfg);
    REQUIRE(msg.has_value());
    const auto standalone = truncate_by_energy(dft(batch), 0.9);
    CHECK(msg->k() == standalone.k());
    CHECK(msg->spectrum() == standalone);
}

TEST_CASE("controller ingest") {
    SUBCASE("constant batch") {
        ControllerState ctrl;
        ctrl.ingest(UpdateMessage{3, 0, 8, {{4.0, 0.0}}});
        const auto& h = ctrl.node(3);
        REQUIRE(h.batches.size() == 1);
        for (double v : h.batches[0]) CHECK(v == 0.5);
        CHECK(ctrl.ledger().floats_sent == 2);
        CHECK(ctrl.ledger().floats_raw == 8);
        CHECK(ctrl.ledger().header_bytes == 12);
    }
    SUBCASE("untruncated batch reproduces the raw values") {
        std::mt19937_64 rng(1);
        const auto u = oracle::uniform_batch(rng, 16);
        const auto spec = dft(u);
        ControllerState ctrl;
        ctrl.ingest(UpdateMessage{0, 0, 16, spec.coefficients});
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(ctrl.node(0).batches[0][i] - u[i]) < 1e-9);
    }
    SUBCASE("protocol violations") {
        ControllerState ctrl;
        CHECK_THROWS_AS(ctrl.ingest(UpdateMessage{0, 1, 4, {{2.0, 0.0}}}), ProtocolError);
        ctrl.ingest(UpdateMessage{0, 0, 4, {{2.0, 0.0}}});
        CHECK_THROWS_AS(ctrl.ingest(UpdateMessage{0, 0, 4, {{2.0, 0.0}}}), ProtocolError);
        CHECK_THROWS_AS(ctrl.ingest(UpdateMessage{0, 2, 4, {{2.0, 0.0}}}), ProtocolError);
        CHECK_THROWS_AS(ctrl.ingest(UpdateMessage{0, 1, 8, {{2.0, 0.0}}}), ProtocolError);
        ctrl.ingest(UpdateMessage{0, 1, 4, {{2.0, 0.0}}});
        CHECK(ctrl.node(0).batches.size() == 2);
        CHECK_THROWS_AS(ctrl.node(5), NotFound);
    }
}

TEST_CASE("controller estimate") {
    std::mt19937_64 rng(12);
    const std::size_t n = 8;
    ControllerState ctrl;
    std::vector<std::vector<double>> recon;
    for (std::uint32_t b = 0; b < 4; ++b) {
        const auto u = oracle::seasonal_batch(rng, n);
        const auto t = truncate_by_energy(dft(u), 0.9);
        ctrl.ingest(UpdateMessage{0, b, static_cast<std::uint16_t>(n), {t.coefficients().begin(), t.coefficients().end()}});
        recon.push_back(ctrl.node(0).batches.back());
    }
    CHECK(ctrl.estimate(0, 3 * n + 5) == recon[3][5]);
    CHECK(ctrl.estimate(0, 2) == recon[0][2]);
    CHECK(ctrl.estimate(0, 4 * n) == recon[3][n - 1]);
    CHECK(ctrl.estimate(0, 4 * n + 100) == recon[3][n - 1]);
    CHECK_THROWS_AS(ctrl.estimate(9, 0), NotFound);

    ModelConfig mc;
    mc.window = WindowConfig{2, n, n};
    mc.hidden = 4;
    auto model = std::make_shared<const GruForecaster>(mc, 5);
    ctrl.attach_model(model);
    WindowSample sample;
    sample.inputs = {ctrl.node(0).spectra[2], ctrl.node(0).spectra[3]};
    const auto forecast = model->forecast(sample);
    CHECK(ctrl.estimate(0, 4 * n) == std::clamp(forecast[0], 0.0, 1.0));
    CHECK(ctrl.estimate(0, 4 * n + 3) == std::clamp(forecast[3], 0.0, 1.0));
    CHECK(ctrl.estimate(0, 3 * n + 1) == recon[3][1]);

    mc.kind = ModelKind::time;
    CHECK_THROWS_AS(ctrl.attach_model(std::make_shared<const GruForecaster>(mc, 5)), InvalidInput);
}

TEST_CASE("simulation accounting") {
    SUBCASE("one node, two constant batches") {
        const std::vector<std::vector<double>> series{std::vector<double>(144, 0.4)};
        const auto r = run_simulation(series, energy_config(72, 0.9));
        CHECK(r.report.floats_sent == 4);
        CHECK(r.report.floats_raw == 144);
        CHECK(r.report.savings == doctest::Approx(1.0 - (2.0 * 2.0 * 1.0) / (2.0 * 72.0)).epsilon(1e-15));
        CHECK(r.report.messages == 2);
        CHECK(r.message_stream.size() == 2 * 28);
    }
    SUBCASE("white noise at e = 1 costs more than raw") {
        std::mt19937_64 rng(3);
        const std::vector<std::vector<double>> series{oracle::uniform_batch(rng, 72)};
        const auto r = run_simulation(series, energy_config(72, 1.0));
        CHECK(r.report.floats_sent == 74);
        CHECK(r.report.savings == doctest::Approx(1.0 - 74.0 / 72.0));
        CHECK(r.report.savings < 0.0);
    }
    SUBCASE("ledger recount over 20 nodes and 10 batches") {
        const std::size_t n = 72;
        const auto series = seasonal_series(20, 10, n, 77);
        const auto r = run_simulation(series, energy_config(n, 0.9));
        std::uint64_t sent = 0;
        for (const auto& s : series)
            for (std::size_t b = 0; b < 10; ++b) {
                const std::vector<double> batch(s.begin() + static_cast<std::ptrdiff_t>(b * n),
                                                s.begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
                std::size_t k = 1;
                const auto full = oracle::naive_dft(batch);
                while (oracle::kept_energy(full, k) / oracle::energy(batch) < 0.9) ++k;
                sent += 2 * k;
            }
        CHECK(r.report.floats_raw == 20 * 10 * n);
        CHECK(r.report.floats_sent == sent);
        CHECK(r.report.messages == 200);
        CHECK(r.report.header_bytes == 200 * 12);
        for (const auto& [id, h] : r.controller.nodes()) {
            CHECK(h.batches.size() == 10);
            CHECK(h.spectra.size() == 10);
        }
        CHECK(decode_stream(r.message_stream).size() == 200);
    }
    SUBCASE("errors") {
        const std::vector<std::vector<double>> ragged{std::vector<double>(72, 0.1), std::vector<double>(144, 0.1)};
        CHECK_THROWS_AS(run_simulation(ragged, energy_config(72, 0.9)), InvalidInput);
        const std::vector<std::vector<double>> partial{std::vector<double>(100, 0.1)};
        CHECK_THROWS_AS(run_simulation(partial, energy_config(72, 0.9)), InvalidInput);
    }
}

TEST_CASE("simulation properties") {
    const auto series = seasonal_series(5, 6, 72, 19);

    const auto a = run_simulation(series, energy_config(72, 0.8));
    const auto b = run_simulation(series, energy_config(72, 0.8));
    CHECK(a.message_stream == b.message_stream);
    CHECK(a.report.to_json() == b.report.to_json());
    CHECK(a.report.csv_row() == b.report.csv_row());

    double last = -INFINITY;
    for (double e : {0.99, 0.9, 0.7, 0.5, 0.3}) {
        const auto r = run_simulation(series, energy_config(72, e));
        CHECK(r.report.savings >= last);
        last = r.report.savings;
    }

    CollectionConfig rc;
    rc.n = 72;
    for (double eps : {0.005, 0.02, 0.05}) {
        rc.criterion = RmseBound{eps};
        const auto r = run_simulation(series, rc);
        for (const auto& [node, errs] : r.batch_rmse)
            for (double e : errs) CHECK(e <= eps);
        CHECK(r.report.max_truncation_rmse <= eps);
    }
}

TEST_CASE("report serialisation") {
    const std::vector<std::vector<double>> series{std::vector<double>(144, 0.4), std::vector<double>(144, 0.2)};
    const auto r = run_simulation(series, energy_config(72, 0.9));
    const auto j = nlohmann::json::parse(r.report.to_json());
    CHECK(j["floats_sent"] == 8);
    CHECK(j["floats_raw"] == 288);
    CHECK(j["mean_truncation_rmse"].size() == 2);
    CHECK(r.report.csv_header().find("savings") != std::string::npos);
    const auto row = r.report.csv_row();
    const auto header = r.report.csv_header();
    CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
}

TEST_CASE("collection config from key-value text") {
    std::istringstream in("# sim\nn = 8\ncriterion = rmse\neps = 0.02\nseed = 4\n");
    const auto cfg = CollectionConfig::from(KeyValueConfig::parse(in));
    CHECK(cfg.n == 8);
    CHECK(std::get<RmseBound>(cfg.criterion).eps == 0.02);
    CHECK(cfg.seed == 4);

    std::istringstream bad("n = 7\n");
    CHECK_THROWS_AS(CollectionConfig::from(KeyValueConfig::parse(bad)), InvalidInput);
    std::istringstream worse("n 8\n");
    CHECK_THROWS_AS(KeyValueConfig::parse(worse, "sim.cfg"), InvalidInput);
}
