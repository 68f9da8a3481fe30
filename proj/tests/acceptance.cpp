// Runs the seven acceptance checks; prints one PASS/FAIL line per check and
// exits nonzero if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <thread>

#include <fmt/format.h>

#include "ledgerlab/attacks.hpp"
#include "ledgerlab/report.hpp"

using namespace ledgerlab;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<Scenario>& suite()
{
    static const auto loaded = [] {
        auto s = load_suite(default_scenario_dir());
        if (!s.errors.empty()) throw std::runtime_error("suite failed to load: " + s.errors.front().second);
        return s.scenarios;
    }();
    return loaded;
}

ScenarioRun run(const Scenario& s, bool permissionless, std::uint64_t seed = kDefaultSeed)
{
    return run_scenario(s, scenario_network(s, seed), scenario_engine(s, permissionless), s.network.rounds);
}

Check verdict_matrix_check()
{
    Check c;
    const auto t0 = Clock::now();
    const std::map<std::string, std::pair<bool, bool>> expected{
        {"virtual-currency", {true, true}},    {"diamond-notary", {false, false}},    {"inter-bank", {false, true}},
        {"insurance-specific", {false, false}}, {"insurance-generic", {true, false}}, {"energy-trading", {false, false}},
        {"supply-chain", {true, false}},        {"location-tracking", {true, false}}};
    const auto loaded = load_suite(default_scenario_dir());
    c.require(loaded.errors.empty(), "suite has load errors");
    const auto rows = verdict_matrix(loaded.scenarios);
    c.require(rows.size() == expected.size(), fmt::format("{} rows", rows.size()));
    for (const auto& r : rows) {
        auto it = expected.find(r.scenario);
        if (it == expected.end()) {
            c.require(false, "unexpected row " + r.scenario);
            continue;
        }
        c.require(it->second == std::pair{r.object_creation, r.internal_predicate}, r.scenario + " verdicts differ");
    }
    const double t = seconds_since(t0);
    c.require(t < 1.0, fmt::format("took {:.2f}s", t));
    if (c.ok) c.detail = fmt::format("{} rows, {:.3f}s", rows.size(), t);
    return c;
}

Check consensus_safety_check()
{
    Check c;
    const auto t0 = Clock::now();
    constexpr std::uint64_t kSeeds = 30;
    std::vector<std::size_t> deep(kSeeds), shallow(kSeeds);
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (std::uint64_t i = next++; i < 2 * kSeeds; i = next++) {
            const std::uint64_t seed = i % kSeeds + 1;
            NetworkConfig cfg;
            cfg.num_maintainers = 20;
            cfg.adversary_power = 0.10;
            cfg.seed = seed;
            cfg.confirmation_depth = i < kSeeds ? 6 : 0;
            const auto r = run_consensus(cfg, ConsensusEngineKind::chain(), {}, 10'000);
            (i < kSeeds ? deep : shallow)[seed - 1] = r.report.agreement_violations;
        }
    };
    const unsigned n = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::size_t deep_total = 0, deep_max = 0, deep_seeds = 0, shallow_seeds = 0;
    for (std::size_t i = 0; i < kSeeds; ++i) {
        deep_total += deep[i];
        deep_max = std::max(deep_max, deep[i]);
        if (deep[i] > 0) ++deep_seeds;
        if (shallow[i] > 0) ++shallow_seeds;
    }
    const double t = seconds_since(t0);
    c.require(deep_total == 0, fmt::format("c=6: {} violations", deep_total));
    c.require(shallow_seeds >= 1, "c=0: no seed violated agreement");
    c.require(t < 30.0, fmt::format("took {:.1f}s", t));
    c.detail = fmt::format("c=6 violations={} in {} seeds (max {} per seed), c=0 violating seeds={}/{}, {:.1f}s{}",
                           deep_total, deep_seeds, deep_max, shallow_seeds, kSeeds, t,
                           c.detail.empty() ? "" : " (" + c.detail + ")");
    return c;
}

Check validity_termination_check()
{
    Check c;
    const auto t0 = Clock::now();
    std::size_t validity = 0, stalled = 0, windows = 0;
    for (const auto& s : suite())
        for (bool chain : {false, true}) {
            const auto r = run(s, chain);
            validity += r.monitor.validity_violations;
            stalled += r.monitor.stalled_windows;
            windows += r.monitor.windows_checked;
            c.require(r.monitor.validity_violations == 0, s.name() + " validity");
            c.require(r.monitor.stalled_windows == 0, s.name() + " stalled");
            c.require(r.monitor.progress_window == 50, s.name() + " window");
        }
    const double t = seconds_since(t0);
    c.require(t < 10.0, fmt::format("took {:.1f}s", t));
    c.detail = fmt::format("validity violations={}, stalled windows={}/{}, {:.2f}s{}", validity, stalled, windows, t,
                           c.detail.empty() ? "" : " (" + c.detail + ")");
    return c;
}

Check attack_linkage_check()
{
    Check c;
    const auto t0 = Clock::now();
    const auto diamond = resolve_scenario("diamond-notary");
    const auto seq = premature_creation_attack(diamond, IdSchemeChoice::sequential(), 1, 1000);
    c.require(seq.trials == 1000 && seq.success_rate() == 1.0, fmt::format("sequential rate {}", seq.success_rate()));
    const auto wide = premature_creation_attack(diamond, IdSchemeChoice::random_bits(128), 1, 100'000);
    c.require(wide.successes == 0, fmt::format("RandomBits(128) successes {}", wide.successes));
    std::string rates;
    double previous = 1.0;
    for (std::uint16_t w : {8, 16, 32, 64, 128}) {
        const double rate = premature_creation_attack(diamond, IdSchemeChoice::random_bits(w), 1, 1000).success_rate();
        c.require(rate <= previous, fmt::format("rate rises at width {}", w));
        rates += fmt::format("{}{}:{:.3f}", rates.empty() ? "" : " ", w, rate);
        previous = rate;
    }
    const double t = seconds_since(t0);
    c.require(t < 20.0, fmt::format("took {:.1f}s", t));
    c.detail = fmt::format("sequential={:.3f}, r128 successes={}/{}, widths [{}], {:.2f}s{}", seq.success_rate(),
                           wide.successes, wide.trials, rates, t, c.detail.empty() ? "" : " (" + c.detail + ")");
    return c;
}

Check audit_biconditional_check()
{
    Check c;
    const auto t0 = Clock::now();
    std::size_t runs = 0;
    for (const auto& s : suite())
        for (bool chain : {false, true}) {
            const auto r = run(s, chain);
            ++runs;
            const bool both = r.audit.object_creation.met && r.audit.internal_predicate.met;
            c.require(r.audit.trusted_entities.empty() == both, s.name() + " trusted set");
            for (const auto& d : effective_predicates(s.spec)) {
                const bool queried = r.audit.queried_predicates.contains(d.name);
                if (d.is_internal()) c.require(!queried, s.name() + ": internal " + d.name + " queried");
                else c.require(queried, s.name() + ": external " + d.name + " never queried");
            }
        }
    const double t = seconds_since(t0);
    c.require(t < 10.0, fmt::format("took {:.1f}s", t));
    c.detail = fmt::format("{} runs, {:.2f}s{}", runs, t, c.detail.empty() ? "" : " (" + c.detail + ")");
    return c;
}

Check determinism_check()
{
    Check c;
    std::size_t pairs = 0;
    for (const auto& s : suite())
        for (bool chain : {false, true}) {
            ++pairs;
            c.require(run(s, chain, 99).log.text() == run(s, chain, 99).log.text(), s.name() + " log differs");
        }
    c.detail = fmt::format("{} scenario/engine pairs{}", pairs, c.detail.empty() ? "" : " (" + c.detail + ")");
    return c;
}

Check oracle_property_check()
{
    Check c;
    WorldModel world;
    const auto object = ObjectId::sequential(kSystemPartyId, 0);
    world.set(object, "reading", std::int64_t{40});
    Oracle noisy{"meter", {"reading"}, Corruption::noisy(0.25), 2024};
    const std::uint64_t queries = 10'000;
    std::uint64_t flips = 0;
    for (std::uint64_t q = 0; q < queries; ++q)
        if (*query_oracle(noisy, world, object, "reading", q) != Scalar{std::int64_t{40}}) ++flips;
    const double rate = static_cast<double>(flips) / static_cast<double>(queries);
    c.require(std::abs(rate - 0.25) <= 0.02, fmt::format("flip rate {:.4f}", rate));

    const auto energy = resolve_scenario("energy-trading");
    const auto report = lying_oracle_attack(energy, {{"meter", {"meter3", "produced_kwh", std::int64_t{80}}}}, 400);
    const bool diverges = std::find(report.divergent_goals.begin(), report.divergent_goals.end(),
                                    "payment-matches-production") != report.divergent_goals.end();
    c.require(diverges, "doubled meter reading did not diverge");
    c.detail = fmt::format("flip rate={:.4f}, divergent goals={}{}", rate, report.divergent_goals.size(),
                           c.detail.empty() ? "" : " (" + c.detail + ")");
    return c;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Check()>>> checks{
        {"verdict matrix", verdict_matrix_check},
        {"consensus safety", consensus_safety_check},
        {"validity and termination", validity_termination_check},
        {"attack linkage", attack_linkage_check},
        {"trust audit biconditional", audit_biconditional_check},
        {"determinism", determinism_check},
        {"oracle property", oracle_property_check},
    };
    int failed = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        Check result;
        try {
            result = checks[i].second();
        } catch (const std::exception& e) {
            result = {false, std::string("threw: ") + e.what()};
        }
        std::cout << fmt::format("[{}] {} {}: {}\n", result.ok ? "PASS" : "FAIL", i + 1, checks[i].first, result.detail)
                  << std::flush;
        if (!result.ok) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
