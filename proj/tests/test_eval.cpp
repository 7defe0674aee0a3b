#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mati/eval.hpp"

using namespace mati;
using namespace testutil;

TEST_SUITE("eval") {

TEST_CASE("metric arithmetic") {
    CHECK(mae({1.0, 2.0}, {1.0, 4.0}) == doctest::Approx(1.0));
    CHECK(rmse({1.0, 2.0}, {1.0, 4.0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(mape({110.0}, {100.0}) == doctest::Approx(10.0));

    CHECK(mae({3.0, 4.0}, {3.0, 4.0}) == 0.0);
    CHECK(rmse({3.0, 4.0}, {3.0, 4.0}) == 0.0);
    CHECK(mape({3.0, 4.0}, {3.0, 4.0}) == 0.0);

    CHECK_THROWS_AS(mae({}, {}), Error);
    CHECK_THROWS_AS(mae({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("mape skips near-zero targets and counts them") {
    const auto m = compute_metrics({1.0, 5.0, 2.0}, {0.0, 4.0, 1e-12});
    CHECK(m.mape_skipped == 2);
    CHECK(m.mape == doctest::Approx(25.0));
    CHECK(m.n == 3);
}

TEST_CASE("metrics are permutation invariant") {
    const std::vector<double> p{1.0, 5.0, -2.0, 7.0};
    const std::vector<double> t{2.0, 4.5, -1.0, 9.0};
    const std::vector<double> p2{7.0, -2.0, 5.0, 1.0};
    const std::vector<double> t2{9.0, -1.0, 4.5, 2.0};
    CHECK(mae(p, t) == doctest::Approx(mae(p2, t2)).epsilon(1e-15));
    CHECK(rmse(p, t) == doctest::Approx(rmse(p2, t2)).epsilon(1e-15));
    CHECK(mape(p, t) == doctest::Approx(mape(p2, t2)).epsilon(1e-12));
}

TEST_CASE("evaluate on an oracle and on a constant predictor") {
    // Right-skewed clusters: a heavy head at 0 and a light tail at 10.
    const auto ds = cluster_dataset({0.0, 10.0}, {600, 60}, 0.8, 5);
    const auto scheme = BinningScheme::fit(ds.targets, 1.0);
    const auto bundle = make_splits(ds, scheme, 0.2, 6);
    const double train_mean = mean_of(bundle.train.targets);

    SUBCASE("perfect oracle scores zero") {
        // The feature is the target plus tiny noise, so a feature-based
        // predictor is only near-perfect; echo each set's stored targets.
        auto run_with_truth = [](const TabularDataset& test) {
            return [&test](const FeatureMatrix& rows) {
                std::vector<double> out(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) out[i] = test.targets[i];
                return out;
            };
        };
        EvalReport rep = evaluate(run_with_truth(bundle.test_balanced),
                                  run_with_truth(bundle.test_normal),
                                  run_with_truth(bundle.test_inverse), bundle, scheme);
        CHECK(rep.balanced.overall.mae == 0.0);
        CHECK(rep.normal.overall.rmse == 0.0);
        CHECK(rep.inverse.overall.mae == 0.0);
    }

    SUBCASE("train-mean predictor suffers on the inverse set") {
        auto constant = [&](const FeatureMatrix& rows) {
            return std::vector<double>(rows.size(), train_mean);
        };
        const auto rep = evaluate(constant, bundle, scheme);
        CHECK(rep.inverse.overall.mae > rep.normal.overall.mae);
    }

    SUBCASE("shot-region counts partition the overall n") {
        auto constant = [&](const FeatureMatrix& rows) {
            return std::vector<double>(rows.size(), train_mean);
        };
        const auto rep = evaluate(constant, bundle, scheme);
        for (const auto* d : {&rep.balanced, &rep.normal, &rep.inverse}) {
            std::size_t shots = 0;
            for (const auto* s : {&d->many_shot, &d->medium_shot, &d->few_shot})
                if (s->has_value()) shots += (*s)->n;
            CHECK(shots == d->overall.n);
            std::size_t bins = 0;
            for (const auto& [b, m] : d->per_bin) bins += m.n;
            CHECK(bins == d->overall.n);
        }
    }
}

TEST_CASE("gap_center_identity") {
    SUBCASE("hand case {1,2,3}") {
        const auto [pairwise, scaled] = gap_center_identity({1.0, 2.0, 3.0});
        CHECK(pairwise == doctest::Approx(12.0));
        CHECK(scaled == doctest::Approx(12.0));
    }
    SUBCASE("equal values give zero") {
        const auto [pairwise, scaled] = gap_center_identity({4.0, 4.0, 4.0, 4.0});
        CHECK(pairwise == 0.0);
        CHECK(scaled == 0.0);
    }
    SUBCASE("random vectors match a brute-force enumeration") {
        Rng rng = make_rng(77, "identity");
        std::uniform_real_distribution<double> unit(-10.0, 10.0);
        std::uniform_int_distribution<std::size_t> len(2, 50);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> v(len(rng));
            for (double& x : v) x = unit(rng);

            const auto [pairwise, scaled] = gap_center_identity(v);

            double brute = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j)
                for (std::size_t k = 0; k < v.size(); ++k)
                    if (j != k) brute += (v[j] - v[k]) * (v[j] - v[k]);
            CHECK(pairwise == doctest::Approx(brute).epsilon(1e-12));

            const double rel = std::abs(pairwise - scaled) /
                               std::max(std::abs(pairwise), std::abs(scaled));
            if (pairwise != 0.0) CHECK(rel < 1e-9);
        }
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS(gap_center_identity({1.0}), Error);
    }
}

TEST_CASE("region_test_sets") {
    const auto ds = cluster_dataset({0.0, 20.0, 40.0}, {150, 150, 150}, 1.0, 8);

    SUBCASE("single wide component takes per_region rows") {
        GmmModel one;
        one.components = {{1.0, 20.0, 100.0}};
        const auto sets = region_test_sets(ds, one, 50, 1);
        REQUIRE(sets.sets.size() == 1);
        CHECK(sets.sets[0].n_rows() == 50);
        CHECK(sets.empty_flags[0] == 0);
    }

    SUBCASE("well-separated regions are disjoint") {
        GmmModel m;
        m.components = {{0.34, 0.0, 1.0}, {0.33, 20.0, 1.0}, {0.33, 40.0, 1.0}};
        const auto sets = region_test_sets(ds, m, 200, 2);
        std::set<std::uint64_t> seen;
        for (std::size_t n = 0; n < 3; ++n) {
            for (auto id : sets.sets[n].row_ids) CHECK(seen.insert(id).second);
            for (double y : sets.sets[n].targets) {
                CHECK(y >= m.components[n].mean - m.components[n].stddev);
                CHECK(y <= m.components[n].mean + m.components[n].stddev);
            }
        }
    }

    SUBCASE("empty region is flagged, not fatal") {
        GmmModel m;
        m.components = {{0.5, -1000.0, 0.5}, {0.5, 20.0, 1.0}};
        const auto sets = region_test_sets(ds, m, 10, 3);
        CHECK(sets.empty_flags[0] == 1);
        CHECK(sets.sets[0].n_rows() == 0);
        CHECK(sets.empty_flags[1] == 0);
    }
}

}  // TEST_SUITE
