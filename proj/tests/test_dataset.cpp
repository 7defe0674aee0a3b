#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mati/dataset.hpp"

using namespace mati;
using namespace testutil;

TEST_SUITE("dataset") {

TEST_CASE("load_csv parses a small numeric file") {
    const auto dir = fresh_dir("load_small");
    write_file(dir / "t.csv", "a,y\n1,2\n3,4\n5,6\n");
    FeatureSchema s;
    s.columns = {{"a", ColumnKind::Numeric}};
    s.target_column = "y";
    const auto ds = load_csv(dir / "t.csv", s);
    CHECK(ds.n_rows() == 3);
    CHECK(ds.n_features() == 1);
    CHECK(ds.rows[1][0] == 3.0);
    CHECK(ds.targets[2] == 6.0);
}

TEST_CASE("load_csv reads the Abalone file") {
    FeatureSchema s;
    s.columns = {{"sex", ColumnKind::Categorical},     {"length", ColumnKind::Numeric},
                 {"diameter", ColumnKind::Numeric},    {"height", ColumnKind::Numeric},
                 {"whole_weight", ColumnKind::Numeric}, {"shucked_weight", ColumnKind::Numeric},
                 {"viscera_weight", ColumnKind::Numeric}, {"shell_weight", ColumnKind::Numeric}};
    s.target_column = "rings";
    const auto ds = load_csv(std::string(MATI_SOURCE_DIR) + "/data/abalone.csv", s);
    CHECK(ds.n_rows() == 4177);
    CHECK(ds.code_tables[0].size() == 3);

    // Ring histogram is unimodal with its peak at 9.
    const auto scheme = BinningScheme::fit(ds.targets, 1.0);
    const auto counts = bin_counts(ds, scheme);
    const auto peak = std::max_element(counts.begin(), counts.end()) - counts.begin();
    const double peak_ring = scheme.origin + static_cast<double>(peak);
    CHECK(peak_ring >= 9.0);
    CHECK(peak_ring <= 10.0);
}

TEST_CASE("load_csv rejects bad rows with line numbers") {
    const auto dir = fresh_dir("load_bad");
    FeatureSchema s;
    s.columns = {{"a", ColumnKind::Numeric}};
    s.target_column = "y";

    write_file(dir / "bad.csv", "a,y\n1,2\nfoo,4\n");
    CHECK_THROWS_WITH_AS(load_csv(dir / "bad.csv", s), doctest::Contains("line 3"), Error);

    write_file(dir / "missing.csv", "a,y\n1,\n");
    CHECK_THROWS_AS(load_csv(dir / "missing.csv", s), Error);

    write_file(dir / "nohdr.csv", "a,z\n1,2\n");
    CHECK_THROWS_AS(load_csv(dir / "nohdr.csv", s), Error);
}

TEST_CASE("save_csv round-trips values, codes and synthetic flags") {
    const auto dir = fresh_dir("csv_roundtrip");
    TabularDataset ds;
    ds.schema.columns = {{"a", ColumnKind::Numeric}, {"c", ColumnKind::Categorical}};
    ds.schema.target_column = "y";
    ds.code_tables = {{}, {"red", "blue"}};
    ds.append_row({0.1234567890123456789, 0.0}, 1.5, false, 0);
    ds.append_row({-3.25, 1.0}, -2.75, true, 1);

    save_csv(ds, dir / "out.csv");
    const auto back = load_csv(dir / "out.csv", ds.schema, &ds.code_tables);
    REQUIRE(back.n_rows() == 2);
    CHECK(back.rows[0][0] == ds.rows[0][0]);
    CHECK(back.rows[1][1] == 1.0);
    CHECK(back.targets[1] == -2.75);
    CHECK(back.synthetic[0] == 0);
    CHECK(back.synthetic[1] == 1);
}

TEST_CASE("bin_index boundaries and clamping") {
    BinningScheme s{1.0, 0.0, 30};
    CHECK(s.index(0.0) == 0);
    CHECK(s.index(1.0) == 1);
    CHECK(s.index(0.999999) == 0);
    CHECK(s.index(1e9) == 29);
    CHECK(s.index(-1e9) == 0);

    // Monotone non-decreasing in y.
    double prev_y = -5.0;
    for (double y = -5.0; y <= 35.0; y += 0.37) {
        CHECK(s.index(y) >= s.index(prev_y));
        prev_y = y;
    }
}

TEST_CASE("bin_frequencies") {
    BinningScheme s{1.0, 0.0, 2};
    const auto f = bin_frequencies(std::vector<double>{0.5, 0.5, 1.5}, s);
    CHECK(f[0] == doctest::Approx(2.0 / 3.0));
    CHECK(f[1] == doctest::Approx(1.0 / 3.0));

    BinningScheme s4{1.0, 0.0, 4};
    const auto u = bin_frequencies(std::vector<double>{0.5, 1.5, 2.5, 3.5}, s4);
    for (double x : u) CHECK(x == doctest::Approx(0.25));

    double total = 0.0;
    for (double x : f) {
        CHECK(x >= 0.0);
        total += x;
    }
    CHECK(total == doctest::Approx(1.0));

    CHECK_THROWS_AS(bin_frequencies(std::vector<double>{}, s), Error);
}

TEST_CASE("make_splits inverse weighting matches the reciprocal oracle") {
    // Bin counts 9000/900/100 leave train frequencies exactly 0.9/0.09/0.01,
    // so the inverse weights are [0.0099, 0.099, 0.891]. Bin 0 is
    // uncontended and must receive exactly round(w_0 * c* * 3) rows.
    std::vector<double> targets;
    for (int b = 0; b < 3; ++b) {
        const std::size_t n = b == 0 ? 9000 : b == 1 ? 900 : 100;
        for (std::size_t i = 0; i < n; ++i) targets.push_back(b + 0.5);
    }
    const auto ds = identity_dataset(targets);
    BinningScheme scheme{1.0, 0.0, 3};
    const auto bundle = make_splits(ds, scheme, 0.2, 7);

    CHECK(bundle.bin_frequencies_train[0] == doctest::Approx(0.9));
    CHECK(bundle.bin_frequencies_train[2] == doctest::Approx(0.01));

    const double inv_sum = 1.0 / 0.9 + 1.0 / 0.09 + 1.0 / 0.01;
    const double w0 = (1.0 / 0.9) / inv_sum;
    CHECK(w0 == doctest::Approx(0.0099).epsilon(1e-2));

    // c* = median pool count = 180, total per set 540.
    const auto inv_counts = bin_counts(bundle.test_inverse, scheme);
    CHECK(inv_counts[0] == static_cast<std::size_t>(std::llround(w0 * 540.0)));

    // The rare bin's pool (20 rows) cannot satisfy the inverse demand.
    CHECK(bundle.shortfall_inverse[2] == 1);
    const auto norm_counts = bin_counts(bundle.test_normal, scheme);
    CHECK(inv_counts[2] > norm_counts[2]);
}

TEST_CASE("make_splits on a uniform distribution is uniform per set") {
    std::vector<double> targets;
    for (int b = 0; b < 4; ++b)
        for (int i = 0; i < 100; ++i) targets.push_back(b + 0.5);
    const auto ds = identity_dataset(targets);
    BinningScheme scheme{1.0, 0.0, 4};
    const auto bundle = make_splits(ds, scheme, 0.2, 3);

    for (const auto* set : {&bundle.test_normal, &bundle.test_inverse, &bundle.test_balanced}) {
        const auto counts = bin_counts(*set, scheme);
        for (std::size_t b = 1; b < counts.size(); ++b) CHECK(counts[b] == counts[0]);
    }
}

TEST_CASE("make_splits is deterministic and disjoint") {
    const auto ds = cluster_dataset({0.0, 10.0}, {300, 60}, 1.0, 11);
    const auto scheme = BinningScheme::fit(ds.targets, 1.0);
    const auto a = make_splits(ds, scheme, 0.2, 42);
    const auto b = make_splits(ds, scheme, 0.2, 42);
    CHECK(a.train.row_ids == b.train.row_ids);
    CHECK(a.test_balanced.row_ids == b.test_balanced.row_ids);
    CHECK(a.test_normal.row_ids == b.test_normal.row_ids);
    CHECK(a.test_inverse.row_ids == b.test_inverse.row_ids);

    std::set<std::uint64_t> seen(a.train.row_ids.begin(), a.train.row_ids.end());
    std::size_t total = a.train.n_rows();
    for (const auto* set : {&a.test_balanced, &a.test_normal, &a.test_inverse}) {
        for (auto id : set->row_ids) CHECK(seen.insert(id).second);
        total += set->n_rows();
    }
    CHECK(total <= ds.n_rows());

    const auto c = make_splits(ds, scheme, 0.2, 43);
    CHECK(c.train.row_ids != a.train.row_ids);
}

TEST_CASE("scaler matches hand values and round-trips") {
    const auto ds = dataset_from({{1.0}, {2.0}, {3.0}}, {0.0, 0.0, 0.0});
    const auto sc = fit_scaler(ds);
    const auto scaled = apply_scaler(ds, sc);
    CHECK(scaled.rows[0][0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(scaled.rows[1][0] == doctest::Approx(0.0));
    CHECK(scaled.rows[2][0] == doctest::Approx(1.2247).epsilon(1e-4));

    const auto back = invert_scaler(scaled, sc);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(back.rows[i][0] == doctest::Approx(ds.rows[i][0]).epsilon(1e-12));

    const auto flat = dataset_from({{5.0}, {5.0}, {5.0}}, {0.0, 0.0, 0.0});
    const auto flat_scaled = apply_scaler(flat, fit_scaler(flat));
    for (const auto& r : flat_scaled.rows) CHECK(r[0] == 0.0);
}

TEST_CASE("BinningScheme::fit covers the target range") {
    const std::vector<double> targets{1.2, 3.4, 9.9};
    const auto s = BinningScheme::fit(targets, 2.0);
    CHECK(s.index(1.2) == 0);
    CHECK(s.index(9.9) == s.num_bins - 1);
    CHECK(s.bin_width == 2.0);
}

}  // TEST_SUITE
