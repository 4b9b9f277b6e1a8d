#include "cvcov/cv_engine.hpp"
#include "cvcov/errors.hpp"
#include "cvcov/loss_risk.hpp"
#include "cvcov/simulation.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>

using namespace cvcov;
using testing::rows;

TEST_CASE("split schemes") {
    SUBCASE("V-fold partition") {
        const auto splits = make_splits(SplitScheme::vfold(5, 1), 100);
        REQUIRE(splits.size() == 5);
        std::vector<int> hits(100, 0);
        for (const auto& s : splits) {
            CHECK(s.validation_count() == 20);
            for (Index i : s.validation_indices()) ++hits[static_cast<std::size_t>(i)];
        }
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    SUBCASE("uneven folds") {
        for (Index n : {7, 11, 23}) {
            const auto splits = make_splits(SplitScheme::vfold(5, 3), n);
            std::size_t total = 0;
            for (const auto& s : splits) {
                total += s.validation_count();
                CHECK(s.validation_count() >= static_cast<std::size_t>(n / 5));
                CHECK(s.validation_count() <= static_cast<std::size_t>(n / 5 + 1));
            }
            CHECK(total == static_cast<std::size_t>(n));
        }
    }
    SUBCASE("single and Monte-Carlo") {
        const auto single = make_splits(SplitScheme::single(0.2, 4), 10);
        REQUIRE(single.size() == 1);
        CHECK(single[0].validation_count() == 2);
        const auto mc = make_splits(SplitScheme::monte_carlo(7, 0.3, 4), 20);
        CHECK(mc.size() == 7);
        for (const auto& s : mc) CHECK(s.validation_count() == 6);
    }
    SUBCASE("deterministic per seed") {
        const auto a = make_splits(SplitScheme::vfold(5, 42), 57);
        const auto b = make_splits(SplitScheme::vfold(5, 42), 57);
        const auto c = make_splits(SplitScheme::vfold(5, 43), 57);
        CHECK(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].mask == b[k].mask);
        bool differs = false;
        for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k].mask != c[k].mask;
        CHECK(differs);
    }
    SUBCASE("invalid") {
        CHECK_THROWS_AS(make_splits(SplitScheme::vfold(1, 0), 10), ConfigError);
        CHECK_THROWS_AS(make_splits(SplitScheme::vfold(11, 0), 10), ConfigError);
        CHECK_THROWS_AS(make_splits(SplitScheme::single(1.0, 0), 10), ConfigError);
        CHECK_THROWS_AS(make_splits(SplitScheme::single(0.0, 0), 10), ConfigError);
    }
}

TEST_CASE("argmin breaks ties by lowest index") {
    const std::vector<double> v{3.0, 1.0, 2.0, 1.0};
    const auto r = argmin_lowest_index(v, {true, true, true, true});
    REQUIRE(r);
    CHECK(r->index == 1);
    CHECK(r->ties == std::vector<std::size_t>{1, 3});
    const auto masked = argmin_lowest_index(v, {true, false, true, true});
    CHECK(masked->index == 3);
    CHECK_FALSE(argmin_lowest_index(v, {false, false, false, false}));
}

TEST_CASE("constant candidate reduces to mean validation risk") {
    const auto x = sample_gaussian(testing::ar1(5, 0.5), 40, 7);
    const auto psi = testing::ar1(5, 0.3);
    const auto folds = to_folds(make_splits(SplitScheme::vfold(4, 9), x.n()));
    CvOptions opts;
    opts.center = false;
    const double cv = cv_risk_estimate(EstimatorSpec::fixed("c", psi), x, folds, opts);
    double expected = 0.0;
    for (const auto& f : folds) expected += validation_risk(psi, x.select_rows(f.validation), ScalingMatrix::constant(1.0));
    CHECK(cv == doctest::Approx(expected / folds.size()).epsilon(1e-13));
}

TEST_CASE("degenerate split with validation equal to training") {
    const auto x = sample_gaussian(testing::ar1(4, 0.5), 30, 1);
    Fold f;
    for (Index i = 0; i < x.n(); ++i) {
        f.training.push_back(i);
        f.validation.push_back(i);
    }
    CvOptions opts;
    opts.center = false;
    const std::vector<Fold> folds{f};
    CHECK(cv_risk_estimate(EstimatorSpec::sample_cov(), x, folds, opts) ==
          doctest::Approx(validation_risk(sample_covariance(x), x, ScalingMatrix::constant(1.0))).epsilon(1e-13));
}

TEST_CASE("selection") {
    const auto x = sample_gaussian(testing::ar1(6, 0.5), 30, 2);
    const auto scheme = SplitScheme::vfold(5, 1);
    SUBCASE("singletons") {
        const CandidateLibrary lib({EstimatorSpec::banding(3)});
        CHECK(select(lib, x, scheme).selected_id == "banding(b=3)");
        CHECK(select(CandidateLibrary({EstimatorSpec::sample_cov()}), x, scheme).selected_id == "sample_cov");
    }
    SUBCASE("duplicates tie, lowest index wins") {
        const CandidateLibrary lib({EstimatorSpec::hard(0.3).with_id("first"), EstimatorSpec::hard(0.3).with_id("second"),
                                    EstimatorSpec::sample_cov()});
        SelectOptions o;
        o.cv.route = RiskRoute::Matrix;
        const auto r = select(lib, x, scheme, o);
        CHECK(r.candidates[0].cv_risk == r.candidates[1].cv_risk);
        if (r.selected_index < 2) {
            CHECK(r.selected_id == "first");
            CHECK(r.tie_ids == std::vector<std::string>{"first", "second"});
        }
    }
    SUBCASE("selected candidate minimizes the reported risks") {
        const auto psi0 = build_model_covariance({3, 50, 0});
        const auto big = sample_gaussian(psi0, 100, 5);
        const auto r = select(default_library(), big, scheme);
        for (const auto& c : r.candidates) CHECK(r.candidates[r.selected_index].cv_risk <= c.cv_risk);
        CHECK(r.estimate == apply(default_library().candidates()[r.selected_index], center_columns(big)));
    }
    SUBCASE("route agreement with constant eta") {
        for (auto eta : {EtaPolicy::One, EtaPolicy::InvJ, EtaPolicy::InvJ2}) {
            SelectOptions a, b;
            a.cv.eta = b.cv.eta = eta;
            b.cv.route = RiskRoute::Matrix;
            const auto ra = select(default_library(), x, scheme, a);
            const auto rb = select(default_library(), x, scheme, b);
            CHECK(ra.selected_id == rb.selected_id);
        }
    }
    SUBCASE("weighted eta falls back to the observation route") {
        SelectOptions o;
        o.cv.eta = EtaPolicy::Weighted;
        o.cv.route = RiskRoute::Matrix;
        const auto r = select(default_library(), x, scheme, o);
        CHECK(r.route == RiskRoute::Observation);
        CHECK_FALSE(r.warnings.empty());
    }
    SUBCASE("every candidate failing") {
        const CandidateLibrary lib({EstimatorSpec::dense_shrinkage()});
        CHECK_THROWS_AS(select(lib, DataMatrix(rows({{1}, {2}, {-1}, {3}, {0}})), scheme), SelectionError);
    }
}

TEST_CASE("oracle selectors on a scalar toy") {
    const auto psi0 = SymMatrix::identity(1);
    const CandidateLibrary lib({EstimatorSpec::fixed("near", SymMatrix::diagonal(Vector{{1.1}})),
                                EstimatorSpec::fixed("far", SymMatrix::diagonal(Vector{{2.0}}))});
    const DataMatrix x(rows({{1}, {-1}, {0.5}, {2}, {-0.3}}));
    const auto folds = to_folds(make_splits(SplitScheme::vfold(5, 0), x.n()));
    const auto one = ScalingMatrix::constant(1.0);
    for (const auto& sel : {oracle_select_cv(lib, x, folds, psi0, one), oracle_select_full(lib, x, psi0, one)}) {
        CHECK(sel.selected_id == "fixed(near)");
        CHECK(sel.risk_differences[0] == doctest::Approx(0.01));
        CHECK(sel.risk_differences[1] == doctest::Approx(1.0));
    }
    const CandidateLibrary with_truth({EstimatorSpec::sample_cov(), EstimatorSpec::truth()});
    const auto t = oracle_select_full(with_truth, x, psi0, one);
    CHECK(t.selected_id == "truth");
    CHECK(t.risk_differences[1] == 0.0);
}

TEST_CASE("psd check") {
    CHECK(is_psd(SymMatrix::identity(3)));
    CHECK_FALSE(is_psd(SymMatrix::from_upper(rows({{1, 2}, {2, 1}}))));
}
