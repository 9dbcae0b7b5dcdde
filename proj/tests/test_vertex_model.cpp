#include "cascade_lab/errors.hpp"
#include "cascade_lab/vertex_model.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace cascade_lab;

namespace {

TypeDistribution three_atoms()
{
    return TypeDistribution({{1.0, 2.0, Threshold{0}, 1.0, 0.2},
                             {3.0, 1.0, Threshold{2}, 0.5, 0.5},
                             {1.5, 1.5, Threshold::infinity(), 2.0, 0.3}});
}

} // namespace

TEST_CASE("validation rejects malformed laws")
{
    CHECK_THROWS_AS(TypeDistribution({}), ConfigError);
    CHECK_THROWS_AS(TypeDistribution({{1.0, 1.0, Threshold{1}, 1.0, 0.7}}), ConfigError);
    CHECK_THROWS_AS(TypeDistribution({{0.5, 1.0, Threshold{1}, 1.0, 1.0}}), ConfigError);
    CHECK_THROWS_AS(TypeDistribution({{1.0, 1.0, Threshold{1}, -1.0, 1.0}}), ConfigError);
    CHECK_THROWS_AS(TypeDistribution({{1.0, 1.0, Threshold{1}, 1.0, -0.1}, {1.0, 1.0, Threshold{1}, 1.0, 1.1}}),
                    ConfigError);
    CHECK_NOTHROW(TypeDistribution({{0.5, 1.0, Threshold{1}, 1.0, 1.0}}, 0.25));
    const auto n = TypeDistribution::normalized({{1.0, 1.0, Threshold{1}, 1.0, 2.0}, {2.0, 1.0, Threshold{0}, 1.0, 6.0}});
    CHECK(n.atoms()[0].prob == doctest::Approx(0.25));
    CHECK(n.atoms()[1].prob == doctest::Approx(0.75));
}

TEST_CASE("moments")
{
    const auto d = three_atoms();
    CHECK(d.lambda_minus() == doctest::Approx(0.2 * 1.0 + 0.5 * 3.0 + 0.3 * 1.5));
    CHECK(d.lambda_plus() == doctest::Approx(0.2 * 2.0 + 0.5 * 1.0 + 0.3 * 1.5));
    CHECK(d.mean_relevance() == doctest::Approx(0.2 + 0.25 + 0.6));
    CHECK(d.zero_threshold_mass() == doctest::Approx(0.2));
    CHECK(d.max_w_minus() == 3.0);
    CHECK(d.max_w_plus() == 2.0);
}

TEST_CASE("sampling is deterministic and follows the atom law")
{
    const auto d = three_atoms();
    const auto a = sample_sequence(d, 50000, 99);
    const auto b = sample_sequence(d, 50000, 99);
    CHECK(a.types == b.types);
    CHECK(a.types != sample_sequence(d, 50000, 100).types);
    CHECK_NOTHROW(a.validate());

    std::map<double, std::size_t> counts;
    for (const auto& t : a.types)
        ++counts[t.w_minus];
    for (const auto& atom : d.atoms()) {
        const double p = atom.prob;
        const double se = std::sqrt(p * (1 - p) / 50000.0);
        CHECK(std::fabs(static_cast<double>(counts[atom.w_minus]) / 50000.0 - p) < 5 * se);
    }
    CHECK(total_variation(empirical_distribution(a), d) < 0.02);
    CHECK_THROWS_AS(sample_sequence(d, 0, 1), DomainError);
}

TEST_CASE("ex-post infection marks a p share and leaves thresholds alone")
{
    const auto d = three_atoms();
    const auto seq = sample_sequence(d, 40000, 5);
    const auto marked = apply_ex_post_infection(seq, 0.1, 6);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(marked.types[i].threshold == seq.types[i].threshold);
        zeros += marked.types[i].mark ? 0 : 1;
    }
    CHECK(std::fabs(static_cast<double>(zeros) / 40000.0 - 0.1) < 5 * std::sqrt(0.09 / 40000.0));
    CHECK(apply_ex_post_infection(seq, 0.0, 6).types == seq.types);
    CHECK_THROWS_AS(apply_ex_post_infection(seq, 1.5, 6), DomainError);
}

TEST_CASE("ex-post transformed law")
{
    const auto d = three_atoms();
    const auto t = with_ex_post_infection(d, 0.25);
    double total = 0.0;
    for (const auto& a : t.atoms())
        total += a.prob;
    CHECK(total == doctest::Approx(1.0));
    // Mass at threshold 0: original 0.2, plus a quarter of the rest.
    CHECK(t.zero_threshold_mass() == doctest::Approx(0.2 + 0.25 * 0.8));
    CHECK(t.lambda_minus() == doctest::Approx(d.lambda_minus()));
    CHECK(t.lambda_plus() == doctest::Approx(d.lambda_plus()));
    CHECK(total_variation(with_ex_post_infection(d, 0.0), d) < 1e-15);
}

TEST_CASE("empirical law of a marked sequence uses effective thresholds")
{
    VertexSequence seq;
    seq.types = {{1.0, 1.0, Threshold{2}, 1.0, true}, {1.0, 1.0, Threshold{2}, 1.0, false}};
    const auto e = empirical_distribution(seq);
    CHECK(e.size() == 2);
    CHECK(e.zero_threshold_mass() == doctest::Approx(0.5));
}

TEST_CASE("power-law discretization reproduces the truncated mean")
{
    for (const double beta : {2.5, 3.5}) {
        PowerLawSpec spec;
        spec.beta = beta;
        const auto d = make_power_law_distribution(spec);
        const double w = spec.w_max;
        const double analytic = (beta - 1) / (beta - 2) * (1 - std::pow(w, 2 - beta)) / (1 - std::pow(w, 1 - beta));
        CHECK(truncated_power_law_mean(beta, w) == doctest::Approx(analytic).epsilon(1e-12));
        CHECK(std::fabs(d.lambda_plus() / analytic - 1) < 1e-3);
        CHECK(d.lambda_minus() == doctest::Approx(d.lambda_plus()));
        CHECK(d.size() == 1000);
        for (const auto& a : d.atoms()) {
            CHECK(a.w_minus == a.w_plus);
            CHECK(a.threshold == Threshold{2});
        }
    }
    // beta = 2.5, w_max = 1000: E[W] = 3 (1 - w^-1/2) / (1 - w^-3/2).
    PowerLawSpec spec;
    const double want = 3 * (1 - std::pow(1000.0, -0.5)) / (1 - std::pow(1000.0, -1.5));
    CHECK(std::fabs(make_power_law_distribution(spec).lambda_plus() / want - 1) < 1e-3);

    spec.beta = 1.9;
    CHECK_THROWS_AS(make_power_law_distribution(spec), DomainError);
}

TEST_CASE("uniform threshold rules split each weight atom")
{
    PowerLawSpec spec;
    spec.n_atoms = 50;
    spec.w_max = 30;
    const auto base = make_power_law_distribution(spec);
    double p_zero = 0.0;
    for (const auto& a : base.atoms())
        p_zero += a.prob / (std::ceil(a.w_minus) + 1);

    spec.threshold = threshold_rule::UniformFromZero{};
    const auto from_zero = make_power_law_distribution(spec);
    CHECK(from_zero.zero_threshold_mass() == doctest::Approx(p_zero).epsilon(1e-12));
    CHECK(from_zero.lambda_plus() == doctest::Approx(base.lambda_plus()).epsilon(1e-12));

    spec.threshold = threshold_rule::UniformFromOne{};
    const auto from_one = make_power_law_distribution(spec);
    CHECK(from_one.zero_threshold_mass() == 0.0);
    for (const auto& a : from_one.atoms()) {
        CHECK(a.threshold.value() >= 1);
        CHECK(a.threshold.value() <= std::ceil(a.w_minus));
    }

    spec.relevance = RelevanceRule::InWeight;
    const auto weighted = make_power_law_distribution(spec);
    for (const auto& a : weighted.atoms())
        CHECK(a.relevance == a.w_minus);
}

TEST_CASE("small sampling and counting cases")
{
    const TypeDistribution single({{2.0, 3.0, Threshold{1}, 1.0, 1.0}});
    const auto five = sample_sequence(single, 5, 1);
    REQUIRE(five.size() == 5);
    for (const auto& t : five.types)
        CHECK(t == five.types[0]);
    CHECK(empirical_distribution(five).size() == 1);

    const TypeDistribution halves({{1.0, 1.0, Threshold{1}, 1.0, 0.5}, {2.0, 1.0, Threshold{1}, 1.0, 0.5}});
    const auto big = sample_sequence(halves, 100000, 8);
    std::size_t first = 0;
    for (const auto& t : big.types)
        first += t.w_minus == 1.0 ? 1 : 0;
    CHECK(std::fabs(static_cast<double>(first) / 100000.0 - 0.5) < 0.01);

    VertexSequence four;
    four.types = {{1.0, 1.0, Threshold{1}, 1.0, true},
                  {1.0, 1.0, Threshold{1}, 1.0, true},
                  {1.0, 1.0, Threshold{1}, 1.0, true},
                  {2.0, 1.0, Threshold{1}, 1.0, true}};
    const auto e = empirical_distribution(four);
    REQUIRE(e.size() == 2);
    CHECK(e.atoms()[0].prob + e.atoms()[1].prob == doctest::Approx(1.0));
    CHECK(std::max(e.atoms()[0].prob, e.atoms()[1].prob) == doctest::Approx(0.75));
}

TEST_CASE("ex-post marking extremes and the binomial band")
{
    const TypeDistribution d({{1.0, 1.0, Threshold{3}, 1.0, 1.0}});
    const auto seq = sample_sequence(d, 100000, 2);
    for (const auto& t : apply_ex_post_infection(seq, 1.0, 3).types)
        CHECK(t.effective_threshold().is_zero());
    std::size_t zeros = 0;
    for (const auto& t : apply_ex_post_infection(seq, 0.01, 4).types)
        zeros += t.mark ? 0 : 1;
    CHECK(std::fabs(static_cast<double>(zeros) - 1000.0) < 3 * std::sqrt(100000 * 0.01 * 0.99));
}

TEST_CASE("empirical law converges in total variation")
{
    std::vector<Atom> atoms;
    for (int i = 0; i < 10; ++i)
        atoms.push_back({1.0 + i, 2.0 + i % 3, Threshold{static_cast<std::uint32_t>(i % 4)}, 1.0, 0.1});
    const TypeDistribution d(atoms);
    const double coarse = total_variation(empirical_distribution(sample_sequence(d, 1000, 1)), d);
    const double fine = total_variation(empirical_distribution(sample_sequence(d, 100000, 1)), d);
    CHECK(fine < 0.02);
    CHECK(fine < coarse);
}
