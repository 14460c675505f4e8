#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>

#include "tcnot/decoder.hpp"
#include "tcnot/surface_code.hpp"

using namespace tcnot;
using Catch::Approx;

namespace {

double joint_probability(const JointBondDist& dist, int nq, QubitMask u, QubitMask v) {
    double prob = 1.0;
    for (int q = 0; q < nq; ++q) {
        const int a = (u >> q) & 1, b = (v >> q) & 1;
        prob *= dist.prob[a][b];
    }
    return prob;
}

}  // namespace

TEST_CASE("rotated surface code geometry", "[decoder]") {
    for (int d : {3, 5}) {
        RotatedSurfaceCode code(d);
        CHECK(int(code.z_stabs.size()) == (d * d - 1) / 2);
        CHECK(int(code.x_stabs.size()) == (d * d - 1) / 2);
        for (auto s : code.z_stabs) {
            const int w = std::popcount(s);
            CHECK((w == 2 || w == 4));
        }
        // every single-qubit X error triggers 1 or 2 Z-plaquettes
        for (int q = 0; q < code.n_qubits(); ++q) {
            const int n = std::popcount(code.syndrome(QubitMask(1) << q));
            CHECK(n >= 1);
            CHECK(n <= 2);
        }
        // X-stabilizers and logical X commute with every Z-stabilizer
        for (auto zs : code.z_stabs) {
            for (auto xs : code.x_stabs) CHECK((std::popcount(zs & xs) & 1) == 0);
            CHECK((std::popcount(zs & code.logical_x) & 1) == 0);
        }
        // logical X anticommutes with logical Z
        CHECK((std::popcount(code.logical_x & code.logical_z) & 1) == 1);
        // solver produces matching patterns for every single-stabilizer syndrome
        for (int j = 0; j < code.n_z_stabs(); ++j) {
            const auto u = code.solve_syndrome(std::uint64_t(1) << j);
            CHECK(code.syndrome(u) == std::uint64_t(1) << j);
        }
    }
    CHECK_THROWS_AS(RotatedSurfaceCode(4), std::invalid_argument);
    CHECK_THROWS_AS(RotatedSurfaceCode(1), std::invalid_argument);
}

TEST_CASE("detector composition rules", "[decoder]") {
    RotatedSurfaceCode code(3);
    const int bulk = 1 * 3 + 1;  // central qubit

    SECTION("pre-gate control flip triggers both blocks") {
        ErrorSample s;
        s.e_c1 = QubitMask(1) << bulk;
        const auto det = detectors(code, s);
        CHECK(std::popcount(det.d_c) == 2);
        CHECK(det.d_t == det.d_c);  // same plaquettes light up in the target block
    }
    SECTION("post-gate control flip stays in the control block") {
        ErrorSample s;
        s.e_c2 = QubitMask(1) << bulk;
        const auto det = detectors(code, s);
        CHECK(std::popcount(det.d_c) == 2);
        CHECK(det.d_t == 0);
    }
    SECTION("target flips stay in the target block") {
        for (auto which : {0, 1}) {
            ErrorSample s;
            (which == 0 ? s.e_t1 : s.e_t2) = QubitMask(1) << bulk;
            const auto det = detectors(code, s);
            CHECK(det.d_c == 0);
            CHECK(std::popcount(det.d_t) == 2);
        }
    }
}

TEST_CASE("detector gauge invariance", "[decoder]") {
    RotatedSurfaceCode code(3);
    rng::Stream stream(rng::derive_key(5, rng::kInit));
    ErrorSample base;
    base.e_c1 = stream.next_u64() & 0x1ff;
    base.e_c2 = stream.next_u64() & 0x1ff;
    base.e_t1 = stream.next_u64() & 0x1ff;
    base.e_t2 = stream.next_u64() & 0x1ff;
    const auto det0 = detectors(code, base);
    for (auto gen : code.x_stabs) {
        for (int channel = 0; channel < 4; ++channel) {
            ErrorSample s = base;
            (channel == 0   ? s.e_c1
             : channel == 1 ? s.e_c2
             : channel == 2 ? s.e_t1
                            : s.e_t2) ^= gen;
            const auto det = detectors(code, s);
            CHECK(det.d_c == det0.d_c);
            CHECK(det.d_t == det0.d_t);
        }
        // compensated form: stabilizer into e_c1 together with e_t1
        ErrorSample s = base;
        s.e_c1 ^= gen;
        s.e_t1 ^= gen;
        const auto det = detectors(code, s);
        CHECK(det.d_c == det0.d_c);
        CHECK(det.d_t == det0.d_t);
    }
}

TEST_CASE("error sampling", "[decoder]") {
    RotatedSurfaceCode code(5);
    SECTION("clean limit") {
        const auto s = sample_error(code, 0.0, 3);
        CHECK(s.e_c1 == 0);
        CHECK(s.e_c2 == 0);
        CHECK(s.e_t1 == 0);
        CHECK(s.e_t2 == 0);
    }
    SECTION("flip fraction within 4 sigma") {
        const double pt = 0.1;
        long flips = 0;
        const long shots = 10000;
        for (long i = 0; i < shots; ++i) {
            const auto s = sample_error(code, pt, rng::derive_key(9, 0, i));
            flips += std::popcount(s.e_c1) + std::popcount(s.e_c2) +
                     std::popcount(s.e_t1) + std::popcount(s.e_t2);
        }
        const double n_bits = double(shots) * 4 * code.n_qubits();
        const double sigma = std::sqrt(pt * (1 - pt) / n_bits);
        CHECK(std::abs(flips / n_bits - pt) < 4 * sigma);
    }
    SECTION("identical seeds give identical masks") {
        const auto a = sample_error(code, 0.2, 42);
        const auto b = sample_error(code, 0.2, 42);
        CHECK(a.e_c1 == b.e_c1);
        CHECK(a.e_t2 == b.e_t2);
    }
}

TEST_CASE("mle decoding basics", "[decoder]") {
    RotatedSurfaceCode code(3);
    const double pt = 0.05;
    JointMleDecoder decoder(code, pt);

    SECTION("zero detectors give the identity, no tie") {
        const auto out = decoder.decode({0, 0});
        CHECK(out.correction_c == 0);
        CHECK(out.correction_t == 0);
        CHECK_FALSE(out.logical_c);
        CHECK_FALSE(out.logical_t);
        CHECK_FALSE(out.tie);
    }
    SECTION("single pre-gate bulk flip is decoded without logical error") {
        for (int q : {4, 1, 3, 8}) {
            ErrorSample s;
            s.e_c1 = QubitMask(1) << q;
            const auto det = detectors(code, s);
            const auto out = decoder.decode(det);
            CHECK(code.syndrome(out.correction_c) == det.d_c);
            CHECK(code.syndrome(out.correction_t) == det.d_t);
            CHECK_FALSE(code.is_logical_x(combined_control(s) ^ out.correction_c));
            CHECK_FALSE(code.is_logical_x(combined_target(s) ^ out.correction_t));
        }
    }
    SECTION("decoded configuration beats random consistent alternatives") {
        const auto dist = joint_bond_dist(pt);
        rng::Stream stream(rng::derive_key(31, rng::kInit));
        for (int rep = 0; rep < 20; ++rep) {
            ErrorSample s;
            s.e_c1 = stream.next_u64() & 0x1ff;
            s.e_t1 = stream.next_u64() & 0x1ff;
            const auto det = detectors(code, s);
            const auto out = decoder.decode(det);
            const double best =
                joint_probability(dist, 9, out.correction_c, out.correction_t);
            // random coset elements: add random X-stabilizers / logicals
            std::vector<QubitMask> gens = code.x_stabs;
            gens.push_back(code.logical_x);
            for (int alt = 0; alt < 500; ++alt) {
                QubitMask u = out.correction_c, v = out.correction_t;
                for (auto g : gens) {
                    if (stream.u01() < 0.5) u ^= g;
                    if (stream.u01() < 0.5) v ^= g;
                }
                CHECK(joint_probability(dist, 9, u, v) <= best * (1 + 1e-9));
            }
        }
    }
    SECTION("optimality against exhaustive joint enumeration") {
        const auto dist = joint_bond_dist(pt);
        std::vector<QubitMask> gens = code.x_stabs;
        gens.push_back(code.logical_x);
        rng::Stream stream(rng::derive_key(32, rng::kInit));
        for (int rep = 0; rep < 10; ++rep) {
            ErrorSample s;
            s.e_c1 = stream.next_u64() & 0x1ff;
            s.e_c2 = stream.next_u64() & 0x1ff;
            s.e_t1 = stream.next_u64() & 0x1ff;
            const auto det = detectors(code, s);
            const auto out = decoder.decode(det);
            const QubitMask u0 = code.solve_syndrome(det.d_c);
            const QubitMask v0 = code.solve_syndrome(det.d_t);
            double best = -1.0;
            for (int cu = 0; cu < 32; ++cu)
                for (int cv = 0; cv < 32; ++cv) {
                    QubitMask u = u0, v = v0;
                    for (int g = 0; g < 5; ++g) {
                        if ((cu >> g) & 1) u ^= gens[g];
                        if ((cv >> g) & 1) v ^= gens[g];
                    }
                    best = std::max(best, joint_probability(dist, 9, u, v));
                }
            const double found =
                joint_probability(dist, 9, out.correction_c, out.correction_t);
            CHECK(found == Approx(best).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(JointMleDecoder(RotatedSurfaceCode(7), 0.05), std::invalid_argument);
}

TEST_CASE("exact d=3 logical error rates", "[decoder]") {
    SECTION("clean limit") {
        const auto r = exact_ler_d3(0.0);
        CHECK(r.ler_control == 0.0);
        CHECK(r.ler_target == 0.0);
        CHECK(r.total_probability == Approx(1.0).margin(1e-12));
    }
    SECTION("probability conservation and target >= control") {
        for (double pt : {0.01, 0.04, 0.08, 0.1}) {
            const auto r = exact_ler_d3(pt);
            CHECK(r.total_probability == Approx(1.0).margin(1e-12));
            CHECK(r.class_mass[0] + r.class_mass[1] + r.class_mass[2] + r.class_mass[3] ==
                  Approx(1.0).margin(1e-12));
            CHECK(r.ler_target >= r.ler_control - 1e-12);
        }
    }
}

TEST_CASE("sampled LER agrees with the exact oracle", "[decoder][slow]") {
    RotatedSurfaceCode code(3);
    const double pt = 0.04;
    const long shots = 20000;
    const auto exact = exact_ler_d3(pt);
    const auto row = ler_estimate(code, pt, shots, 99, 2);
    const double sigma_t = std::sqrt(exact.ler_target * (1 - exact.ler_target) / shots);
    const double sigma_c = std::sqrt(exact.ler_control * (1 - exact.ler_control) / shots);
    INFO("target " << row.ler_target.rate << " vs " << exact.ler_target);
    CHECK(std::abs(row.ler_target.rate - exact.ler_target) < 4 * sigma_t);
    CHECK(std::abs(row.ler_control.rate - exact.ler_control) < 4 * sigma_c);
}

TEST_CASE("distance suppresses errors below threshold", "[decoder][slow]") {
    const double pt = 0.01;
    const long shots = 6000;
    RotatedSurfaceCode d3(3), d5(5);
    const auto r3 = ler_estimate(d3, pt, shots, 7, 2);
    const auto r5 = ler_estimate(d5, pt, shots, 7, 2);
    INFO("d3 " << r3.ler_target.rate << " d5 " << r5.ler_target.rate);
    CHECK(r5.ler_target.rate < r3.ler_target.rate);
}

TEST_CASE("ler estimation is deterministic", "[decoder]") {
    RotatedSurfaceCode code(3);
    const auto a = ler_estimate(code, 0.03, 2000, 5, 1);
    const auto b = ler_estimate(code, 0.03, 2000, 5, 2);
    CHECK(a.ler_control.rate == b.ler_control.rate);
    CHECK(a.ler_target.rate == b.ler_target.rate);
    CHECK(a.ties == b.ties);
    CHECK_THROWS_AS(ler_estimate(code, 0.03, 100, 5, 1), std::invalid_argument);
}

TEST_CASE("wilson interval sanity", "[decoder]") {
    const auto est = wilson_interval(50, 1000);
    CHECK(est.rate == Approx(0.05));
    CHECK(est.ci_low < 0.05);
    CHECK(est.ci_high > 0.05);
    CHECK(est.ci_low > 0.03);
    CHECK(est.ci_high < 0.08);
}
