#include <array>
#include <cmath>
#include <stdexcept>
#include <random>
#include <sstream>

#include "doctest.h"
#include "minicar/lane_postprocess.hpp"

using namespace minicar;

namespace {

// Normal-equation least squares solved by Cramer's rule; independent of the
// library's solver.
std::array<double, 3> oracle_quadratic(const std::vector<BevPoint>& pts) {
    double s[5] = {0, 0, 0, 0, 0};
    double t[3] = {0, 0, 0};
    for (const auto& p : pts) {
        double xk = 1.0;
        for (int k = 0; k < 5; ++k) {
            s[k] += xk;
            if (k < 3) t[k] += xk * p.lateral_m;
            xk *= p.forward_m;
        }
    }
    auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h,
                   double i) { return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g); };
    const double d = det3(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
    return {det3(t[0], s[1], s[2], t[1], s[2], s[3], t[2], s[3], s[4]) / d,
            det3(s[0], t[0], s[2], s[1], t[1], s[3], s[2], t[2], s[4]) / d,
            det3(s[0], s[1], t[0], s[1], s[2], t[1], s[2], s[3], t[2]) / d};
}

LanePolynomial constant(double c) {
    LanePolynomial p;
    p.coeffs = {c, 0.0, 0.0};
    p.s_max = 1.0;
    return p;
}

std::vector<BevPoint> sample(const std::array<double, 3>& c, int n, double s0, double s1) {
    std::vector<BevPoint> out;
    for (int i = 0; i < n; ++i) {
        const double s = s0 + (s1 - s0) * i / (n - 1);
        out.push_back({s, c[0] + c[1] * s + c[2] * s * s});
    }
    return out;
}

}  // namespace

TEST_CASE("to_bev: origin, scaling and ROI") {
    BevConfig cfg;
    cfg.px_per_meter = 100.0;
    const std::vector<ImagePoint> pts{{320.0, 479.0}, {270.0, 479.0}, {320.0, 100.0}};
    const auto out = to_bev(pts, 640, 480, cfg);
    REQUIRE(out.size() == 2);
    CHECK(out[0].forward_m == 0.0);
    CHECK(out[0].lateral_m == 0.0);
    CHECK(out[1].lateral_m == doctest::Approx(-0.5));
    CHECK(to_bev(std::vector<ImagePoint>{}, 640, 480, cfg).empty());
    const BevPoint b{0.7, -0.3};
    const auto back = to_bev(std::vector<ImagePoint>{from_bev(b, 640, 480, cfg)}, 640, 480, cfg);
    REQUIRE(back.size() == 1);
    CHECK(back[0].forward_m == doctest::Approx(0.7));
    CHECK(back[0].lateral_m == doctest::Approx(-0.3));
}

TEST_CASE("filter_outliers: documented examples") {
    const auto line = sample({0.1, 0.2, 0.0}, 8, 0.0, 1.4);
    CHECK(filter_outliers(line, 3.0).size() == line.size());
    const std::vector<BevPoint> pts{{0.0, -0.50}, {0.2, -0.49}, {0.4, -0.51}, {0.6, -0.50}, {0.8, 0.80}};
    const auto kept = filter_outliers(pts, 2.0);
    REQUIRE(kept.size() == 4);
    for (const auto& p : kept) CHECK(p.lateral_m < 0.0);
    const std::vector<BevPoint> three{{0.0, 0.0}, {0.1, 5.0}, {0.2, 0.0}};
    CHECK(filter_outliers(three, 1.0).size() == 3);
    CHECK_THROWS(filter_outliers(pts, 0.0));
}

TEST_CASE("property: filter_outliers removes at most half") {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> n(0, 30);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<BevPoint> pts;
        const int count = n(gen);
        for (int i = 0; i < count; ++i) pts.push_back({0.05 * i, u(gen)});
        const auto kept = filter_outliers(pts, 1.0);
        CHECK(kept.size() >= pts.size() - pts.size() / 2);
        CHECK(kept.size() <= pts.size());
    }
}

TEST_CASE("property: filter_outliers commutes with lateral translation") {
    std::mt19937_64 gen(29);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::uniform_real_distribution<double> shift(-0.5, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BevPoint> pts;
        for (int i = 0; i < 12; ++i) pts.push_back({0.1 * i, 0.25 + 0.1 * 0.1 * i + noise(gen)});
        pts[static_cast<std::size_t>(trial % 12)].lateral_m += 0.3;
        // Dyadic offsets keep the translated coordinates exact.
        const double d = std::ldexp(std::round(std::ldexp(shift(gen), 6)), -6);
        std::vector<BevPoint> moved = pts;
        for (auto& p : moved) p.lateral_m += d;
        const auto a = filter_outliers(pts, 3.0, 0.005);
        const auto b = filter_outliers(moved, 3.0, 0.005);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].forward_m == b[i].forward_m);
    }
}

TEST_CASE("fit_lane: documented examples") {
    const auto flat = fit_lane(sample({0.5, 0.0, 0.0}, 6, 0.0, 1.0));
    REQUIRE(flat);
    CHECK(flat->degree == 1);
    CHECK(flat->coeffs[0] == doctest::Approx(0.5));
    CHECK(std::abs(flat->coeffs[1]) < 1e-12);

    const auto quad = fit_lane(sample({0.0, 0.0, 0.1}, 6, 0.0, 2.5));
    REQUIRE(quad);
    CHECK(quad->degree == 2);
    CHECK(quad->coeffs[2] == doctest::Approx(0.1).epsilon(1e-9));

    const std::vector<BevPoint> two{{0.2, 0.1}, {0.6, 0.3}};
    const auto interp = fit_lane(two);
    REQUIRE(interp);
    CHECK(interp->lateral_at(0.2) == doctest::Approx(0.1));
    CHECK(interp->lateral_at(0.6) == doctest::Approx(0.3));

    CHECK_FALSE(fit_lane(std::vector<BevPoint>{{0.3, 0.1}}));
    CHECK_FALSE(fit_lane(std::vector<BevPoint>{{0.3, 0.1}, {0.3, 0.2}}));
}

TEST_CASE("property: fit_lane matches a normal-equation oracle") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> c0(-0.6, 0.6), c1(-0.5, 0.5), c2(-0.4, 0.4);
    std::normal_distribution<double> noise(0.0, 0.002);
    for (int trial = 0; trial < 200; ++trial) {
        const std::array<double, 3> c{c0(gen), c1(gen), c2(gen)};
        auto pts = sample(c, 20, 0.0, 1.5);
        const auto exact = fit_lane(pts);
        REQUIRE(exact);
        if (std::abs(c[2]) > 0.05) {
            REQUIRE(exact->degree == 2);
            for (int k = 0; k < 3; ++k) CHECK(exact->coeffs[k] == doctest::Approx(c[k]).epsilon(1e-9));
        }
        for (auto& p : pts) p.lateral_m += noise(gen);
        const auto noisy = fit_lane(pts);
        REQUIRE(noisy);
        if (noisy->degree == 2) {
            const auto o = oracle_quadratic(pts);
            for (int k = 0; k < 3; ++k) CHECK(std::abs(noisy->coeffs[k] - o[k]) < 1e-8);
        }
    }
}

TEST_CASE("middle_line: three cases and history") {
    const MiddleLineConfig cfg;
    const MiddleLineState none;
    auto both = middle_line(constant(-0.5), constant(0.5), none, cfg);
    CHECK(both.provenance == MiddleProvenance::BothAveraged);
    CHECK(both.current->coeffs[0] == 0.0);
    auto right = middle_line(std::nullopt, constant(0.35), none, cfg);
    CHECK(right.provenance == MiddleProvenance::RightShifted);
    CHECK(std::abs(right.current->coeffs[0]) < 1e-15);
    auto left = middle_line(constant(-0.35), std::nullopt, none, cfg);
    CHECK(left.provenance == MiddleProvenance::LeftShifted);
    CHECK(std::abs(left.current->coeffs[0]) < 1e-15);

    MiddleLineState prev;
    prev.current = constant(0.1);
    prev.provenance = MiddleProvenance::BothAveraged;
    const auto held = middle_line(std::nullopt, std::nullopt, prev, cfg);
    CHECK(held.provenance == MiddleProvenance::HeldFromHistory);
    CHECK(held.current->coeffs[0] == 0.1);
    CHECK(held.age_frames == 1);
}

TEST_CASE("property: averaging both sides equals shifting either one for a true-width lane") {
    std::mt19937_64 gen(37);
    std::uniform_real_distribution<double> c(-0.3, 0.3);
    const MiddleLineConfig cfg;
    for (int i = 0; i < 200; ++i) {
        LanePolynomial mid;
        mid.coeffs = {c(gen), c(gen), c(gen)};
        mid.degree = 2;
        const auto l = mid.shifted(-0.35);
        const auto r = mid.shifted(+0.35);
        const auto a = middle_line(l, r, {}, cfg);
        const auto b = middle_line(l, std::nullopt, {}, cfg);
        const auto d = middle_line(std::nullopt, r, {}, cfg);
        for (int k = 0; k < 3; ++k) {
            CHECK(a.current->coeffs[k] == doctest::Approx(mid.coeffs[k]).epsilon(1e-12));
            CHECK(b.current->coeffs[k] == doctest::Approx(mid.coeffs[k]).epsilon(1e-12));
            CHECK(d.current->coeffs[k] == doctest::Approx(mid.coeffs[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: held age grows by one and the lane is lost after hold_limit") {
    for (int limit : {0, 1, 5, 15}) {
        MiddleLineConfig cfg;
        cfg.hold_limit = limit;
        MiddleLineState s = middle_line(constant(-0.35), constant(0.35), {}, cfg);
        for (int k = 1; k <= limit + 3; ++k) {
            const auto next = middle_line(std::nullopt, std::nullopt, s, cfg);
            CHECK(next.age_frames == s.age_frames + 1);
            CHECK(next.lane_lost() == (k > limit));
            s = next;
        }
    }
}

TEST_CASE("path_error and path_curvature") {
    LanePolynomial p;
    CHECK(path_error(p).cross_track_m == 0.0);
    CHECK(path_error(p).heading_err_rad == 0.0);
    p.coeffs = {0.2, 0.1, 0.0};
    CHECK(path_error(p).cross_track_m == doctest::Approx(0.2));
    CHECK(path_error(p).heading_err_rad == doctest::Approx(0.09967).epsilon(1e-4));
    CHECK(path_curvature(p) == 0.0);
    p.coeffs = {0.0, 0.0, 0.05};
    CHECK(path_error(p).cross_track_m == 0.0);
    CHECK(path_error(p).heading_err_rad == 0.0);
    p.coeffs = {0.0, 0.0, 0.1};
    CHECK(path_curvature(p) == doctest::Approx(0.2));
    p.coeffs = {0.2, 0.1, 0.05};
    CHECK(path_curvature(p) == doctest::Approx(0.1 / std::pow(1.01, 1.5)));
    CHECK(path_curvature(p) == doctest::Approx(0.09852).epsilon(1e-4));
}

TEST_CASE("process_lane_frame: round trip through from_bev") {
    const LanePipelineConfig cfg;
    LanePoints pts;
    for (int i = 0; i <= 20; ++i) {
        const double s = 0.05 + 0.06 * i;
        pts.left.push_back(from_bev({s, 0.2 - 0.35 + 0.1 * s}, 640, 480, cfg.bev));
        pts.right.push_back(from_bev({s, 0.2 + 0.35 + 0.1 * s}, 640, 480, cfg.bev));
    }
    const auto res = process_lane_frame(pts, {}, cfg);
    REQUIRE(res.error);
    CHECK(res.middle.provenance == MiddleProvenance::BothAveraged);
    CHECK(res.error->cross_track_m == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(res.error->heading_err_rad == doctest::Approx(std::atan(0.1)).epsilon(1e-9));
    CHECK(res.curvature_per_m < 1e-9);
}

TEST_CASE("read_lane_replay") {
    std::istringstream good("frame_id,side,u_px,v_px\n0,left,100,400\n0,right,500,400\n2,left,101.5,300\n");
    const auto frames = read_lane_replay(good, 640, 480);
    REQUIRE(frames.size() == 2);
    CHECK(frames.at(0).left.size() == 1);
    CHECK(frames.at(0).right.size() == 1);
    CHECK(frames.at(2).left[0].u_px == 101.5);
    std::istringstream bad_side("0,middle,1,2\n");
    CHECK_THROWS_AS(read_lane_replay(bad_side, 640, 480), std::runtime_error);
    std::istringstream short_row("0,left,1\n");
    CHECK_THROWS_AS(read_lane_replay(short_row, 640, 480), std::runtime_error);
    std::istringstream bad_num("0,left,x,2\n");
    CHECK_THROWS_AS(read_lane_replay(bad_num, 640, 480), std::runtime_error);
}
