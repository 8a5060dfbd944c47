#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stdhl/data.hpp"
#include "stdhl/rng.hpp"

using namespace stdhl;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

std::vector<FarmSeries> small_synth(std::int64_t farms, std::int64_t length,
                                    std::uint64_t seed = 5) {
    SynthOptions opt;
    opt.n_farms = farms;
    opt.length = length;
    opt.seed = seed;
    return synth_dataset(opt, PowerCurve::default_ge15());
}

}  // namespace

TEST_CASE("timestamps parse and format round trip") {
    const std::string s = "20120101 01:00";
    const auto t = parse_timestamp(s);
    CHECK(format_timestamp(t) == s);
    CHECK(parse_timestamp("20131231 23:00") - parse_timestamp("20131231 22:00") == 60);
    // two full years (2012-2013) at hourly resolution
    CHECK((parse_timestamp("20140101 00:00") - parse_timestamp("20120101 00:00")) / 60 == 17544);
    CHECK_THROWS_AS(parse_timestamp("2012-01-01 01:00"), DataError);
    CHECK_THROWS_AS(parse_timestamp("20120101 25:00"), DataError);
}

TEST_CASE("load_csv: zone count, sorting, empty file, row errors") {
    const auto path = temp_path("stdhl_load.csv");
    {
        std::ofstream out(path);
        out << "ZONEID,TIMESTAMP,TARGETVAR,U10,V10,U100,V100\n";
        // shuffled rows for two zones plus one bad row
        out << "2,20120101 02:00,0.5,1,1,2,2\n";
        out << "1,20120101 02:00,0.25,1,0,2,0\n";
        out << "1,20120101 01:00,0.2,1,0,2,0\n";
        out << "2,20120101 01:00,0.4,1,1,2,2\n";
        out << "1,20120101 03:00,1.5,1,0,2,0\n";   // power out of tolerance
        out << "1,20120101 04:00,1.005,1,0,2,0\n";  // within tolerance -> clamped
        out << "1,20120101 05:00,nan,1,0,2,0\n";    // non-finite value
    }
    auto r = load_csv(path);
    CHECK(r.series.size() == 2);
    CHECK(r.series[0].farm_id == "1");
    CHECK(r.series[0].times.size() == 3);
    CHECK(r.series[0].power[0] == doctest::Approx(0.2));
    CHECK(r.series[0].power[1] == doctest::Approx(0.25));
    CHECK(r.series[0].power[2] == 1.0);  // clamped
    CHECK(r.row_errors.size() == 2);
    CHECK(r.gap_count >= 1);  // zone 1 jumps 02:00 -> 04:00

    const auto empty = temp_path("stdhl_empty.csv");
    { std::ofstream out(empty); }
    auto re = load_csv(empty);
    CHECK(re.series.empty());
    CHECK(re.row_errors.empty());

    const auto bad = temp_path("stdhl_badheader.csv");
    {
        std::ofstream out(bad);
        out << "ZONE,TIME\n";
    }
    CHECK_THROWS_AS(load_csv(bad), DataError);
}

TEST_CASE("load_csv: a 10-zone file yields 10 series") {
    const auto path = temp_path("stdhl_ten.csv");
    save_csv(path, small_synth(10, 30));
    auto r = load_csv(path);
    CHECK(r.series.size() == 10);
    CHECK(r.row_errors.empty());
}

TEST_CASE("csv round trip: values to 1e-9, timestamps exact") {
    const auto path = temp_path("stdhl_roundtrip.csv");
    auto orig = small_synth(3, 50);
    save_csv(path, orig);
    auto back = load_csv(path).series;
    REQUIRE(back.size() == orig.size());
    for (std::size_t f = 0; f < orig.size(); ++f) {
        CHECK(back[f].farm_id == orig[f].farm_id);
        REQUIRE(back[f].times == orig[f].times);
        for (std::size_t i = 0; i < orig[f].times.size(); ++i) {
            CHECK(std::abs(back[f].power[i] - orig[f].power[i]) < 1e-9);
            CHECK(std::abs(back[f].u10[i] - orig[f].u10[i]) < 1e-9);
            CHECK(std::abs(back[f].v100[i] - orig[f].v100[i]) < 1e-9);
        }
    }
}

TEST_CASE("wind_features: Pythagorean case, axis case, unit identity, zero convention") {
    auto f = wind_features(3.0, 4.0);
    CHECK(f.speed == doctest::Approx(5.0));
    CHECK(f.sin_dir == doctest::Approx(0.8));
    CHECK(f.cos_dir == doctest::Approx(0.6));

    auto a = wind_features(0.0, 1.0);
    CHECK(a.speed == doctest::Approx(1.0));
    CHECK(a.sin_dir == doctest::Approx(1.0));
    CHECK(a.cos_dir == doctest::Approx(0.0));

    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        auto g = wind_features(rng.uniform(-10, 10), rng.uniform(-10, 10));
        if (g.speed > 0)
            CHECK(g.sin_dir * g.sin_dir + g.cos_dir * g.cos_dir == doctest::Approx(1.0));
    }

    auto z = wind_features(0.0, 0.0);
    CHECK(z.speed == 0.0);
    CHECK(z.sin_dir == 0.0);
    CHECK(z.cos_dir == 1.0);
}

TEST_CASE("make_windows: origin arithmetic via an index oracle") {
    WindowOptions opt;  // T'=12, T=4, tau=4
    // oracle: count origins i0 (0-based) with i0 >= max(T',tau)-1 and i0+T+tau <= L-1
    auto oracle = [&](std::int64_t len) {
        std::int64_t count = 0;
        for (std::int64_t i0 = 0; i0 < len; ++i0) {
            if (i0 < std::max(opt.look_back, opt.extension) - 1) continue;
            if (i0 - opt.look_back + 1 < 0) continue;
            if (i0 - opt.extension + 1 < 0) continue;
            if (i0 + opt.horizon + opt.extension > len - 1) continue;
            ++count;
        }
        return count;
    };
    for (std::int64_t len : {20, 21, 24, 40}) {
        auto wr = make_windows(small_synth(2, len), opt);
        CHECK(static_cast<std::int64_t>(wr.samples.size()) == oracle(len));
    }
    // minimal length with exactly one sample
    const std::int64_t minimal = opt.horizon + opt.extension + std::max(opt.look_back, opt.extension);
    CHECK(oracle(minimal) == 1);
    CHECK(make_windows(small_synth(2, minimal), opt).samples.size() == 1);
    CHECK(make_windows(small_synth(2, minimal - 1), opt).samples.empty());

    // tau = 0 shrinks the NWP window to the horizon
    WindowOptions noext = opt;
    noext.extension = 0;
    auto wr0 = make_windows(small_synth(2, 30), noext);
    REQUIRE(!wr0.samples.empty());
    CHECK(wr0.samples[0].nwp.dim(2) == noext.horizon);
}

TEST_CASE("make_windows: shapes, no look-ahead, gap dropping, misalignment") {
    WindowOptions opt;
    auto series = small_synth(3, 40);
    auto wr = make_windows(series, opt);
    REQUIRE(!wr.samples.empty());
    const auto& w = wr.samples[0];
    CHECK(w.measured.shape() == Shape{7, 3, 12});
    CHECK(w.nwp.shape() == Shape{6, 3, 12});
    CHECK(w.target.shape() == Shape{3, 4});

    // measured window ends at the origin; target strictly after it
    const auto i0 = w.origin_index;
    CHECK(w.measured(0, 1, 11) == series[1].power[static_cast<std::size_t>(i0)]);
    CHECK(w.target(1, 0) == series[1].power[static_cast<std::size_t>(i0 + 1)]);

    // knock a row out of the middle: windows covering it are dropped
    auto gappy = series;
    for (auto& s : gappy) {
        s.times.erase(s.times.begin() + 20);
        s.power.erase(s.power.begin() + 20);
        s.u10.erase(s.u10.begin() + 20);
        s.v10.erase(s.v10.begin() + 20);
        s.u100.erase(s.u100.begin() + 20);
        s.v100.erase(s.v100.begin() + 20);
    }
    auto wg = make_windows(gappy, opt);
    CHECK(wg.dropped > 0);
    CHECK(wg.samples.size() < wr.samples.size());

    auto skewed = series;
    skewed[1].times[0] += 60;
    CHECK_THROWS_AS(make_windows(skewed, opt), DataError);
}

TEST_CASE("make_windows: power-only drops the measured wind channels") {
    WindowOptions opt;
    opt.power_only = true;
    auto wr = make_windows(small_synth(2, 30), opt);
    REQUIRE(!wr.samples.empty());
    CHECK(wr.samples[0].measured.shape() == Shape{1, 2, 12});
}

TEST_CASE("chronological_split: sizes and strict ordering") {
    WindowOptions opt;
    auto wr = make_windows(small_synth(2, 119), opt);
    REQUIRE(wr.samples.size() == 100);
    auto sp = chronological_split(wr.samples, 0.7, 0.1, 0.2);
    CHECK(sp.train.size() == 70);
    CHECK(sp.val.size() == 10);
    CHECK(sp.test.size() == 20);
    CHECK(sp.train.back().origin_time < sp.val.front().origin_time);
    CHECK(sp.val.back().origin_time < sp.test.front().origin_time);

    std::vector<WindowSample> ten(wr.samples.begin(), wr.samples.begin() + 10);
    auto sp10 = chronological_split(ten, 0.7, 0.1, 0.2);
    CHECK(sp10.train.size() == 7);
    CHECK(sp10.val.size() == 1);
    CHECK(sp10.test.size() == 2);

    CHECK_THROWS_AS(chronological_split(ten, 0.7, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("FeatureScaler: train-only statistics, applied unchanged elsewhere") {
    WindowOptions opt;
    auto wr = make_windows(small_synth(2, 80), opt);
    auto sp = chronological_split(wr.samples, 0.7, 0.1, 0.2);
    auto scaler = FeatureScaler::fit(sp.train, false);

    // after scaling, train speeds live in [0,1]; val/test may exceed slightly
    auto train = sp.train;
    scaler.apply_all(train, false);
    for (const auto& w : train)
        for (std::int64_t n = 0; n < 2; ++n)
            for (std::int64_t t = 0; t < w.nwp.dim(2); ++t) {
                CHECK(w.nwp(kSpeed10Channel, n, t) >= -1e-12);
                CHECK(w.nwp(kSpeed10Channel, n, t) <= 1.0 + 1e-12);
            }

    // identical samples transform identically whether fitted stats came from
    // train only (determinism of application)
    auto a = sp.test, b = sp.test;
    scaler.apply_all(a, false);
    scaler.apply_all(b, false);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::equal(a[i].nwp.data().begin(), a[i].nwp.data().end(),
                         b[i].nwp.data().begin()));

    // json round trip
    auto back = FeatureScaler::from_json(scaler.to_json());
    auto c = sp.test;
    back.apply_all(c, false);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::equal(a[i].nwp.data().begin(), a[i].nwp.data().end(),
                         c[i].nwp.data().begin()));
}

TEST_CASE("synth_dataset: clean configuration is exactly invertible by the curve") {
    SynthOptions opt;
    opt.n_farms = 2;
    opt.length = 60;
    opt.noise = 0.0;
    opt.nwp_bias = 0.0;
    opt.nwp_lag = 0;
    opt.lags = {0, 0};
    const auto curve = PowerCurve::default_ge15();
    auto series = synth_dataset(opt, curve);
    for (const auto& s : series)
        for (std::size_t t = 0; t < s.times.size(); ++t) {
            const double speed = std::sqrt(s.u100[t] * s.u100[t] + s.v100[t] * s.v100[t]);
            CHECK(std::abs(curve.power(speed) - s.power[t]) < 1e-9);
        }
}

TEST_CASE("synth_dataset: planted lag shows up as the cross-correlation peak") {
    SynthOptions opt;
    opt.n_farms = 2;
    opt.length = 2000;
    opt.noise = 0.01;
    opt.lags = {0, 2};
    auto series = synth_dataset(opt, PowerCurve::default_ge15());
    const auto& a = series[0].power;
    const auto& b = series[1].power;
    auto xcorr = [&](std::int64_t shift) {
        // centered Pearson correlation over the overlapping window
        double ma = 0.0, mb = 0.0;
        std::int64_t n = 0;
        const auto len = static_cast<std::int64_t>(a.size());
        for (std::int64_t t = 16; t + 16 < len; ++t) {
            ma += a[static_cast<std::size_t>(t)];
            mb += b[static_cast<std::size_t>(t + shift)];
            ++n;
        }
        ma /= static_cast<double>(n);
        mb /= static_cast<double>(n);
        double cov = 0.0, va = 0.0, vb = 0.0;
        for (std::int64_t t = 16; t + 16 < len; ++t) {
            const double da = a[static_cast<std::size_t>(t)] - ma;
            const double db = b[static_cast<std::size_t>(t + shift)] - mb;
            cov += da * db;
            va += da * da;
            vb += db * db;
        }
        return cov / std::sqrt(va * vb);
    };
    double best = -1e300;
    std::int64_t best_shift = -99;
    for (std::int64_t s = -6; s <= 6; ++s) {
        const double c = xcorr(s);
        if (c > best) {
            best = c;
            best_shift = s;
        }
    }
    CHECK(best_shift == 2);
}

TEST_CASE("synth_dataset: fixed seed reproduces the file byte for byte") {
    const auto p1 = temp_path("stdhl_synth_a.csv");
    const auto p2 = temp_path("stdhl_synth_b.csv");
    save_csv(p1, small_synth(3, 40, 99));
    save_csv(p2, small_synth(3, 40, 99));
    CHECK(read_file(p1) == read_file(p2));
    const auto p3 = temp_path("stdhl_synth_c.csv");
    save_csv(p3, small_synth(3, 40, 100));
    CHECK(read_file(p1) != read_file(p3));
}

TEST_CASE("history_matrix and select_farms") {
    auto series = small_synth(3, 30);
    Tensor h = history_matrix(series, 20);
    CHECK(h.shape() == Shape{3, 20});
    CHECK(h(1, 5) == series[1].power[5]);

    auto sel = select_farms(series, {"3", "1"});
    CHECK(sel.size() == 2);
    CHECK(sel[0].farm_id == "3");
    CHECK_THROWS_AS(select_farms(series, {"9"}), DataError);
}
