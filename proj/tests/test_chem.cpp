#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "dermadiff/chem.hpp"
#include "dermadiff/errors.hpp"

using namespace dermadiff;
using namespace dermadiff::chem;
using geometry::SkinLayer;

namespace {

const std::string kShippedDb = std::string(DD_DATA_DIR) + "/chemicals.csv";

std::string temp_csv(const std::string& content) {
    static int counter = 0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("dd_chem_test_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter++) + ".csv");
    std::ofstream out(path);
    out << content;
    return path.string();
}

} // namespace

TEST_CASE("free diffusion coefficient formula") {
    // Direct high-precision evaluation of 10^(-4.15 - 0.6555 log10(mw)).
    CHECK(d_free(100.0) == doctest::Approx(3.459e-6).epsilon(2e-4));
    CHECK(d_free(100.0) == doctest::Approx(std::pow(10.0, -4.15 - 0.6555 * 2.0)).epsilon(1e-14));
    CHECK(d_free(123.109) == doctest::Approx(3.018e-6).epsilon(2e-4));
    CHECK_THROWS_AS(d_free(0.0), std::domain_error);
    CHECK_THROWS_AS(d_free(-5.0), std::domain_error);
}

TEST_CASE("d_free is strictly decreasing in molecular weight") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> mws(10.0, 2000.0);
    for (int i = 0; i < 1000; ++i) {
        double a = mws(rng), b = mws(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        CHECK(d_free(a) > d_free(b));
    }
}

TEST_CASE("SC diffusivity from lag time") {
    CHECK(d_sc_from_lag(20.0, 3.0) == doctest::Approx(400.0 / 18.0).epsilon(1e-14));
    CHECK(d_sc_from_lag(20.0, 6.0) == doctest::Approx(0.5 * d_sc_from_lag(20.0, 3.0)));
    CHECK(d_sc_from_lag(40.0, 3.0) == doctest::Approx(4.0 * d_sc_from_lag(20.0, 3.0)));
    CHECK_THROWS_AS(d_sc_from_lag(0.0, 3.0), std::domain_error);
    CHECK_THROWS_AS(d_sc_from_lag(20.0, 0.0), std::domain_error);
}

TEST_CASE("unit conversion cm^2/s -> um^2/h") {
    CHECK(convert_diffusivity(1e-6) == doctest::Approx(3.6e5).epsilon(1e-14));
    CHECK(convert_diffusivity(0.0) == 0.0);
    CHECK(convert_diffusivity(3.018e-6) == doctest::Approx(1.0865e6).epsilon(1e-3));
    CHECK_THROWS_AS(convert_diffusivity(-1.0), std::domain_error);
}

TEST_CASE("shipped database carries the documented values") {
    const auto db = load_database(kShippedDb);
    CHECK(db.size() >= 12);

    auto k_of = [&](const std::string& name, SkinLayer l) {
        const auto& rec = find_chemical(db, name);
        REQUIRE(rec.k[static_cast<int>(l)].has_value());
        return *rec.k[static_cast<int>(l)];
    };
    CHECK(k_of("naphthalene", SkinLayer::VE) == doctest::Approx(10.7));
    CHECK(k_of("2-ethylhexyl acrylate", SkinLayer::SC) == doctest::Approx(170.0));
    CHECK(k_of("basic red 76", SkinLayer::SC) == doctest::Approx(18.0));
    CHECK(k_of("propylparaben", SkinLayer::VE) == doctest::Approx(10.1));
    CHECK(k_of("ibuprofen", SkinLayer::SC) == doctest::Approx(7.9));
    CHECK(k_of("ibuprofen", SkinLayer::VE) == doctest::Approx(6.7));
    CHECK(k_of("resorcinol", SkinLayer::SC) == doctest::Approx(3.0));
    CHECK(k_of("resorcinol", SkinLayer::VE) == doctest::Approx(2.6));
    CHECK(k_of("benzyl bromide", SkinLayer::SC) == doctest::Approx(3.0));
    CHECK(k_of("benzylideneacetone", SkinLayer::SC) == doctest::Approx(0.6));

    CHECK(find_chemical(db, "triclosan").chemical.mw == doctest::Approx(289.542));
    CHECK(find_chemical(db, "nitrobenzene").chemical.mw == doctest::Approx(123.109));
    CHECK(find_chemical(db, "isoeugenol").chemical.mw == doctest::Approx(164.201));
    CHECK(find_chemical(db, "benzophenone").chemical.mw == doctest::Approx(182.218));
    CHECK(find_chemical(db, "basic red 76").chemical.mw == doctest::Approx(371.8));
    CHECK(find_chemical(db, "2-ethylhexyl acrylate").chemical.mw ==
          doctest::Approx(184.27535));
    CHECK(find_chemical(db, "naphthalene").chemical.mw == doctest::Approx(128.1705));
    CHECK(find_chemical(db, "propylparaben").chemical.mw == doctest::Approx(180.2));
    CHECK(find_chemical(db, "resorcinol").chemical.mw == doctest::Approx(110.1));

    CHECK_THROWS_AS(find_chemical(db, "unobtainium"), config_error);
}

TEST_CASE("database parsing errors carry row numbers") {
    const std::string header =
        "name,mw,log_kow,t_lag_h,k_depos,k_sc,k_ve,k_de,d_depos,d_sc,d_ve,d_de";

    SUBCASE("empty file with header only") {
        CHECK(load_database(temp_csv(header + "\n")).empty());
    }
    SUBCASE("wrong header") {
        CHECK_THROWS_AS(load_database(temp_csv("name,mw\nfoo,1\n")), config_error);
    }
    SUBCASE("malformed number names the row") {
        try {
            load_database(temp_csv(header + "\nfoo,abc,,,,,,,,,,\n"));
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }
    SUBCASE("missing molecular weight") {
        CHECK_THROWS_AS(load_database(temp_csv(header + "\nfoo,,,,,,,,,,,\n")), config_error);
    }
    SUBCASE("duplicate names") {
        CHECK_THROWS_AS(
            load_database(temp_csv(header + "\nfoo,1,,,,,,,,,,\nfoo,2,,,,,,,,,,\n")),
            config_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_database("/nonexistent/db.csv"), io_error);
    }
}

TEST_CASE("database round-trips through save/load") {
    const auto db = load_database(kShippedDb);
    const auto path = temp_csv("");
    save_database(path, db);
    const auto again = load_database(path);
    REQUIRE(again.size() == db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
        CHECK(again[i].chemical.name == db[i].chemical.name);
        CHECK(again[i].chemical.mw == doctest::Approx(db[i].chemical.mw).epsilon(1e-12));
        CHECK(again[i].chemical.t_lag.has_value() == db[i].chemical.t_lag.has_value());
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            REQUIRE(again[i].k[l].has_value() == db[i].k[l].has_value());
            if (db[i].k[l]) CHECK(*again[i].k[l] == doctest::Approx(*db[i].k[l]).epsilon(1e-12));
            REQUIRE(again[i].d[l].has_value() == db[i].d[l].has_value());
            if (db[i].d[l]) CHECK(*again[i].d[l] == doctest::Approx(*db[i].d[l]).epsilon(1e-12));
        }
    }
}

TEST_CASE("resolve_params fills gaps with the documented estimates") {
    const auto profile = geometry::layer_preset(geometry::Region::chest, geometry::Age::old);
    const auto db = load_database(kShippedDb);

    SUBCASE("nitrobenzene d_ve comes from the free-diffusion formula") {
        const auto params = resolve_params(find_chemical(db, "nitrobenzene"), profile);
        CHECK(params.diffusivity(SkinLayer::VE) == doctest::Approx(1.0865e6).epsilon(1e-3));
        CHECK(params.d_provenance[static_cast<int>(SkinLayer::VE)] ==
              Provenance::estimated_dfree);
        CHECK(params.d_provenance[static_cast<int>(SkinLayer::DE)] ==
              Provenance::estimated_dfree);
        CHECK(params.d_provenance[static_cast<int>(SkinLayer::SC)] == Provenance::database);
        CHECK(params.k_provenance[static_cast<int>(SkinLayer::DEPOS)] == Provenance::defaulted);
        CHECK(params.partition(SkinLayer::DEPOS) == 1.0);
    }

    SUBCASE("thioglycolic acid d_sc comes from the lag time") {
        const auto params = resolve_params(find_chemical(db, "thioglycolic acid"), profile);
        CHECK(params.diffusivity(SkinLayer::SC) == doctest::Approx(400.0 / 18.0).epsilon(1e-12));
        CHECK(params.d_provenance[static_cast<int>(SkinLayer::SC)] ==
              Provenance::estimated_dsc);
    }

    SUBCASE("complete records stay untouched") {
        ChemicalRecord rec;
        rec.chemical.name = "synthetic";
        rec.chemical.mw = 100.0;
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            rec.k[l] = 2.0 + l;
            rec.d[l] = 100.0 + l;
        }
        const auto params = resolve_params(rec, profile);
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            CHECK(params.k[l] == doctest::Approx(2.0 + l));
            CHECK(params.d[l] == doctest::Approx(100.0 + l));
            CHECK(params.k_provenance[l] == Provenance::database);
            CHECK(params.d_provenance[l] == Provenance::database);
        }
    }

    SUBCASE("unresolvable d_sc names the field") {
        ChemicalRecord rec;
        rec.chemical.name = "no-sc-data";
        rec.chemical.mw = 100.0;
        try {
            resolve_params(rec, profile);
            FAIL("expected config_error");
        } catch (const config_error& e) {
            CHECK(std::string(e.what()).find("d_sc") != std::string::npos);
        }
    }
}

TEST_CASE("resolve_params is idempotent and always positive") {
    const auto profile = geometry::layer_preset(geometry::Region::chest, geometry::Age::old);
    const auto db = load_database(kShippedDb);
    for (const auto& rec : db) {
        const auto first = resolve_params(rec, profile);
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            CHECK(first.k[l] > 0.0);
            CHECK(first.d[l] > 0.0);
            CHECK(std::isfinite(first.k[l]));
            CHECK(std::isfinite(first.d[l]));
        }
        // Feed the resolved values back in as a fully explicit record.
        ChemicalRecord full = rec;
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            full.k[l] = first.k[l];
            full.d[l] = first.d[l];
        }
        const auto second = resolve_params(full, profile);
        for (int l = 0; l < geometry::kLayerCount; ++l) {
            CHECK(second.k[l] == first.k[l]);
            CHECK(second.d[l] == first.d[l]);
        }
    }
}
