#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fimcb/dataset.hpp>
#include <fimcb/eval.hpp>
#include <fimcb/rng.hpp>

#include "testutil.hpp"

using namespace fimcb;

namespace {

ParticleRecord val_record(const std::string& id, const std::string& antibody, Stress stress) {
    ParticleRecord r;
    r.id = id;
    r.antibody = antibody;
    r.stress = stress;
    r.replicate = 1;
    r.image_path = id + ".png";
    r.width = 64;
    r.height = 64;
    r.split = Split::Val;
    return r;
}

Prediction pred(const std::string& id, Stress truth, bool correct) {
    const Stress wrong = truth == Stress::Heat ? Stress::Mechanical : Stress::Heat;
    return Prediction{id, correct ? truth : wrong, truth};
}

// Manifest with per-antibody validation records covering both classes.
Manifest two_antibody_manifest() {
    Manifest m;
    // mAb2 and mAb10 both present: ordering must be numeric-aware (length
    // before lex), so mAb2 sorts ahead of mAb10
    for (const auto& ab : {"mAb10", "mAb2"}) {
        for (int i = 0; i < 3; ++i) {
            m.records.push_back(val_record(std::string(ab) + "_h" + std::to_string(i), ab,
                                           Stress::Heat));
            m.records.push_back(val_record(std::string(ab) + "_m" + std::to_string(i), ab,
                                           Stress::Mechanical));
        }
    }
    return m;
}

} // namespace

TEST_CASE("accuracy: simple counts and the empty case") {
    std::vector<Prediction> preds = {
        pred("a", Stress::Heat, true),
        pred("b", Stress::Heat, false),
        pred("c", Stress::Mechanical, true),
        pred("d", Stress::Mechanical, true),
    };
    CHECK(accuracy(preds) == 0.75);
    CHECK_THROWS_AS(accuracy({}), std::invalid_argument);
}

TEST_CASE("accuracy: matches a brute-force count on random data") {
    Rng rng(88);
    std::vector<Prediction> preds;
    int correct = 0;
    for (int i = 0; i < 1000; ++i) {
        const Stress truth = rng.bernoulli(0.5) ? Stress::Heat : Stress::Mechanical;
        const bool ok = rng.bernoulli(0.6);
        preds.push_back(pred("p" + std::to_string(i), truth, ok));
        if (ok) ++correct;
    }
    CHECK(accuracy(preds) == static_cast<double>(correct) / 1000.0);
}

TEST_CASE("per_antibody_tpr: per-label fractions") {
    const Manifest manifest = two_antibody_manifest();
    std::vector<Prediction> preds;
    // mAb2: 5 of 6 correct; mAb10: 2 of 6 correct
    int i2 = 0;
    int i10 = 0;
    for (const auto& r : manifest.records) {
        const bool correct = r.antibody == "mAb2" ? (i2++ < 5) : (i10++ < 2);
        preds.push_back(pred(r.id, r.stress, correct));
    }
    const auto tpr = per_antibody_tpr(preds, manifest);
    REQUIRE(tpr.size() == 2);
    CHECK(tpr.at("mAb2") == doctest::Approx(5.0 / 6.0));
    CHECK(tpr.at("mAb10") == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("per_antibody_tpr: only antibodies with predictions appear") {
    const Manifest manifest = two_antibody_manifest();
    const std::vector<Prediction> preds = {pred("mAb2_h0", Stress::Heat, true)};
    const auto tpr = per_antibody_tpr(preds, manifest);
    REQUIRE(tpr.size() == 1);
    CHECK(tpr.at("mAb2") == 1.0);
}

TEST_CASE("per_antibody_tpr: unknown prediction id is an error") {
    const Manifest manifest = two_antibody_manifest();
    const std::vector<Prediction> preds = {pred("ghost", Stress::Heat, true)};
    CHECK_THROWS_AS(per_antibody_tpr(preds, manifest), std::invalid_argument);
}

TEST_CASE("per_antibody_tpr: order of predictions does not matter") {
    const Manifest manifest = two_antibody_manifest();
    Rng rng(5);
    std::vector<Prediction> preds;
    for (const auto& r : manifest.records) {
        preds.push_back(pred(r.id, r.stress, rng.bernoulli(0.5)));
    }
    const auto a = per_antibody_tpr(preds, manifest);
    std::reverse(preds.begin(), preds.end());
    const auto b = per_antibody_tpr(preds, manifest);
    CHECK(a == b);
}

TEST_CASE("render_report: single mode holds every max") {
    const Manifest manifest = two_antibody_manifest();
    std::vector<Prediction> preds;
    for (const auto& r : manifest.records) {
        preds.push_back(pred(r.id, r.stress, true));
    }
    const std::vector<ModeEval> modes = {{"RGB", 1.0, preds}};
    const ReportFiles report = render_report(modes, manifest);

    // one data row, every value column marked '*', no '+' anywhere
    std::istringstream csv(report.csv);
    std::string header;
    std::string row;
    REQUIRE(std::getline(csv, header));
    REQUIRE(std::getline(csv, row));
    CHECK(header.find("mode,overall,overall_mark") == 0);
    CHECK(row.find("RGB,1.0000,*") == 0);
    CHECK(row.find("+") == std::string::npos);

    // column order: overall, heat block, then mech block; mAb2 before mAb10
    CHECK(header.find("heat:mAb2") != std::string::npos);
    CHECK(header.find("heat:mAb2") < header.find("heat:mAb10"));
    CHECK(header.find("heat:mAb10") < header.find("mech:mAb2"));
    CHECK(header.find("mech:mAb2") < header.find("mech:mAb10"));
}

TEST_CASE("render_report: distinct values get '*' and '+'") {
    const Manifest manifest = two_antibody_manifest();
    std::vector<Prediction> all_right;
    std::vector<Prediction> mostly_right;
    int i = 0;
    for (const auto& r : manifest.records) {
        all_right.push_back(pred(r.id, r.stress, true));
        mostly_right.push_back(pred(r.id, r.stress, i++ % 3 != 0));
    }
    const std::vector<ModeEval> modes = {
        {"RGB", accuracy(all_right), all_right},
        {"Grayscale", accuracy(mostly_right), mostly_right},
    };
    const ReportFiles report = render_report(modes, manifest);

    std::istringstream csv(report.csv);
    std::string header;
    std::string rgb_row;
    std::string gray_row;
    REQUIRE(std::getline(csv, header));
    REQUIRE(std::getline(csv, rgb_row));
    REQUIRE(std::getline(csv, gray_row));
    // overall column: RGB 1.0 starred, Grayscale second-best plussed
    CHECK(rgb_row.find("RGB,1.0000,*") == 0);
    CHECK(gray_row.find("Grayscale,0.6667,+") == 0);

    // the text table carries the same marks
    CHECK(report.text.find("1.0000*") != std::string::npos);
    CHECK(report.text.find("0.6667+") != std::string::npos);
}

TEST_CASE("render_report: a tied max marks all holders and no '+'") {
    const Manifest manifest = two_antibody_manifest();
    std::vector<Prediction> preds;
    for (const auto& r : manifest.records) {
        preds.push_back(pred(r.id, r.stress, true));
    }
    const std::vector<ModeEval> modes = {
        {"RGB", 1.0, preds},
        {"Mixed", 1.0, preds},
    };
    const ReportFiles report = render_report(modes, manifest);

    std::istringstream csv(report.csv);
    std::string line;
    REQUIRE(std::getline(csv, line)); // header
    int starred = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        CHECK(line.find("+") == std::string::npos);
        if (line.find(",*") != std::string::npos) ++starred;
    }
    CHECK(starred == 2);
    // the footer states the tie rule for human readers
    CHECK(report.text.find("tied max") != std::string::npos);
}

TEST_CASE("render_report: deterministic output") {
    const Manifest manifest = two_antibody_manifest();
    Rng rng(17);
    std::vector<Prediction> a;
    std::vector<Prediction> b;
    for (const auto& r : manifest.records) {
        a.push_back(pred(r.id, r.stress, rng.bernoulli(0.8)));
        b.push_back(pred(r.id, r.stress, rng.bernoulli(0.5)));
    }
    const std::vector<ModeEval> modes = {
        {"RGB", accuracy(a), a},
        {"Grayscale", accuracy(b), b},
    };
    const ReportFiles first = render_report(modes, manifest);
    const ReportFiles second = render_report(modes, manifest);
    CHECK(first.csv == second.csv);
    CHECK(first.text == second.text);
}

TEST_CASE("render_report: antibody appears only in blocks it has records for") {
    Manifest manifest;
    // mAb1 has only heat validation records, mAb2 has both
    for (int i = 0; i < 2; ++i) {
        manifest.records.push_back(val_record("h1_" + std::to_string(i), "mAb1", Stress::Heat));
        manifest.records.push_back(val_record("h2_" + std::to_string(i), "mAb2", Stress::Heat));
        manifest.records.push_back(
            val_record("m2_" + std::to_string(i), "mAb2", Stress::Mechanical));
    }
    std::vector<Prediction> preds;
    for (const auto& r : manifest.records) {
        preds.push_back(pred(r.id, r.stress, true));
    }
    const ReportFiles report = render_report({{"RGB", 1.0, preds}}, manifest);
    std::istringstream csv(report.csv);
    std::string header;
    REQUIRE(std::getline(csv, header));
    CHECK(header.find("heat:mAb1") != std::string::npos);
    CHECK(header.find("heat:mAb2") != std::string::npos);
    CHECK(header.find("mech:mAb2") != std::string::npos);
    CHECK(header.find("mech:mAb1") == std::string::npos);
}
