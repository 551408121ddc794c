#include <doctest.h>

#include "lapkm/data.hpp"
#include "lapkm/density.hpp"
#include "lapkm/image.hpp"
#include "lapkm/model_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace lapkm;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "lapkm_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path at(const std::string& name) { return workdir() / name; }

// Runs the CLI with the given arguments (stdout to `capture` if set) and returns the exit status.
int run(const std::string& args, const std::string& capture = "") {
    std::string cmd = std::string("\"") + LAPKM_CLI + "\" " + args;
    cmd += capture.empty() ? " > /dev/null 2>&1" : " > \"" + at(capture).string() + "\" 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string q(const std::string& name) { return "\"" + at(name).string() + "\""; }

}  // namespace

TEST_CASE("generate") {
    REQUIRE(run("generate spirals --per-cluster 400 --seed 7 -o " + q("sp.csv")) == 0);
    const auto data = load_csv(at("sp.csv"), false);
    CHECK(data.n() == 2000);
    CHECK(load_labels_csv(at("sp.labels.csv")).size() == 2000);
    REQUIRE(run("generate spirals --per-cluster 400 --seed 7 -o " + q("sp2.csv")) == 0);
    CHECK(slurp(at("sp.csv")) == slurp(at("sp2.csv")));

    REQUIRE(run("generate moons --per-cluster 100 --outliers 50 --seed 1 -o " + q("mo.csv")) == 0);
    const auto labels = load_labels_csv(at("mo.labels.csv"));
    CHECK(labels.size() == 250);
    CHECK(std::count(labels.begin(), labels.end(), -1) == 50);

    CHECK(run("generate spirals --seed 7") == 2);
}

TEST_CASE("cluster outputs, reductions and flag conflicts") {
    REQUIRE(run("generate moons --per-cluster 100 --outliers 20 --seed 3 -o " + q("m.csv")) == 0);
    REQUIRE(run("cluster --algo lapkm --lambda 0 --k 2 --sigma 0.3 " + q("m.csv") + " -o " + q("a.json")) == 0);
    REQUIRE(run("cluster --algo kmodes --k 2 --sigma 0.3 " + q("m.csv") + " -o " + q("b.json")) == 0);
    CHECK(slurp(at("a.labels.csv")) == slurp(at("b.labels.csv")));
    CHECK(slurp(at("a.soft.csv")) == slurp(at("b.soft.csv")));
    CHECK(load_model(at("a.json")).assignments.rows() == 220);

    CHECK(run("cluster --algo kmeans --k 2 --lambda 1 " + q("m.csv") + " -o " + q("c.json")) == 2);
    CHECK(!fs::exists(at("c.json")));
    CHECK(run("cluster --algo kmeans --k 2 --sigma 0.2 " + q("m.csv") + " -o " + q("c.json")) == 2);
    CHECK(run("cluster --k 2 --homotopy 5:0.1 " + q("m.csv") + " -o " + q("c.json")) == 2);
    CHECK(run("cluster --k 2 --sigma 0.2 --homotopy 5:0.1:4 " + q("m.csv") + " -o " + q("c.json")) == 2);

    REQUIRE(run("cluster --k 2 --sigma auto " + q("m.csv") + " -o " + q("d.json")) == 0);
    const auto report = nlohmann::json::parse(slurp(at("d.report.json")));
    CHECK(report["resolved"]["sigma_source"] == "7-NN heuristic");
    CHECK(report["resolved"]["sigma"].get<double>() == doctest::Approx(bandwidth_knn_heuristic(load_csv(at("m.csv"), false).points, 7)).epsilon(1e-15));

    REQUIRE(run("cluster --algo kmeans --k 3 " + q("m.csv") + " -o " + q("e.json")) == 0);
    REQUIRE(run("cluster --algo lapkmeans --k 3 --lambda 0.5 " + q("m.csv") + " -o " + q("f.json")) == 0);
    CHECK(run("cluster --algo gms --sigma 0.3 " + q("m.csv") + " -o " + q("g.json")) == 0);
}

TEST_CASE("report replays byte for byte, at any thread count") {
    REQUIRE(run("generate moons --per-cluster 100 --outliers 20 --seed 5 -o " + q("r.csv")) == 0);
    REQUIRE(run("--threads 3 cluster --k 2 --lambda 1 --homotopy 2:0.2:3 --seed 4 " + q("r.csv") + " -o " + q("r1.json")) == 0);
    REQUIRE(run("--threads 1 --config " + q("r1.report.json") + " cluster -o " + q("r2.json")) == 0);
    for (const char* ext : {".json", ".labels.csv", ".soft.csv"}) {
        CHECK(slurp(at(std::string("r1") + ext)) == slurp(at(std::string("r2") + ext)));
    }
    const auto report = nlohmann::json::parse(slurp(at("r2.report.json")));
    CHECK(report["config"]["cluster"]["seed"] == "4");
    CHECK(report["config"]["cluster"]["homotopy"] == "2:0.2:3");
}

TEST_CASE("error exit codes") {
    std::ofstream(at("bad.csv")) << "1,2\nx,3\n";
    CHECK(run("cluster --k 2 " + q("bad.csv") + " -o " + q("x.json")) == 3);
    CHECK(run("cluster --k 2 " + q("missing.csv") + " -o " + q("x.json")) == 3);
    std::ofstream(at("ok.csv")) << "0,0\n1,1\n2,2\n";
    CHECK(run("cluster --k 2 --sigma -1 " + q("ok.csv") + " -o " + q("x.json")) == 2);
    CHECK(run("cluster --algo nope --k 2 " + q("bad.csv") + " -o " + q("x.json")) == 2);
    CHECK(run("eval --pred " + q("missing.csv")) == 2);
}

TEST_CASE("predict and eval") {
    REQUIRE(run("generate moons --per-cluster 60 --seed 2 -o " + q("p.csv")) == 0);
    REQUIRE(run("cluster --k 2 --sigma 0.2 " + q("p.csv") + " -o " + q("p.json")) == 0);
    REQUIRE(run("predict -m " + q("p.json") + " " + q("p.csv") + " -o " + q("p.pred.csv")) == 0);
    const auto pred = load_csv(at("p.pred.csv"), true);
    CHECK(pred.points.rows() == 120);
    CHECK(pred.points.cols() == 2);
    for (Index i = 0; i < pred.n(); ++i) {
        CHECK(pred.points.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((*pred.labels)[static_cast<std::size_t>(i)] == argmax_lowest(pred.points.row(i)));
    }

    write_labels_csv(at("t.csv"), {0, 0, 1, 1});
    write_labels_csv(at("u.csv"), {0, 1, 0, 1});
    REQUIRE(run("eval --pred " + q("u.csv") + " --truth " + q("t.csv"), "eval.txt") == 0);
    CHECK(slurp(at("eval.txt")) == "acc 0.5\nnmi 0\n");
    write_labels_csv(at("v.csv"), {0, 1, 0});
    CHECK(run("eval --pred " + q("v.csv") + " --truth " + q("t.csv")) == 3);
}

TEST_CASE("kde-grid") {
    REQUIRE(run("generate moons --per-cluster 50 --seed 9 -o " + q("k.csv")) == 0);
    REQUIRE(run("cluster --k 2 --sigma 0.25 " + q("k.csv") + " -o " + q("k.json")) == 0);
    REQUIRE(run("kde-grid -m " + q("k.json") + " --resolution 2 --bounds 0 1 0 1 -o " + q("grid.csv")) == 0);
    const auto grid = load_csv(at("grid.csv"), false);
    REQUIRE(grid.points.rows() == 4);
    REQUIRE(grid.points.cols() == 6);
    for (Index i = 0; i < 4; ++i) {
        CHECK(grid.points(i, 4) + grid.points(i, 5) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(grid.points.row(i).minCoeff() >= 0);
    }
    CHECK(run("kde-grid -m " + q("k.json") + " --resolution 0 -o " + q("g0.csv")) == 2);

    // A node placed on a training point sees at least that point's own kernel weight.
    const auto model = load_model(at("k.json"));
    const double x = model.training_data(0, 0), y = model.training_data(0, 1);
    std::ostringstream b;
    b.precision(17);
    b << x << ' ' << x << ' ' << y << ' ' << y;
    REQUIRE(run("kde-grid -m " + q("k.json") + " --resolution 1 --bounds " + b.str() + " -o " + q("g1.csv")) == 0);
    const auto one = load_csv(at("g1.csv"), false);
    for (Index k = 0; k < 2; ++k) {
        const double own = model.assignments(0, k) / model.assignments.col(k).sum();
        CHECK(one.points(0, 2 + k) >= own * (1 - 1e-12));
    }

    REQUIRE(run("generate spirals --per-cluster 20 -o " + q("s.csv")) == 0);
    REQUIRE(run("cluster --algo kmeans --k 2 " + q("s.csv") + " -o " + q("s.json")) == 0);
    CHECK(run("kde-grid -m " + q("s.json") + " -o " + q("sg.csv")) == 2);
}

TEST_CASE("segment") {
    REQUIRE(run("generate occluder --seed 1 -o " + q("occ.pgm")) == 0);
    REQUIRE(run("segment " + q("occ.pgm") + " --sigma 0.2 --mask " + q("occ.mask.pgm") + " -o " + q("seg.pgm"), "seg.txt") == 0);
    CHECK(slurp(at("seg.txt")) == "occluder_error 0\n");
    const auto labels = read_pgm(at("seg.pgm"));
    CHECK(labels.rows == 64);
    CHECK(labels.cols == 64);

    GrayImage small;
    small.rows = small.cols = 8;
    small.pixels.assign(64, 0);
    write_pgm(at("small.pgm"), small);
    CHECK(run("segment " + q("occ.pgm") + " --sigma 0.2 --mask " + q("small.pgm") + " -o " + q("seg2.pgm")) == 3);
}
