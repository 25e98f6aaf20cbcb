#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("aos_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_file(const std::string& name, const std::string& text) {
    const auto p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p;
}

Result run(const std::string& args) {
    const auto out = scratch_dir() / "stdout.txt";
    const auto err = scratch_dir() / "stderr.txt";
    const std::string cmd = std::string("AOS_SCHED_THREADS=1 ") + AOS_SCHED_BIN + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

const char* kFig2 = R"({
  "users": [{"lambda_weight": 0.3, "p": 0.2}, {"lambda_weight": 0.4, "p": 0.55}, {"lambda_weight": 0.3, "p": 0.9}],
  "lambda_total": 1.2, "T": 3000, "replications": 2, "seed": 5, "m": 6,
  "policies": ["whittle", "greedy", "aoi", "mdp"],
  "sweep": {"param": "lambda_total", "values": [0.6, 1.2]}
})";

}  // namespace

TEST_CASE("index-table prints I(s) rows") {
    const auto r = run("index-table --lambda 1 --p 1 --s-max 5 --w-max 4 --w-step 4");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("s,index\n1,1\n2,3\n3,6\n4,10\n5,15\n", 0) == 0);
    CHECK(r.out.find("W,tau_opt\n0,1\n4,3\n") != std::string::npos);
}

TEST_CASE("index-table rejects bad parameters") {
    CHECK(run("index-table --lambda 0 --p 1").code == 1);
    CHECK(run("index-table --lambda 0.5 --p 0.5 --s-max 0").code == 1);
    CHECK(run("index-table --lambda 0.5").code == 1);
}

TEST_CASE("bound prints the lower bound and rates") {
    const auto cfg = write_file("fig2.json", kFig2);
    const auto r = run("bound --config " + cfg.string() + " --lambda-total 1.2");
    CHECK(r.code == 0);
    CHECK(r.out.find("aos_lb,") == 0);
    CHECK(r.out.find("user,lambda,p,gamma\n0,0.36,0.2,") != std::string::npos);
    CHECK(r.out.find("binding,1") != std::string::npos);
}

TEST_CASE("simulate and sweep write result tables") {
    const auto cfg = write_file("fig2.json", kFig2);
    const auto csv = scratch_dir() / "sim.csv";
    const auto hist = scratch_dir() / "hist.csv";
    auto r = run("simulate --config " + cfg.string() + " --policy whittle --output " + csv.string() + " --histogram " +
                 hist.string());
    CHECK(r.code == 0);
    const auto table = slurp(csv);
    CHECK(table.rfind("sweep_param,sweep_value,policy,replication,aos,aos_se,aoi,aoi_se,aos_lb\n", 0) == 0);
    CHECK(table.find(",,whittle,all,") != std::string::npos);
    CHECK(slurp(hist).rfind("user,age,fraction\n", 0) == 0);

    r = run("sweep --config " + cfg.string() + " --T 1000");
    CHECK(r.code == 0);
    CHECK(r.out.find("lambda_total,0.6,mdp,all,") != std::string::npos);
    CHECK(r.out.find("lambda_total,1.2,aoi,1,") != std::string::npos);
}

TEST_CASE("seed override changes results, same seed repeats them") {
    const auto cfg = write_file("fig2.json", kFig2);
    const std::string base = "simulate --config " + cfg.string() + " --policy greedy";
    const auto a = run(base + " --seed 1");
    const auto b = run(base + " --seed 1");
    const auto c = run(base + " --seed 2");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
}

TEST_CASE("config errors exit with 1") {
    const auto cfg = write_file("fig2.json", kFig2);
    auto r = run("simulate --config " + cfg.string() + " --policy oracle");
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown policy") != std::string::npos);
    CHECK(run("simulate --config /nonexistent.json").code == 1);
    const auto broken = write_file("broken.json", "{\"users\": [");
    CHECK(run("simulate --config " + broken.string()).code == 1);
    const auto overload = write_file("overload.json", R"({"users": [{"lambda_weight": 0.5, "p": 0.5}],
        "sweep": {"param": "lambda_total", "values": [3.0]}})");
    CHECK(run("sweep --config " + overload.string()).code == 1);
    CHECK(run("sweep --config " + write_file("nosweep.json", R"({"users": [{"lambda": 0.5, "p": 0.5}]})").string())
              .code == 1);
    CHECK(run("").code == 1);
    CHECK(run("frobnicate").code == 1);
}

TEST_CASE("mdp solves, exports and reports structure") {
    const auto cfg = write_file("two.json", R"({"users": [{"lambda": 0.3, "p": 0.2}, {"lambda": 0.4, "p": 0.55}]})");
    const auto pcsv = scratch_dir() / "policy.csv";
    const auto pbin = scratch_dir() / "policy.bin";
    const auto r = run("mdp --config " + cfg.string() + " --m 5 --alpha 0.9 --policy-csv " + pcsv.string() +
                       " --policy-bin " + pbin.string());
    CHECK(r.code == 0);
    CHECK(r.out.rfind("states,36\n", 0) == 0);
    CHECK(r.out.find("persistence_violations,0") != std::string::npos);
    CHECK(slurp(pcsv).rfind("x0,x1,action\n0,0,-1\n", 0) == 0);
    CHECK(fs::file_size(pbin) == 16 + 4 * 36);

    const auto plain = run("mdp --config " + cfg.string() + " --m 5 --alpha 0.9 --solver plain");
    CHECK(plain.code == 0);
    CHECK(run("mdp --config " + cfg.string() + " --solver magic").code == 1);
    CHECK(run("mdp --config " + cfg.string() + " --alpha 1.5").code == 1);
}

TEST_CASE("verify output is reproducible") {
    const auto a = scratch_dir() / "verify_a.csv";
    const auto b = scratch_dir() / "verify_b.csv";
    const auto ra = run("verify --seed 3 --T 2000 --replications 2 --output " + a.string());
    const auto rb = run("verify --seed 3 --T 2000 --replications 2 --output " + b.string());
    CHECK(ra.code == rb.code);
    CHECK(slurp(a).rfind("name,value,reference,tolerance,passed\n", 0) == 0);
    CHECK(slurp(a) == slurp(b));
}
