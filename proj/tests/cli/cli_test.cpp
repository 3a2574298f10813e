// Drives the geomlens executable end to end.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geomlens/numeric.hpp"
#include "geomlens/tensor_io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace geomlens;
namespace fs = std::filesystem;

namespace {

struct TempRoot {
    fs::path path = fs::temp_directory_path() / ("geomlens_cli_" + std::to_string(std::random_device{}()));
    TempRoot() { fs::create_directories(path); }
    ~TempRoot() { fs::remove_all(path); }
};

const fs::path& workdir() {
    static const TempRoot root;
    return root.path;
}

int run(const std::string& args) {
    const std::string cmd = std::string(GEOMLENS_BIN) + " " + args + " > " + (workdir() / "stdout.txt").string() +
                            " 2> " + (workdir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string w(const std::string& name) { return (workdir() / name).string(); }

void synth_layers() {
    if (fs::exists(workdir() / "syn_L02.gt")) return;
    REQUIRE(run("synth --C 12 --T 16 --d 8 --rank 3 --layers 3 --seed 5 --out " + w("syn.gt")) == 0);
}

}  // namespace

TEST_CASE("synth then report") {
    synth_layers();
    CHECK(fs::exists(workdir() / "syn_L00.gt.truth" / "pos.gt"));
    REQUIRE(run("report " + w("syn_L00.gt") + " " + w("syn_L01.gt") + " " + w("syn_L02.gt") + " --out " + w("rep1") +
                " --json") == 0);
    const auto csv = slurp(workdir() / "rep1" / "report.csv");
    CHECK(csv.rfind("layer,T,rank_gap,", 0) == 0);
    CHECK(csv.find("\n0,15,") != std::string::npos);
    CHECK(csv.find("\n2,") == std::string::npos);  // final layer skipped
    CHECK(fs::exists(workdir() / "rep1" / "report.json"));
    CHECK(fs::exists(workdir() / "rep1" / "spectrum.csv"));

    REQUIRE(run("--threads 2 report --in " + w("syn_L00.gt") + " " + w("syn_L01.gt") + " " + w("syn_L02.gt") +
                " --out " + w("rep2")) == 0);
    CHECK(slurp(workdir() / "rep2" / "report.csv") == csv);
}

TEST_CASE("exit codes") {
    synth_layers();
    CHECK(run("report " + w("missing.gt") + " --out " + w("rx")) == 2);
    CHECK(run("no-such-command") == 2);
    CHECK(run("report") == 2);

    std::ofstream(workdir() / "junk.gt") << "GEOMTNSR but not really";
    CHECK(run("report " + w("syn_L00.gt") + " " + w("junk.gt") + " --keep-final-layer --out " + w("rp")) == 4);
    CHECK(run("report " + w("junk.gt") + " --keep-final-layer --out " + w("rq")) == 2);
}

TEST_CASE("decompose, fourier, pca, ood-report, cross-layer") {
    synth_layers();
    REQUIRE(run("decompose --in " + w("syn_L00.gt") + " --out " + w("dec")) == 0);
    for (const char* f : {"mu.gt", "pos.gt", "ctx.gt", "resid.gt", "decomposition.json"})
        CHECK(fs::exists(workdir() / "dec" / f));
    const Matrix pos = io::read_matrix(workdir() / "dec" / "pos.gt");
    CHECK(pos.rows() == 16);
    CHECK(pos.colwise().sum().cwiseAbs().maxCoeff() < 1e-5);

    REQUIRE(run("fourier --in " + w("syn_L00.gt") + " --out " + w("f.csv") + " --K 1,3,10") == 0);
    const auto f = slurp(workdir() / "f.csv");
    CHECK(f.find("10,") != std::string::npos);

    REQUIRE(run("pca --in " + w("syn_L00.gt") + " --out " + w("pca.csv")) == 0);
    CHECK(slurp(workdir() / "pca.csv").find("pos") != std::string::npos);

    REQUIRE(run("ood-report " + w("syn_L00.gt") + " " + w("syn_L01.gt") + " --out " + w("ood")) == 0);
    CHECK(!fs::is_empty(workdir() / "ood"));

    REQUIRE(run("cross-layer " + w("syn_L00.gt") + " " + w("syn_L01.gt") + " --out " + w("cross.csv")) == 0);
    CHECK(!slurp(workdir() / "cross.csv").empty());
}

TEST_CASE("qk and weights") {
    synth_layers();
    numeric::Rng rng(3);
    const Matrix wq = numeric::gaussian_matrix(8, 4, rng), wk = numeric::gaussian_matrix(8, 4, rng);
    fs::create_directories(workdir() / "heads");
    io::write_container(io::matrix_to_container(wq, "weight_q", io::DType::f64, {{"layer", 0}, {"head", 0}}),
                        workdir() / "heads" / "h0_wq.gt");
    io::write_container(io::matrix_to_container(wk, "weight_k", io::DType::f64, {{"layer", 0}, {"head", 0}}),
                        workdir() / "heads" / "h0_wk.gt");

    REQUIRE(run("--precision f64 qk --emb " + w("syn_L00.gt") + " --wq " + w("heads/h0_wq.gt") + " --wk " + w("heads/h0_wk.gt") +
                " --seq 1 --causal --out " + w("qk")) == 0);
    const Matrix full = io::read_matrix(workdir() / "qk" / "full.gt");
    Matrix sum = Matrix::Zero(full.rows(), full.cols());
    for (const char* part : {"pp.gt", "pc.gt", "cp.gt", "cc.gt"}) sum += io::read_matrix(workdir() / "qk" / part);
    CHECK((sum - full).cwiseAbs().maxCoeff() < 1e-9);
    const Matrix attn = io::read_matrix(workdir() / "qk" / "attn.gt");
    CHECK(attn(0, 1) == 0.0);

    REQUIRE(run("weights --p " + w("syn_L00.gt") + " --w-dir " + w("heads") + " --K 3 --out " + w("weights.csv")) == 0);
    CHECK(slurp(workdir() / "weights.csv").find("energy") != std::string::npos);

    CHECK(run("qk --emb " + w("syn_L00.gt") + " --wq " + w("heads/h0_wq.gt") + " --wk " + w("heads/h0_wk.gt") +
              " --seq 99 --out " + w("qk2")) == 2);
}

TEST_CASE("verifiers") {
    CHECK(run("verify thm2 --trials 20 --json " + w("t2.json")) == 0);
    CHECK(slurp(workdir() / "t2.json").find("\"holds\": 20") != std::string::npos);
    CHECK(run("verify thm1 --trials 3 --k 8 --m 1") == 0);
    CHECK(slurp(workdir() / "stdout.txt").find("holds 3/3") != std::string::npos);
    CHECK(run("verify thm2 --incoh 0.1 --gamma 0.5") == 2);
}
