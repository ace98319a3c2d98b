#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string output;
};

Run lab(const std::string& args) {
    const std::string cmd = std::string(GPART_LAB_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

struct Workdir {
    fs::path root = fs::temp_directory_path() / "gpart_cli_test";
    Workdir() {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Workdir() { fs::remove_all(root); }
    std::string operator/(const std::string& name) const { return (root / name).string(); }
};

const char* kSmallConfig =
    "samples = 300\n"
    "pretrain_epochs = 5\n"
    "epochs = 3\n"
    "d = 64\n";

}  // namespace

TEST_CASE("verify passes and filters") {
    const Run all = lab("verify");
    CHECK(all.status == 0);
    CHECK(all.output.find("FAIL") == std::string::npos);

    const Run only = lab("verify --filter isometry");
    CHECK(only.status == 0);
    CHECK(only.output.find("PASS partition_isometry") != std::string::npos);
    CHECK(only.output.find("1/1 properties passed") != std::string::npos);

    CHECK(lab("verify --filter no_such_property").status == 2);
}

TEST_CASE("verify reports an injected projection fault by name") {
    const Run r = lab("verify --inject-unscaled-projection");
    CHECK(r.status != 0);
    CHECK(r.output.find("FAIL partition_isometry") != std::string::npos);
}

TEST_CASE("train is byte-reproducible") {
    Workdir w;
    spit(w / "run.conf", kSmallConfig);
    const std::vector<std::string> files{"train_record.csv", "checkpoint.gprt", "resolved_config.txt"};
    std::vector<std::string> first;
    REQUIRE(lab("train " + (w / "run.conf") + " --out-dir " + (w / "a")).status == 0);
    for (const auto& f : files) first.push_back(slurp(w / ("a/" + f)));
    REQUIRE(lab("train " + (w / "run.conf") + " --out-dir " + (w / "a")).status == 0);
    for (std::size_t i = 0; i < files.size(); ++i) {
        CHECK(!first[i].empty());
        CHECK(slurp(w / ("a/" + files[i])) == first[i]);
    }
    CHECK(first[0].rfind("epoch,train_loss,dev_loss,dev_acc\n1,", 0) == 0);
    CHECK(first[1].size() == 40 + 8 * 64);
    CHECK(first[2].find("d = 64\n") != std::string::npos);
}

TEST_CASE("train writes no checkpoint for LoRA") {
    Workdir w;
    spit(w / "run.conf", std::string(kSmallConfig) + "adapter = lora\n");
    REQUIRE(lab("train " + (w / "run.conf") + " --out-dir " + (w / "a")).status == 0);
    CHECK(fs::exists(w / "a/train_record.csv"));
    CHECK_FALSE(fs::exists(w / "a/checkpoint.gprt"));
}

TEST_CASE("invalid configs exit 2 before training") {
    Workdir w;
    spit(w / "big.conf", "epochs = 2\nd = 6000\n");
    const Run big = lab("train " + (w / "big.conf") + " --out-dir " + (w / "out"));
    CHECK(big.status == 2);
    CHECK(big.output.find("line 2: key 'd'") != std::string::npos);
    CHECK_FALSE(fs::exists(w / "out"));

    spit(w / "typo.conf", "epoch = 2\n");
    const Run typo = lab("train " + (w / "typo.conf"));
    CHECK(typo.status == 2);
    CHECK(typo.output.find("line 1: unknown key 'epoch'") != std::string::npos);

    CHECK(lab("train " + (w / "missing.conf")).status == 2);
    CHECK(lab("no_such_command").status == 2);
}

TEST_CASE("landscape from a trained checkpoint") {
    Workdir w;
    spit(w / "run.conf", std::string(kSmallConfig) + "grid_size = 6\n");
    REQUIRE(lab("train " + (w / "run.conf") + " --out-dir " + (w / "t")).status == 0);
    const std::string ckpt = w / "t/checkpoint.gprt";
    REQUIRE(lab("landscape " + ckpt + " " + (w / "run.conf") + " -o " + (w / "l1.csv")).status == 0);
    REQUIRE(lab("landscape " + ckpt + " " + (w / "run.conf") + " -o " + (w / "l2.csv") + " --threads 3").status == 0);
    const std::string csv = slurp(w / "l1.csv");
    CHECK(csv == slurp(w / "l2.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 36);

    spit(w / "other.conf", std::string(kSmallConfig) + "layer_dims = 16,32,4\n");
    const Run mismatch = lab("landscape " + ckpt + " " + (w / "other.conf") + " -o " + (w / "l3.csv"));
    CHECK(mismatch.status == 2);
    CHECK(mismatch.output.find("N=5376") != std::string::npos);
}

TEST_CASE("sweep accepts the boundaries and rejects bad d") {
    Workdir w;
    spit(w / "run.conf", "samples = 200\npretrain_epochs = 3\nepochs = 2\nlayer_dims = 16,8,4\n");
    const Run r = lab("sweep " + (w / "run.conf") + " --d 1,160 -o " + (w / "s.csv"));
    CHECK(r.status == 0);
    const std::string csv = slurp(w / "s.csv");
    CHECK(csv.rfind("d,mean_dev_acc,std_dev_acc,runs,failures\n1,", 0) == 0);
    CHECK(csv.find("\n160,") != std::string::npos);
    CHECK(lab("sweep " + (w / "run.conf") + " --d 1,161").status == 2);
    CHECK(lab("sweep " + (w / "run.conf") + " --d 0").status == 2);
}

TEST_CASE("pack and unpack") {
    Workdir w;
    spit(w / "theta.csv", "0.5\n-1.25\n2.0\n");
    REQUIRE(lab("pack " + (w / "theta.csv") + " --seed 7 --N 100 --d 3 -o " + (w / "x.gprt")).status == 0);
    CHECK(fs::file_size(w / "x.gprt") == 64);
    const std::string bytes = slurp(w / "x.gprt");
    CHECK(bytes.substr(0, 4) == "GPRT");

    const Run un = lab("unpack " + (w / "x.gprt") + " -o " + (w / "back.csv"));
    CHECK(un.status == 0);
    CHECK(un.output.find("seed 7\nd 3\nN 100\n") != std::string::npos);
    REQUIRE(lab("pack " + (w / "back.csv") + " --seed 7 --N 100 --d 3 -o " + (w / "y.gprt")).status == 0);
    CHECK(slurp(w / "y.gprt") == bytes);

    spit(w / "short.gprt", bytes.substr(0, 50));
    const Run trunc = lab("unpack " + (w / "short.gprt") + " -o " + (w / "z.csv"));
    CHECK(trunc.status == 4);
    CHECK(trunc.output.find("byte 50") != std::string::npos);

    spit(w / "bad.csv", "0.5\nabc\n");
    CHECK(lab("pack " + (w / "bad.csv") + " --seed 1 --N 10 --d 2 -o " + (w / "q.gprt")).status == 2);
    CHECK(lab("pack " + (w / "theta.csv") + " --seed 1 --N 10 --d 2 -o " + (w / "q.gprt")).status == 2);
    CHECK(lab("pack " + (w / "theta.csv") + " --seed 1 --N 2 --d 3 -o " + (w / "q.gprt")).status == 2);
}
