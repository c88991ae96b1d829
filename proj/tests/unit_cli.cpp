// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the gcodec binary (exit codes, config precedence,
// pipeline round trips). The binary path comes in via GCODEC_CLI_PATH.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcodec/codec.hpp"
#include "gcodec/dataset.hpp"
#include "gcodec/image.hpp"
#include "gcodec/metrics.hpp"

using namespace gcodec;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    auto p = fs::temp_directory_path() / "gcodec_cli_tests";
    fs::create_directories(p);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(GCODEC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

size_t count_lines(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    size_t n = 0;
    while (std::getline(is, line)) ++n;
    return n;
}

// shared tiny setup: a few 32x32 training images and a small codec
struct Fixture {
    fs::path dir = work_dir();
    fs::path data = dir / "data";
    fs::path cfg_path = dir / "tiny.json";
    fs::path ckpt = dir / "tiny.ckpt";

    Fixture() {
        fs::create_directories(data);
        for (int i = 0; i < 4; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "img_%02d.ppm", i);
            save_image(synthetic_image(40 + i, 32, 32), (data / name).string());
        }
        std::ofstream cfg(cfg_path);
        cfg << R"({"codec":{"base_channels":8,"latent_channels":12},)"
            << R"("train":{"lambda_set":[0.02],"steps":0,"batch_size":2,"seed":3}})";
        cfg.close();
        if (!fs::exists(ckpt)) {
            REQUIRE(run("--config " + cfg_path.string() + " train --data " + data.string() +
                        " --out " + ckpt.string()) == 0);
        }
    }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("train") == 2);  // --out missing
}

TEST_CASE("unknown config keys are rejected") {
    Fixture f;
    const auto bad = f.dir / "bad.json";
    std::ofstream os(bad);
    os << R"({"codec":{"base_channels":8,"bogus_knob":1}})";
    os.close();
    CHECK(run("--config " + bad.string() + " train --data " + f.data.string() + " --out " +
              (f.dir / "x.ckpt").string()) == 2);
    CHECK(run("--set nope.key=1 train --data " + f.data.string() + " --out " +
              (f.dir / "x.ckpt").string()) == 2);
}

TEST_CASE("data errors exit with 3") {
    Fixture f;
    CHECK(run("eval --checkpoint /nonexistent.ckpt --data " + f.data.string()) == 3);
    const auto empty = f.dir / "empty";
    fs::create_directories(empty);
    CHECK(run("eval --checkpoint " + f.ckpt.string() + " --data " + empty.string()) == 3);
}

TEST_CASE("train with zero steps reproduces the input checkpoint") {
    Fixture f;
    const auto out2 = f.dir / "copy.ckpt";
    REQUIRE(run("--config " + f.cfg_path.string() + " train --checkpoint " + f.ckpt.string() +
                " --data " + f.data.string() + " --steps 0 --out " + out2.string()) == 0);
    CHECK(slurp(f.ckpt) == slurp(out2));
}

TEST_CASE("bm_finetune without a pretrained checkpoint is a usage error") {
    Fixture f;
    CHECK(run("--config " + f.cfg_path.string() +
              " --set train.stage=bm_finetune --set train.lambda_set=[0.01,0.1] train --data " +
              f.data.string() + " --out " + (f.dir / "y.ckpt").string()) == 2);
}

TEST_CASE("config precedence: flag > --set > config file") {
    Fixture f;
    const auto cfg5 = f.dir / "steps5.json";
    std::ofstream os(cfg5);
    os << R"({"codec":{"base_channels":8,"latent_channels":12},)"
       << R"("train":{"lambda_set":[0.02],"steps":5,"batch_size":2,"seed":3}})";
    os.close();

    struct Case {
        std::string extra;
        size_t expect;
    };
    const Case cases[] = {
        {"", 5},                                  // config file value
        {"--set train.steps=3", 3},               // --set beats the file
    };
    for (const auto& c : cases) {
        const auto out = f.dir / "prec.ckpt";
        const auto log = f.dir / "prec.ckpt.log.jsonl";
        fs::remove(log);
        REQUIRE(run("--config " + cfg5.string() + " " + c.extra + " train --data " +
                    f.data.string() + " --out " + out.string()) == 0);
        CHECK(count_lines(log) == c.expect);
    }
    // explicit flag beats both
    const auto out = f.dir / "prec.ckpt";
    const auto log = f.dir / "prec.ckpt.log.jsonl";
    fs::remove(log);
    REQUIRE(run("--config " + cfg5.string() + " --set train.steps=3 train --steps 2 --data " +
                f.data.string() + " --out " + out.string()) == 0);
    CHECK(count_lines(log) == 2);
}

TEST_CASE("eval writes one CSV row per (image, lambda) and parses back") {
    Fixture f;
    const auto csv_path = f.dir / "sweep.csv";
    REQUIRE(run("eval --checkpoint " + f.ckpt.string() + " --data " + f.data.string() +
                " --lambda-grid 0.005 0.02 0.08 --out " + csv_path.string()) == 0);
    auto rows = rd_records_from_csv(slurp(csv_path));
    CHECK(rows.size() == 4 * 3);
    for (const auto& r : rows) {
        CHECK(r.bpp > 0.0);
        CHECK(std::isfinite(r.psnr_db));
    }
}

TEST_CASE("compress/decompress round trip on a non-multiple-of-16 image") {
    Fixture f;
    const auto img_path = f.dir / "odd.png";
    save_image(synthetic_image(99, 47, 70), img_path.string());
    const auto bin = f.dir / "odd.gcv";  // arbitrary extension is fine
    const auto out_png = f.dir / "odd_rec.png";
    REQUIRE(run("compress --checkpoint " + f.ckpt.string() + " " + img_path.string() +
                " --lambda 0.02 --out " + bin.string()) == 0);
    REQUIRE(run("decompress --checkpoint " + f.ckpt.string() + " " + bin.string() + " --out " +
                out_png.string() + " --original " + img_path.string()) == 0);
    Tensor rec = load_image(out_png.string());
    CHECK(rec.h() == 47);
    CHECK(rec.w() == 70);

    // wrong model: exit code 4, distinct from I/O errors
    const auto other = f.dir / "other.ckpt";
    REQUIRE(run("--config " + f.cfg_path.string() + " --set train.seed=11 train --data " +
                f.data.string() + " --out " + other.string()) == 0);
    CHECK(run("decompress --checkpoint " + other.string() + " " + bin.string() + " --out " +
              out_png.string()) == 4);
}

TEST_CASE("profile prints the 14-layer ledger") {
    Fixture f;
    const auto table_path = f.dir / "ledger.txt";
    REQUIRE(run("profile --checkpoint " + f.ckpt.string() + " --data " + f.data.string() +
                " --out " + table_path.string()) == 0);
    const std::string table = slurp(table_path);
    for (const char* name : {"enc0", "enc3", "henc2", "hdec1", "dec3"})
        CHECK(table.find(name) != std::string::npos);
    CHECK(table.find("reduction") != std::string::npos);
    // ungated checkpoint reports 1.0x
    CHECK(table.find("reduction 1.000x") != std::string::npos);
}

TEST_CASE("GCODEC_DATA_DIR is the dataset fallback") {
    Fixture f;
    setenv("GCODEC_DATA_DIR", f.data.string().c_str(), 1);
    const auto csv_path = f.dir / "envsweep.csv";
    CHECK(run("eval --checkpoint " + f.ckpt.string() + " --lambda 0.02 --out " +
              csv_path.string()) == 0);
    unsetenv("GCODEC_DATA_DIR");
    CHECK(rd_records_from_csv(slurp(csv_path)).size() == 4);
}

TEST_CASE("ingest command tiles into a patch store") {
    Fixture f;
    const auto src = f.dir / "ingest_src";
    fs::create_directories(src);
    save_image(synthetic_image(123, 128, 128), (src / "big.ppm").string());
    const auto store = f.dir / "store";
    REQUIRE(run("ingest --data " + src.string() + " --out " + store.string() +
                " --patch 64 --scales 1,2") == 0);
    DirectoryPatches patches(store.string());
    CHECK(patches.size() == 4 + 1);
}
