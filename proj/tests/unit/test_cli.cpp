// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "helpers.hpp"
#include "saeaudit/digest.hpp"
#include "saeaudit/io.hpp"

using namespace saeaudit;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SAEAUDIT_FIXTURES;

struct Run {
    int code = -1;
    std::string err;
};

Run cli(const std::string& args, const fs::path& scratch) {
    const auto err = scratch / "stderr.txt";
    const std::string cmd = std::string("\"") + SAEAUDIT_CLI + "\" " + args + " 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = fs::exists(err) ? read_text_file(err) : "";
    return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(read_text_file(dir / "manifest.json")); }

// Shared small pipeline: corpus and model from the planted fixture, and a
// briefly trained SAE.
struct Pipeline {
    test::TempDir root{"cli"};
    fs::path corpus = root / "corpus", model = root / "model", sae = root / "sae";

    Pipeline() {
        const auto fx = kFixtures / "planted_bias";
        REQUIRE(cli("gen-corpus --config " + q(fx / "corpus.json") + " --seed 1 --out-dir " + q(corpus), root.path()).code ==
                0);
        REQUIRE(cli("build-model --config " + q(fx / "model.json") + " --seed 2 --corpus " + q(corpus / "corpus.jsonl") +
                        " --out-dir " + q(model),
                    root.path())
                    .code == 0);
        REQUIRE(cli("train-sae --config " + q(fx / "sae.json") + " --seed 3 --set steps=300 --model " +
                        q(model / "model.bin") + " --corpus " + q(corpus / "train.jsonl") + " --out-dir " + q(sae),
                    root.path())
                    .code == 0);
    }

    std::string inputs() const {
        return "--corpus " + q(corpus / "corpus.jsonl") + " --model " + q(model / "model.bin") + " --sae " +
               q(sae / "sae.bin");
    }
};

}  // namespace

TEST_CASE("gen-corpus writes its outputs and a manifest") {
    test::TempDir tmp("cli-gen");
    const auto out = tmp / "out";
    const auto r = cli("gen-corpus --config " + q(kFixtures / "planted_bias" / "corpus.json") + " --seed 5 --out-dir " +
                           q(out),
                       tmp.path());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const char* f : {"corpus.jsonl", "train.jsonl", "test.jsonl", "manifest.json"}) CHECK(fs::exists(out / f));
    const auto m = manifest(out);
    CHECK(m["command"] == "gen-corpus");
    CHECK(m["seeds"]["base"] == 5);
    CHECK(m["seeds"]["corpus"] == 5);
    CHECK(m["config"]["n_docs"] == 400);
    CHECK(m["config"]["seed"] == 5);
    CHECK(m["config_digest"] == sha256_hex(m["config"].dump()));
    CHECK(m["inputs"].empty());
    REQUIRE(m["outputs"].size() == 3);
    for (const auto& o : m["outputs"]) CHECK(o["sha256"] == sha256_file(out / o["file"].get<std::string>()));
    CHECK(m["started_at"].is_null());
    CHECK(m["flags"].empty());
}

TEST_CASE("timestamps come from SOURCE_DATE_EPOCH") {
    test::TempDir tmp("cli-epoch");
    const auto r = cli("gen-corpus --set n_docs=20 --out-dir " + q(tmp / "out"), tmp.path());
    REQUIRE(r.code == 0);
    ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
    const auto r2 = cli("gen-corpus --set n_docs=20 --out-dir " + q(tmp / "out2"), tmp.path());
    ::unsetenv("SOURCE_DATE_EPOCH");
    REQUIRE(r2.code == 0);
    CHECK(manifest(tmp / "out2")["started_at"] == "1970-01-02T00:00:00Z");
    CHECK(read_text_file(tmp / "out" / "corpus.jsonl") == read_text_file(tmp / "out2" / "corpus.jsonl"));
}

TEST_CASE("invalid configurations fail without leaving files") {
    test::TempDir tmp("cli-bad");
    const auto out = tmp / "out";
    SUBCASE("unreachable correlation") {
        const auto r = cli("gen-corpus --set correlation=0.99 --set condition_rate=0.05 --out-dir " + q(out), tmp.path());
        CHECK(r.code == 1);
        CHECK(r.err.find("correlation") != std::string::npos);
    }
    SUBCASE("unknown key") {
        const auto r = cli("gen-corpus --set n_dcos=10 --out-dir " + q(out), tmp.path());
        CHECK(r.code == 1);
        CHECK(r.err.find("n_dcos") != std::string::npos);
    }
    SUBCASE("wrong type") {
        const auto r = cli("gen-corpus --set n_docs=many --out-dir " + q(out), tmp.path());
        CHECK(r.code == 1);
    }
    SUBCASE("missing input") {
        const auto r = cli("build-model --corpus " + q(tmp / "nope.jsonl") + " --out-dir " + q(out), tmp.path());
        CHECK(r.code == 1);
        CHECK(r.err.find("does not exist") != std::string::npos);
    }
    SUBCASE("missing config file") {
        const auto r = cli("gen-corpus --config " + q(tmp / "absent.json") + " --out-dir " + q(out), tmp.path());
        CHECK(r.code == 1);
    }
    CHECK(!fs::exists(out));
}

TEST_CASE("a failing run leaves a pre-existing output directory as it was") {
    test::TempDir tmp("cli-keep");
    const auto out = tmp / "out";
    fs::create_directories(out);
    write_text_file(out / "mine.txt", "keep me");
    const auto r = cli("gen-corpus --set n_docs=0 --out-dir " + q(out), tmp.path());
    CHECK(r.code == 1);
    CHECK(fs::exists(out / "mine.txt"));
    CHECK(!fs::exists(out / "corpus.jsonl"));
    CHECK(!fs::exists(out / "manifest.json"));
}

TEST_CASE("usage errors") {
    test::TempDir tmp("cli-usage");
    CHECK(cli("", tmp.path()).code != 0);
    CHECK(cli("frobnicate --out-dir x", tmp.path()).code != 0);
    CHECK(cli("gen-corpus", tmp.path()).code != 0);
    CHECK(cli("gen-corpus --precision fp16 --out-dir " + q(tmp / "o"), tmp.path()).code != 0);
    CHECK(cli("--version", tmp.path()).code == 0);
}

TEST_CASE("downstream commands chain manifests and honour --strict") {
    Pipeline p;
    const auto m = manifest(p.sae);
    REQUIRE(m["inputs"].size() == 2);
    CHECK(m["inputs"][0]["manifest_sha256"] == sha256_file(p.model / "manifest.json"));
    CHECK(m["inputs"][1]["manifest_sha256"] == sha256_file(p.corpus / "manifest.json"));
    CHECK(m["config"]["steps"] == 300);
    CHECK(m["config"]["precision"] == "fp64");

    const auto fx = kFixtures / "planted_bias";
    const auto audit_dir = p.root / "audit";
    const auto base = "audit --config " + q(fx / "audit.json") + " --seed 4 " + p.inputs();
    auto r = cli(base + " --set n_pairs=1 --set generation_samples=0 --out-dir " + q(audit_dir), p.root.path());
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(r.err.find("flag") != std::string::npos);
    CHECK(!manifest(audit_dir)["flags"].empty());

    r = cli(base + " --set n_pairs=1 --set generation_samples=0 --strict --out-dir " + q(p.root / "audit-strict"),
            p.root.path());
    CHECK(r.code == 3);
    CHECK(fs::exists(p.root / "audit-strict" / "report.json"));

    r = cli(base + " --set n_pairs=6 --set generation_samples=0 --strict --out-dir " + q(p.root / "audit-ok"),
            p.root.path());
    CHECK_MESSAGE(r.code == 0, r.err);
    for (const char* f : {"report.json", "pairs.csv", "effects.csv", "fldd.csv", "delta_chart.svg", "manifest.json"})
        CHECK(fs::exists(p.root / "audit-ok" / f));

    r = cli("effect --set 'latents=[999]' " + p.inputs() + " --out-dir " + q(p.root / "effect-bad"), p.root.path());
    CHECK(r.code == 1);
    CHECK(!fs::exists(p.root / "effect-bad"));

    r = cli("ablate --set 'latents=[0]' --set hook=0.pre " + p.inputs() + " --out-dir " + q(p.root / "ablate-bad"),
            p.root.path());
    CHECK(r.code == 1);
    CHECK(r.err.find("trained at") != std::string::npos);
}

TEST_CASE("jobs and precision options") {
    Pipeline p;
    const auto args = "effect --set n_prompts=3 --set 'latents=[0,1,2,3]' " + p.inputs();
    REQUIRE(cli(args + " --jobs 1 --out-dir " + q(p.root / "e1"), p.root.path()).code == 0);
    REQUIRE(cli(args + " --jobs 3 --out-dir " + q(p.root / "e3"), p.root.path()).code == 0);
    CHECK(read_text_file(p.root / "e1" / "effects.csv") == read_text_file(p.root / "e3" / "effects.csv"));
    CHECK(read_text_file(p.root / "e1" / "manifest.json") == read_text_file(p.root / "e3" / "manifest.json"));

    REQUIRE(cli(args + " --precision fp32 --out-dir " + q(p.root / "e32"), p.root.path()).code == 0);
    CHECK(manifest(p.root / "e32")["config"]["precision"] == "fp32");
}
