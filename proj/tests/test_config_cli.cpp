#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vmms/cli.hpp"
#include "vmms/config.hpp"

using namespace vmms;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name)
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string slurp(const std::string& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "vmms");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), {out, err});
    return {code, out.str(), err.str()};
}

int run_binary(const std::string& args)
{
    const int status = std::system((std::string(VMMS_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, EmitParseRoundTrip)
{
    RunConfig c;
    c.train.gamma = 0.95;
    c.train.seed = 12345678901234ull;
    c.train.lr_actor = 3.3e-5;
    c.ablation = rl::Ablation::no_asymmetry;
    c.generator.object_counts = {5, 7};
    c.rollout.observe.grid = 24;
    c.heaps_path = "a b/heaps.json";
    const auto text = emit_config(c);
    const auto back = parse_config(text);
    EXPECT_EQ(emit_config(back), text);
    EXPECT_EQ(back.train.gamma, 0.95);
    EXPECT_EQ(back.train.seed, 12345678901234ull);
    EXPECT_EQ(back.train.lr_actor, 3.3e-5);
    EXPECT_EQ(back.ablation, rl::Ablation::no_asymmetry);
    EXPECT_EQ(back.generator.object_counts, (std::vector<int>{5, 7}));
    EXPECT_EQ(back.heaps_path, "a b/heaps.json");
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, HashTracksContent)
{
    RunConfig a, b;
    b.train.tau = 0.01;
    EXPECT_NE(config_hash(a), config_hash(b));
    b = a;
    b.run_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, CommentsAndSections)
{
    const auto c = parse_config("# top\n[train]\ngamma = 0.9   # trailing\n\n[world]\nmax_steps = 30\n");
    EXPECT_EQ(c.train.gamma, 0.9);
    EXPECT_EQ(c.rollout.world.max_steps, 30);
}

TEST(Config, RejectsUnknownKeyAndBadValue)
{
    try {
        parse_config("[train]\ngama = 0.9\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("unknown config key"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config("[train]\ngamma = fast\n"), Error);
    EXPECT_THROW(parse_config("gamma = 0.9\n"), Error);
    RunConfig c;
    EXPECT_THROW(set_config_value(c, "train.nope", "1"), Error);
}

TEST(Cli, UsageErrors)
{
    TempDir d("vmms_cli_usage");
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"bogus"}).code, 2);
    EXPECT_EQ(run_cli({"gen-heaps", "--count", "0", "--out", d / "h.json"}).code, 2);
    EXPECT_EQ(run_cli({"eval", "--policy", "greedy", "--heaps", d / "h.json"}).code, 2);
    EXPECT_EQ(run_cli({"train", "--heaps", d / "h.json"}).code, 2); // no run directory
}

TEST(Cli, DataErrors)
{
    TempDir d("vmms_cli_data");
    EXPECT_EQ(run_cli({"eval", "--policy", "random", "--heaps", d / "missing.json"}).code, 3);
    EXPECT_EQ(run_cli({"rollout", "--policy", "actor:" + (d / "missing.json"), "--heaps", d / "h.json"}).code, 3);
    std::ofstream(d / "bad.toml") << "[train]\nwhatever = 1\n";
    EXPECT_EQ(run_cli({"gen-heaps", "--config", d / "bad.toml", "--out", d / "h.json"}).code, 3);
}

TEST(Cli, GenHeapsIsDeterministic)
{
    TempDir d("vmms_cli_gen");
    const auto a = run_cli({"gen-heaps", "--count", "6", "--seed", "3", "--out", d / "a.json"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_NE(a.out.find("acceptance rate"), std::string::npos);
    ASSERT_EQ(run_cli({"gen-heaps", "--count", "6", "--seed", "3", "--jobs", "3", "--out", d / "b.json"}).code, 0);
    EXPECT_EQ(slurp(d / "a.json"), slurp(d / "b.json"));
    EXPECT_EQ(load_dataset(d / "a.json").heaps.size(), 6u);
}

TEST(Cli, SeedFromEnvironmentAndOverride)
{
    TempDir d("vmms_cli_env");
    ::setenv("VMMS_SEED", "3", 1);
    ASSERT_EQ(run_cli({"gen-heaps", "--count", "4", "--out", d / "env.json"}).code, 0);
    ::unsetenv("VMMS_SEED");
    ASSERT_EQ(run_cli({"gen-heaps", "--count", "4", "--set", "generator.seed=3", "--out", d / "set.json"}).code, 0);
    ASSERT_EQ(run_cli({"gen-heaps", "--count", "4", "--seed", "4", "--out", d / "other.json"}).code, 0);
    EXPECT_EQ(slurp(d / "env.json"), slurp(d / "set.json"));
    EXPECT_NE(slurp(d / "env.json"), slurp(d / "other.json"));
}

TEST(Cli, RolloutTraceAndEval)
{
    TempDir d("vmms_cli_rollout");
    ASSERT_EQ(run_cli({"gen-heaps", "--count", "4", "--seed", "5", "--out", d / "h.json"}).code, 0);
    for (const char* name : {"t1.json", "t2.json"})
        ASSERT_EQ(run_cli({"rollout", "--policy", "teacher:spiral", "--heaps", d / "h.json", "--heap-id", "2", "--seed", "8",
                           "--trace", d / name})
                      .code,
                  0);
    EXPECT_EQ(slurp(d / "t1.json"), slurp(d / "t2.json"));
    const auto j = nlohmann::json::parse(slurp(d / "t1.json"));
    EXPECT_EQ(j["heap_id"], 2);
    EXPECT_EQ(j["policy"], "teacher:spiral");
    EXPECT_TRUE(j["graspability"].contains("initial"));
    EXPECT_EQ(run_cli({"rollout", "--policy", "random", "--heaps", d / "h.json", "--heap-id", "9"}).code, 3);

    const auto ev = run_cli({"eval", "--policy", "random", "--heaps", d / "h.json", "--split", "all", "--csv", d / "s.csv"});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const auto csv = slurp(d / "s.csv");
    EXPECT_EQ(csv.rfind(std::string(kMetricsHeader) + "\n0,", 0), 0u);
}

TEST(Cli, TrainEvalAndReport)
{
    TempDir d("vmms_cli_train");
    ASSERT_EQ(run_cli({"gen-heaps", "--count", "6", "--seed", "5", "--out", d / "h.json"}).code, 0);
    std::ofstream(d / "small.toml") << "[train]\nhidden = 16\nhead_width = 8\nconv1 = 4\nconv2 = 4\nconv3 = 4\n"
                                       "batch = 4\nensemble = 2\nwarmup_steps = 10\neval_every = 10\n"
                                       "[observe]\ngrid = 16\n";
    const auto t = run_cli({"train", "--config", d / "small.toml", "--heaps", d / "h.json", "--out", d / "runs",
                            "--seeds", "2", "--max-env-steps", "20", "--quiet"});
    ASSERT_EQ(t.code, 0) << t.err;
    for (const char* s : {"seed_0", "seed_1"}) {
        const fs::path run = d.path / "runs" / s;
        EXPECT_TRUE(fs::exists(run / "metrics.csv"));
        EXPECT_TRUE(fs::exists(run / "checkpoints" / "final.json"));
        const auto hash = slurp((run / "config.hash").string());
        EXPECT_EQ(hash, config_hash(parse_config(slurp((run / "config.toml").string()))) + "\n");
    }
    const auto ck = (d.path / "runs" / "seed_1" / "checkpoints" / "final.json").string();
    const auto ev = run_cli({"eval", "--config", d / "small.toml", "--policy", "actor:" + ck, "--heaps", d / "h.json"});
    EXPECT_EQ(ev.code, 0) << ev.err;

    // The checkpoint's architecture must match the configured one.
    const auto bad = run_cli({"eval", "--config", d / "small.toml", "--set", "train.hidden=20", "--policy", "actor:" + ck,
                              "--heaps", d / "h.json"});
    EXPECT_EQ(bad.code, 3);
    EXPECT_NE(bad.err.find("architecture mismatch"), std::string::npos) << bad.err;

    const auto rep = run_cli({"report", (d.path / "runs").string()});
    ASSERT_EQ(rep.code, 0) << rep.err;
    std::istringstream lines(rep.out);
    std::string header, row;
    std::getline(lines, header);
    EXPECT_EQ(header.rfind("step,runs,mean_reward_mean,mean_reward_sd", 0), 0u);
    int rows = 0;
    while (std::getline(lines, row)) {
        EXPECT_NE(row.find(",2,"), std::string::npos);
        ++rows;
    }
    EXPECT_EQ(rows, 3); // steps 0, 10, 20
}

TEST(Cli, BinaryExitCodes)
{
    TempDir d("vmms_cli_bin");
    EXPECT_EQ(run_binary("--help"), 0);
    EXPECT_EQ(run_binary("gen-heaps --count 0 --out " + (d / "h.json")), 2);
    EXPECT_EQ(run_binary("eval --policy random --heaps " + (d / "none.json")), 3);
}
