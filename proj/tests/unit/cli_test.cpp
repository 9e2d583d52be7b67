#include <json.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace
{

namespace fs = std::filesystem;

int run(const std::string & args)
{
  const std::string cmd = std::string(EPM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() / ("epm-cli-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string & name, const std::string & text)
  {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

const std::string kCorpus = std::string(EPM_DATA_DIR) + "/surveillance.rules";

}  // namespace

TEST_F(Cli, CheckCorpus) { EXPECT_EQ(run("check " + kCorpus), 0); }

TEST_F(Cli, CheckBrokenRuleFile)
{
  const auto p = write("bad.rules", "# type: X\nselect * from pattern [every (a = Event(x(\"1\"))] where\n");
  EXPECT_EQ(run("check " + p.string()), 2);
  EXPECT_EQ(run("check " + (dir_ / "missing.rules").string()), 2);
}

TEST_F(Cli, UsageErrors)
{
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("check"), 1);
  EXPECT_EQ(run("bench --reps 0"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, RunMatchesOracle)
{
  const auto spec = write("s.spec", "seed = 3\nduration_s = 30\nnoise_rate = 40\nround_robin_groups = 10\n"
                                    "noise_vocabulary = adversarial\n");
  const auto stream = dir_ / "s.stream";
  const auto manifest = dir_ / "s.manifest";
  ASSERT_EQ(run("gen " + spec.string() + " -o " + stream.string() + " -m " + manifest.string()), 0);
  ASSERT_EQ(run("run " + stream.string() + " --fingerprints " + (dir_ / "run.fp").string() + " --manifest " +
                manifest.string() + " -o " + (dir_ / "report.json").string()),
            0);
  ASSERT_EQ(run("oracle " + stream.string() + " -o " + (dir_ / "oracle.fp").string()), 0);
  const auto fp = slurp(dir_ / "run.fp");
  EXPECT_FALSE(fp.empty());
  EXPECT_EQ(fp, slurp(dir_ / "oracle.fp"));
  EXPECT_EQ(fp, slurp(manifest));

  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_EQ(report["precision"], 1.0);
  EXPECT_EQ(report["recall"], 1.0);
  EXPECT_EQ(report["conserved"], true);
  EXPECT_EQ(report["accepted_inputs"], report["engine_ingested"]);

  // Same inputs, same detections.
  ASSERT_EQ(run("run " + stream.string() + " --fingerprints " + (dir_ / "again.fp").string() + " -o " +
                (dir_ / "again.json").string()),
            0);
  EXPECT_EQ(slurp(dir_ / "again.fp"), fp);
}

TEST_F(Cli, GenIsDeterministicAndSeedable)
{
  const auto spec = write("s.spec", "duration_s = 10\nnoise_rate = 20\nround_robin_groups = 5\n");
  ASSERT_EQ(run("gen " + spec.string() + " -o " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("gen " + spec.string() + " -o " + (dir_ / "b").string()), 0);
  ASSERT_EQ(run("gen --seed 77 " + spec.string() + " -o " + (dir_ / "c").string()), 0);
  EXPECT_EQ(slurp(dir_ / "a"), slurp(dir_ / "b"));
  EXPECT_NE(slurp(dir_ / "a"), slurp(dir_ / "c"));
  EXPECT_EQ(run("gen " + write("bad.spec", "group = nope 1\n").string()), 2);
}

TEST_F(Cli, TrustAndTauControlSecureEvents)
{
  const auto spec = write("s.spec", "duration_s = 10\nround_robin_groups = 5\n");
  const auto stream = dir_ / "s.stream";
  ASSERT_EQ(run("gen " + spec.string() + " -o " + stream.string()), 0);
  ASSERT_EQ(run("run " + stream.string() + " --tau 0.9 -o " + (dir_ / "strict.json").string()), 0);
  const auto strict = nlohmann::json::parse(slurp(dir_ / "strict.json"));
  EXPECT_EQ(strict["secure_events"], 0);
  EXPECT_EQ(strict["trust_rejections"], strict["complex_events"]);

  const auto trust = write("trust.cfg", "* 1.0\n");
  ASSERT_EQ(run("run " + stream.string() + " --tau 0.9 --trust " + trust.string() + " -o " +
                (dir_ / "trusted.json").string() + " --secure " + (dir_ / "secure.out").string()),
            0);
  const auto trusted = nlohmann::json::parse(slurp(dir_ / "trusted.json"));
  EXPECT_EQ(trusted["secure_events"], trusted["complex_events"]);
  EXPECT_NE(slurp(dir_ / "secure.out").find("kind=secure"), std::string::npos);
  EXPECT_EQ(run("run " + stream.string() + " --tau 2"), 2);
}

TEST_F(Cli, RunReportsSyntacticRejections)
{
  const auto stream = write("s.stream",
                            "id=a\ttype=ObjectRecognition\tts_ms=1700000000000\tlat=123\tlon=10\tsource=s\tattrs=\ttext=\n"
                            "id=b\ttype=ObjectRecognition\tts_ms=1700000000000\tlat=43\tlon=10\tsource=s\tattrs=\ttext=\n");
  ASSERT_EQ(run("run " + stream.string() + " -o " + (dir_ / "r.json").string()), 0);
  const auto report = nlohmann::json::parse(slurp(dir_ / "r.json"));
  EXPECT_EQ(report["syntactic_rejections"], 1);
  EXPECT_EQ(report["rejections"][0]["reason"], "lat out of range");
  EXPECT_EQ(run("run " + write("junk", "not a record\n").string()), 2);
}

TEST_F(Cli, BenchWithOneRate)
{
  const auto rules = write("quick.rules",
                           "# id: quick\n# type: Quick\nselect * from pattern [every (a = Event(object(\"bar\")) and "
                           "b = Event(audio(\"money\"))) where timer:within(1 min)] where (a.timeDiff(b) < 0.2)\n");
  const auto csv = dir_ / "bench.csv";
  ASSERT_EQ(run("bench --rates 10 --reps 1 --duration 1 --groups 2 --rules " + rules.string() + " -o " + csv.string()),
            0);
  const auto text = slurp(csv);
  EXPECT_EQ(text.substr(0, text.find('\n')), "noise_rate,mean_delay_ms,p99_delay_ms,recall");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.substr(text.rfind(',') + 1), "1\n");
}
