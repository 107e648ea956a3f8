#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(LITEATT_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  for (std::size_t n; (n = fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() / ("liteatt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "small.cfg") << "generator.firmware_count = 2\n"
                                         "generator.variable_count = 8\n"
                                         "generator.data_section_len = 256\n"
                                         "generator.stack_len = 64\n"
                                         "generator.max_width = 24\n"
                                         "generator.safe_traces = 400\n"
                                         "generator.mutated_traces = 10\n"
                                         "train.epochs = 40\n"
                                         "train.batch_size = 32\n";
  }
  void TearDown() override { fs::remove_all(root); }

  std::string base(const std::string& out = "out") const {
    return "--config " + (root / "small.cfg").string() + " --out " + (root / out).string();
  }

  fs::path root;
};

}  // namespace

TEST_F(Cli, HelpOnEverySubcommand) {
  EXPECT_EQ(cli("--help").code, 0);
  for (const char* sub : {"gen", "train", "quantize", "calibrate", "attest", "handshake", "eval"}) {
    const auto r = cli(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli("--bogus").code, 2);
  EXPECT_EQ(cli("gen --traces notanumber").code, 2);
  EXPECT_EQ(cli(base() + " --set no.such=1 gen").code, 2);
  EXPECT_EQ(cli(base() + " --set generator.safe_traces=5 gen").code, 2);
  EXPECT_EQ(cli("--config /nonexistent.cfg gen").code, 2);
  EXPECT_EQ(cli(base() + " --firmware-index 9 train").code, 2);
  EXPECT_EQ(cli(base() + " quantize --model " + (root / "missing.lam1").string()).code, 3);
  EXPECT_EQ(cli(base() + " handshake --adversary " + (root / "missing.script").string()).code, 2);
  std::ofstream(root / "bad.script") << "explode 1\n";
  EXPECT_EQ(cli(base() + " handshake --adversary " + (root / "bad.script").string()).code, 2);
}

TEST_F(Cli, GenIsDeterministicAndStamped) {
  ASSERT_EQ(cli(base("a") + " gen").code, 0);
  ASSERT_EQ(cli(base("b") + " gen").code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(root / "a" / "gen")) {
    const auto other = root / "b" / "gen" / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 8u);
  const auto csv = slurp(root / "a" / "gen" / "fw0.safe.csv");
  EXPECT_EQ(csv.rfind("# config_digest=", 0), 0u);
  EXPECT_NE(csv.find(" seed=1\n"), std::string::npos);

  ASSERT_EQ(cli(base("c") + " --seed 2 gen").code, 0);
  EXPECT_NE(slurp(root / "a" / "gen" / "fw0.safe.csv"), slurp(root / "c" / "gen" / "fw0.safe.csv"));
}

TEST_F(Cli, PipelineAndHandshakeScripts) {
  ASSERT_EQ(cli(base() + " train").code, 0);
  ASSERT_EQ(cli(base() + " quantize").code, 0);
  const auto cal = cli(base() + " calibrate");
  ASSERT_EQ(cal.code, 0);
  EXPECT_NE(cal.out.find("tnr_target="), std::string::npos);
  const auto model = (root / "out" / "calibrate" / "fw0.q.lam1").string();
  ASSERT_TRUE(fs::exists(model));

  const auto att = cli(base() + " attest --model " + model + " --a-self 1");
  EXPECT_EQ(att.code, 0);
  EXPECT_NE(att.out.find("Completed"), std::string::npos) << att.out;
  const auto nosender = cli(base() + " attest --model " + model + " --no-sender");
  EXPECT_NE(nosender.out.find("AbortNoSenderId"), std::string::npos) << nosender.out;

  const fs::path scripts = LITEATT_SCRIPTS_DIR;
  for (const char* s : {"replay", "fabricate", "tamper", "expire"}) {
    const auto r = cli(base() + " handshake --model " + model + " --sessions 3 --adversary " +
                       (scripts / (std::string(s) + ".script")).string());
    EXPECT_EQ(r.code, 0) << s;
    EXPECT_NE(r.out.find("verdict no-win"), std::string::npos) << s << "\n" << r.out;
  }
  const auto transcript = slurp(root / "out" / "handshake" / "transcript.jsonl");
  EXPECT_EQ(transcript.rfind("{\"meta\":{\"config_digest\":", 0), 0u);
  EXPECT_NE(transcript.find("\"verdict\":\"rejected:report_expired\""), std::string::npos);

  // Nothing escapes the output root.
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    EXPECT_TRUE(rel == "small.cfg" || rel.rfind("out/", 0) == 0) << rel;
  }
}
