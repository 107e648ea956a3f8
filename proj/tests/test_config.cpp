#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "liteatt/config.hpp"
#include "liteatt/error.hpp"

using namespace liteatt;

namespace {

std::string config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsValidate) {
  const ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.effective_used_bytes(), cfg.layout.data_section_len);
  EXPECT_EQ(cfg.feature_count(), cfg.layout.data_section_len / cfg.block_width);
}

TEST(Config, EveryKeyRoundTripsThroughCanonicalText) {
  const auto& keys = config_keys();
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
  ExperimentConfig a;
  a.seed = 42;
  a.train.learning_rate = 3e-4;
  a.severities = {0.1, 0.7};
  a.arch = Arch::M2;
  ExperimentConfig b;
  apply_config_text(b, a.canonical());
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.digest(), b.digest());
}

TEST(Config, SetAndApplyText) {
  ExperimentConfig cfg;
  set_config_value(cfg, "train.epochs", " 7 ");
  set_config_value(cfg, "generator.severities", "0.5, 1");
  set_config_value(cfg, "generator.mutations", "tamper_data");
  set_config_value(cfg, "model.arch", "M3");
  EXPECT_EQ(cfg.train.epochs, 7u);
  EXPECT_EQ(cfg.severities, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(cfg.mutations, (std::vector<MutationKind>{MutationKind::tamper_data}));
  EXPECT_EQ(cfg.arch, Arch::M3);

  apply_config_text(cfg, "# comment\n\nseed = 9  # trailing\nfeatures.block_width=8\n");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.block_width, 8u);
}

TEST(Config, ErrorsNameTheKeyOrLine) {
  ExperimentConfig cfg;
  EXPECT_NE(config_error([&] { set_config_value(cfg, "no.such", "1"); }).find("no.such"), std::string::npos);
  EXPECT_NE(config_error([&] { set_config_value(cfg, "train.epochs", "ten"); }).find("train.epochs"),
            std::string::npos);
  EXPECT_NE(config_error([&] { set_config_value(cfg, "model.arch", "M9"); }).find("model.arch"), std::string::npos);
  EXPECT_NE(config_error([&] { set_config_value(cfg, "generator.mutations", "melt"); }).find("melt"),
            std::string::npos);
  EXPECT_NE(config_error([&] { apply_config_text(cfg, "seed = 1\nbroken\n"); }).find("line 2"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/config.txt"), ConfigError);
}

TEST(Config, ValidationMessages) {
  auto fails_on = [](const std::string& key, auto mutate) {
    ExperimentConfig cfg;
    mutate(cfg);
    const auto msg = config_error([&] { cfg.validate(); });
    EXPECT_EQ(msg.rfind(key, 0), 0u) << "got '" << msg << "' for " << key;
  };
  fails_on("generator.safe_traces", [](ExperimentConfig& c) { c.safe_traces = 5; });
  fails_on("features.used_bytes", [](ExperimentConfig& c) { c.used_bytes = c.layout.data_section_len + 4; });
  fails_on("features.used_bytes", [](ExperimentConfig& c) { c.used_bytes = 18; });
  fails_on("model.arch", [](ExperimentConfig& c) {
    c.arch = Arch::M3;
    c.used_bytes = 24;
  });
  fails_on("split", [](ExperimentConfig& c) { c.split.train = 0.9; });
  fails_on("generator.twin_device_seed", [](ExperimentConfig& c) { c.twin_device_seed = c.device_seed; });
  fails_on("train.beta1", [](ExperimentConfig& c) { c.train.beta1 = 1.0; });
  fails_on("attest.epsilon_ms", [](ExperimentConfig& c) { c.epsilon_ms = 0; });
  fails_on("generator.severities", [](ExperimentConfig& c) { c.severities = {1.5}; });
}

TEST(Config, DigestIgnoresOutputAndThreads) {
  ExperimentConfig a, b;
  b.out = "/elsewhere";
  b.threads = 8;
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
  b.seed = 2;
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.canonical().find("threads"), std::string::npos);
  EXPECT_EQ(a.stamp().config_digest, a.digest());
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "liteatt_config_test.cfg";
  {
    std::ofstream out(path);
    out << "seed = 77\ntrain.epochs = 3\n";
  }
  const auto cfg = load_config(path.string());
  EXPECT_EQ(cfg.seed, 77u);
  EXPECT_EQ(cfg.train.epochs, 3u);
  EXPECT_EQ(load_config("default").digest(), ExperimentConfig{}.digest());
  std::filesystem::remove(path);
}

TEST(Seeds, DerivedStreamsAreStableAndDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s)
    for (std::uint64_t k = 0; k < 50; ++k) EXPECT_TRUE(seen.insert(derive_seed(s, k)).second);
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
}
