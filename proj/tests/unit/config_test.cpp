#include <gtest/gtest.h>

#include <string>

#include "simlearn/errors.hpp"
#include "simlearn/experiment.hpp"

using namespace simlearn;

namespace {

const char* kMinimal = R"(version: 1
name: t
seeds: [3, 4]
dataset:
  synthetic:
    k: 3
    m: 5
modes:
  - baseline
  - dropout: 0.25
  - sl: [0.2, 0.9]
  - sl
training:
  lambda: 0.6
  batch_size: 8
)";

ConfigError parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return ConfigError("", 0, "");
}

}  // namespace

TEST(Config, ParsesModesAndDefaults) {
  const auto cfg = parse_config(kMinimal);
  EXPECT_EQ(cfg.name, "t");
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(cfg.dataset.synth.k, 3u);
  EXPECT_EQ(cfg.dataset.synth.m, 5u);
  EXPECT_EQ(cfg.train.batch_size, 8u);
  ASSERT_EQ(cfg.modes.size(), 4u);
  EXPECT_EQ(cfg.modes[0].kind, TrainMode::Baseline);
  EXPECT_EQ(cfg.modes[1].kind, TrainMode::Dropout);
  EXPECT_EQ(cfg.modes[1].dropout, 0.25);
  EXPECT_EQ(cfg.modes[2].lambdas, (std::vector<double>{0.2, 0.9}));
  EXPECT_EQ(cfg.modes[3].lambdas, (std::vector<double>{0.6}));  // bare "sl" uses training.lambda
  EXPECT_EQ(cfg.modes[0].label(), "baseline");
  EXPECT_EQ(cfg.modes[2].label(), "sl");
}

TEST(Config, NoModesMeansBaseline) {
  const auto cfg = parse_config("version: 1\n");
  ASSERT_EQ(cfg.modes.size(), 1u);
  EXPECT_EQ(cfg.modes[0].kind, TrainMode::Baseline);
}

TEST(Config, UnknownKeyReportsFieldAndLine) {
  const auto e = parse_error("version: 1\ntraining:\n  epochs: 3\n  learnign_rate: 0.1\n");
  EXPECT_EQ(e.field(), "training.learnign_rate");
  EXPECT_EQ(e.line(), 4u);
  EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
}

TEST(Config, BadValuesReportField) {
  EXPECT_EQ(parse_error("version: 1\ntraining:\n  batch_size: 7\n").field(), "training.batch_size");
  EXPECT_EQ(parse_error("version: 1\ntraining:\n  lambda: 1.5\n").field(), "training.lambda");
  EXPECT_EQ(parse_error("version: 1\ntraining:\n  epochs: two\n").field(), "training.epochs");
  EXPECT_EQ(parse_error("version: 1\ntraining:\n  optimizer: adam\n").field(), "training.optimizer");
  EXPECT_EQ(parse_error("version: 1\nmodes:\n  - dropout: 1.0\n").field(), "modes[0].dropout");
  EXPECT_EQ(parse_error("version: 1\nmodes:\n  - sl: [0.5, -0.1]\n").line(), 3u);
  EXPECT_EQ(parse_error("version: 1\nmodes:\n  - adversarial\n").field(), "modes[0]");
  EXPECT_EQ(parse_error("version: 1\nseeds: []\n").field(), "seeds");
  EXPECT_EQ(parse_error("version: 1\nworkers: 0\n").field(), "workers");
  EXPECT_EQ(parse_error("version: 1\ndataset:\n  source: directory\n").field(), "dataset.directory");
}

TEST(Config, VersionIsRequiredAndChecked) {
  EXPECT_EQ(parse_error("name: x\n").field(), "version");
  const auto e = parse_error("version: 2\n");
  EXPECT_EQ(e.field(), "version");
  EXPECT_EQ(e.line(), 1u);
}

TEST(Config, SyntaxErrorHasLine) {
  const auto e = parse_error("version: 1\nseeds: [1, 2\nname: x\n");
  EXPECT_GT(e.line(), 1u);
}

TEST(Config, ValidateCatchesOverrides) {
  auto cfg = parse_config(kMinimal);
  EXPECT_NO_THROW(cfg.validate());
  cfg.reduce = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.reduce = 0.5;
  cfg.seeds.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, LoadMissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/simlearn.yaml"), IoError);
}
