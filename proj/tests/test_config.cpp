#include <gtest/gtest.h>

#include "dsm/config.hpp"

using namespace dsm;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ConfigParse, SectionsCommentsAndWhitespace) {
  auto c = Config::from_string(
      "# leading comment\n"
      "seed = 3\n"
      "[noise]\n"
      "  mu = 0.81   ; trailing comment\n"
      "sigma=0.57\n"
      "\n"
      "[train]\n"
      "etas = 0.5, 0.1 ,0.05\n"
      "mode = sgd\n");
  EXPECT_EQ(c.get_uint("seed", 0), 3u);
  EXPECT_DOUBLE_EQ(c.get_double("noise.mu", 0.0), 0.81);
  EXPECT_DOUBLE_EQ(c.get_double("noise.sigma", 0.0), 0.57);
  EXPECT_EQ(c.get_doubles("train.etas", {}), (std::vector<double>{0.5, 0.1, 0.05}));
  EXPECT_EQ(c.get_string("train.mode", "gd"), "sgd");
  EXPECT_NO_THROW(c.reject_unknown());
}

TEST(ConfigParse, DefaultsAreRecorded) {
  auto c = Config::from_string("");
  EXPECT_EQ(c.get_uint("net.m", 1000), 1000u);
  EXPECT_TRUE(c.get_bool("flag", true));
  EXPECT_EQ(c.resolved().at("net.m"), "1000");
  EXPECT_EQ(c.resolved().at("flag"), "true");
}

TEST(ConfigParse, IntegersAcceptExponentForm) {
  auto c = Config::from_string("epochs = 1e6\nbad = 2.5\nneg = -1\n");
  EXPECT_EQ(c.get_uint("epochs", 0), 1000000u);
  EXPECT_THROW(c.get_uint("bad", 0), Error);
  EXPECT_THROW(c.get_uint("neg", 0), Error);
}

TEST(ConfigParse, BooleanSpellings) {
  auto c = Config::from_string("a = yes\nb = 0\nc = maybe\n");
  EXPECT_TRUE(c.get_bool("a", false));
  EXPECT_FALSE(c.get_bool("b", true));
  EXPECT_THROW(c.get_bool("c", true), Error);
}

TEST(ConfigErrors, MessagesCarryFileAndLine) {
  std::istringstream in("x = 1\n[s]\ny = abc\n");
  auto c = Config::parse(in, "run.cfg");
  const auto msg = message_of([&] { c.get_double("s.y", 0.0); });
  EXPECT_NE(msg.find("run.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("s.y"), std::string::npos) << msg;
}

TEST(ConfigErrors, MalformedLines) {
  EXPECT_NE(message_of([] { Config::from_string("a = 1\nnot a pair\n"); }).find(":2"), std::string::npos);
  EXPECT_THROW(Config::from_string("[open\n"), Error);
  EXPECT_THROW(Config::from_string("[]\n"), Error);
  EXPECT_THROW(Config::from_string(" = 3\n"), Error);
  EXPECT_NE(message_of([] { Config::from_string("a = 1\na = 2\n"); }).find("duplicate"), std::string::npos);
}

TEST(ConfigErrors, UnknownKeysAreReportedWithLocation) {
  auto c = Config::from_string("[train]\neta = 0.1\netta = 0.2\n");
  c.get_double("train.eta", 0.0);
  const auto msg = message_of([&] { c.reject_unknown(); });
  EXPECT_NE(msg.find("train.etta"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
}

TEST(ConfigOverride, SetReplacesFileValue) {
  auto c = Config::from_string("[train]\neta = 0.1\n");
  c.set("train.eta=0.5");
  EXPECT_DOUBLE_EQ(c.get_double("train.eta", 0.0), 0.5);
  EXPECT_THROW(c.set("no-equals"), Error);
}

TEST(ConfigHash, IndependentOfSpellingAndOrder) {
  auto a = Config::from_string("[t]\neta = 0.50\nepochs = 1e3\n");
  auto b = Config::from_string("[t]\nepochs = 1000\neta = .5\n");
  for (Config* c : {&a, &b}) {
    c->get_double("t.eta", 0.0);
    c->get_uint("t.epochs", 0);
  }
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.run_hash(), b.run_hash());
  EXPECT_EQ(a.run_hash().size(), 16u);
}

TEST(ConfigHash, ChangesWithAnyResolvedValue) {
  auto a = Config::from_string("seed = 1\n");
  auto b = Config::from_string("seed = 2\n");
  a.get_uint("seed", 0);
  b.get_uint("seed", 0);
  EXPECT_NE(a.run_hash(), b.run_hash());
}

TEST(ConfigHash, KnownFnvValueOfEmptyConfig) {
  // FNV-1a 64 of the empty string is its offset basis.
  EXPECT_EQ(Config::from_string("").run_hash(), "cbf29ce484222325");
}

TEST(ConfigHeader, CommentLinesListEveryResolvedKey) {
  auto c = Config::from_string("b = 2\n");
  c.get_uint("b", 0);
  c.get_double("a", 1.5);
  const auto h = c.header_comment();
  EXPECT_EQ(h, "# run_hash = " + c.run_hash() + "\n# a = 1.5\n# b = 2\n");
}
