#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "deepsvm/errors.hpp"
#include "deepsvm/network.hpp"
#include "deepsvm/sampling.hpp"

namespace deepsvm {
namespace {

ModelSpec small_spec(std::size_t width = 16, std::size_t depth = 3, std::size_t p = 8) {
  ModelSpec s;
  s.branch = {5, width, depth, p};
  s.trunk = {3, width, depth, p};
  return s;
}

// All weights zero; the final biases fix the two embeddings.
DeepONetModel constant_embeddings(const std::vector<double>& b, const std::vector<double>& t) {
  DeepONetModel m(small_spec(4, 2, b.size()));
  const auto& bl = m.branch_layers().back();
  const auto& tl = m.trunk_layers().back();
  for (std::size_t i = 0; i < b.size(); ++i) {
    m.parameters()[bl.bias_offset + i] = b[i];
    m.parameters()[tl.bias_offset + i] = t[i];
  }
  return m;
}

const HestonParams kP{2.0, 0.05, 0.3, -0.6, 0.03};

TEST(Spec, ParameterCount) {
  const MLPSpec s{5, 128, 4, 128};
  // 5->128, three 128->128 hidden, 128->128 projection.
  EXPECT_EQ(s.parameter_count(), 128u * 5 + 128 + 3 * (128 * 128 + 128) + 128 * 128 + 128);
  const DeepONetModel m(ModelSpec{});
  EXPECT_EQ(m.parameter_count(), ModelSpec{}.branch.parameter_count() + ModelSpec{}.trunk.parameter_count());
}

TEST(Spec, Validation) {
  ModelSpec s = small_spec();
  s.trunk.output_width = 7;
  EXPECT_THROW(s.validate(), ArgumentError);
  s = small_spec();
  s.branch.hidden_depth = 0;
  EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(Layout, SkipsOnlyBetweenHiddenLayers) {
  const DeepONetModel m(small_spec(16, 4, 8));
  const auto& l = m.branch_layers();
  ASSERT_EQ(l.size(), 5u);
  EXPECT_FALSE(l[0].skip);
  EXPECT_TRUE(l[0].gelu);
  for (int k = 1; k <= 3; ++k) EXPECT_TRUE(l[k].skip && l[k].gelu);
  EXPECT_FALSE(l[4].gelu);
  EXPECT_FALSE(l[4].skip);
}

TEST(Init, Deterministic) {
  const auto a = init_model(small_spec(), 3);
  const auto b = init_model(small_spec(), 3);
  const auto c = init_model(small_spec(), 4);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(Init, GlorotRangeAndZeroBias) {
  const auto m = init_model(small_spec(16, 2, 8), 1);
  for (const auto& l : m.trunk_layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
    for (std::size_t i = 0; i < l.rows * l.cols; ++i)
      EXPECT_LE(std::abs(m.parameters()[l.weight_offset + i]), limit);
    for (std::size_t i = 0; i < l.rows; ++i) EXPECT_EQ(m.parameters()[l.bias_offset + i], 0.0);
  }
}

TEST(RawOutput, FiniteAtFreshInit) {
  const auto m = init_model(ModelSpec{}, 0);
  const DomainBounds b;
  const HestonParams mid{b.kappa.mid(), b.theta.mid(), b.sigma.mid(), b.rho.mid(), b.r.mid()};
  EXPECT_TRUE(std::isfinite(raw_output(m, mid, {b.x.mid(), b.nu.mid(), b.tau.mid()})));
}

TEST(RawOutput, ScalarInnerProduct) {
  const auto m = constant_embeddings({2.0}, {3.0});
  EXPECT_EQ(raw_output(m, kP, {0.1, 0.1, 0.5}), 6.0);
}

TEST(RawOutput, OrthogonalEmbeddings) {
  const auto m = constant_embeddings({1.0, 0.0}, {0.0, 1.0});
  EXPECT_EQ(raw_output(m, kP, {0.4, 0.2, 0.9}), 0.0);
}

TEST(RawOutput, ParamsEnterOnlyThroughBranch) {
  auto m = init_model(small_spec(), 5);
  // Freeze the branch to a constant embedding; mu then cannot matter.
  for (const auto& l : m.branch_layers())
    for (std::size_t i = 0; i < l.rows * l.cols; ++i) m.parameters()[l.weight_offset + i] = 0.0;
  const LayerLayout& last = m.branch_layers().back();
  for (std::size_t i = 0; i < last.rows; ++i) m.parameters()[last.bias_offset + i] = 1.0;
  const DomainPoint d{0.3, 0.1, 0.5};
  const double a = raw_output(m, kP, d);
  EXPECT_EQ(raw_output(m, {0.7, 0.15, 0.2, -0.1, 0.07}, d), a);
  // Trunk weights still matter.
  m.parameters()[m.trunk_layers()[0].weight_offset] += 0.5;
  EXPECT_NE(raw_output(m, kP, d), a);
}

TEST(RawOutput, RejectsOutOfBounds) {
  const auto m = init_model(small_spec(), 5);
  EXPECT_THROW(raw_output(m, kP, {0.0, 0.5, 0.5}), DomainError);
}

TEST(Ansatz, TerminalExactness) {
  const auto m = init_model(small_spec(), 2);
  EXPECT_EQ(u_pred(m, kP, {0.3, 0.1, 0.0}), std::exp(0.3) - 1.0);
  EXPECT_NEAR(u_pred(m, kP, {0.3, 0.1, 0.0}), 0.349859, 1e-6);
}

TEST(Ansatz, SoftplusOfZero) {
  const auto m = constant_embeddings({0.0}, {0.0});
  EXPECT_NEAR(u_pred(m, kP, {-1.0, 0.1, 1.0}), 0.693147, 1e-6);
  EXPECT_EQ(u_pred(m, kP, {-1.0, 0.1, 1.0}), std::log(2.0));
}

TEST(Ansatz, NeverBelowIntrinsic) {
  const auto m = init_model(small_spec(), 9);
  Sampler s(1);
  for (const auto& c : s.interior(2000)) EXPECT_GE(u_pred(m, c.params, c.point), payoff(c.point.x));
}

TEST(Softplus, StableAtExtremes) {
  EXPECT_EQ(softplus(0.0), std::log(2.0));
  EXPECT_EQ(softplus(800.0), 800.0);
  EXPECT_GT(softplus(-800.0), -1e-300);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    model = init_model(small_spec(), 12);
    model.metadata.stage = "adam";
    model.metadata.step = 42;
    model.metadata.config_hash = "0123456789abcdef";
    model.metadata.loss_total = 1.0 / 3.0;
    std::ostringstream os;
    write_checkpoint(os, model);
    text = os.str();
  }
  DeepONetModel read(const std::string& s) {
    std::istringstream is(s);
    return read_checkpoint(is);
  }
  DeepONetModel model;
  std::string text;
};

TEST_F(CheckpointTest, RoundTripBitExact) {
  const auto back = read(text);
  EXPECT_EQ(back.spec(), model.spec());
  EXPECT_EQ(back.metadata, model.metadata);
  ASSERT_EQ(back.parameter_count(), model.parameter_count());
  EXPECT_TRUE(std::equal(back.parameters().begin(), back.parameters().end(),
                         model.parameters().begin()));
  Sampler s(4);
  for (const auto& c : s.interior(100))
    EXPECT_EQ(u_pred(back, c.params, c.point), u_pred(model, c.params, c.point));
}

TEST_F(CheckpointTest, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "deepsvm_network_test.ckpt";
  save_checkpoint(model, path);
  const auto back = load_checkpoint(path);
  EXPECT_TRUE(std::equal(back.parameters().begin(), back.parameters().end(),
                         model.parameters().begin()));
  std::filesystem::remove(path);
}

TEST_F(CheckpointTest, TruncatedIsCorrupt) {
  EXPECT_THROW(read(text.substr(0, text.size() / 2)), CorruptCheckpointError);
  EXPECT_THROW(read(text.substr(0, text.size() - 4)), CorruptCheckpointError);
}

TEST_F(CheckpointTest, BadHexIsCorrupt) {
  const auto pos = text.find("tensor branch.0.weight");
  const auto line = text.find('\n', pos) + 1;
  std::string bad = text;
  bad[line] = 'z';
  EXPECT_THROW(read(bad), CorruptCheckpointError);
}

TEST_F(CheckpointTest, VersionMismatch) {
  std::string bad = text;
  bad.replace(0, std::string(kCheckpointVersion).size(), "deepsvm-ckpt-9");
  EXPECT_THROW(read(bad), VersionMismatchError);
  EXPECT_THROW(read("garbage\n"), CorruptCheckpointError);
}

TEST_F(CheckpointTest, EmbeddingMismatchIsShapeError) {
  std::string bad = text;
  const auto pos = bad.find("spec trunk 3 16 3 8");
  ASSERT_NE(pos, std::string::npos);
  bad.replace(pos, 19, "spec trunk 3 16 3 9");
  EXPECT_THROW(read(bad), ShapeMismatchError);
}

TEST_F(CheckpointTest, TensorShapeMismatch) {
  std::string bad = text;
  const auto pos = bad.find("tensor trunk.1.weight 16 16");
  ASSERT_NE(pos, std::string::npos);
  bad.replace(pos, 27, "tensor trunk.1.weight 16 15");
  EXPECT_THROW(read(bad), ShapeMismatchError);
}

TEST_F(CheckpointTest, MissingFile) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace deepsvm
