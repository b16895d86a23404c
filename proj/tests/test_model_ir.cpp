#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ralp/catalog.hpp"
#include "ralp/error.hpp"
#include "ralp/model_ir.hpp"
#include "support.hpp"

using namespace ralp;

TEST(InferLayer, ConvParamsAndFlops) {
  const ConvParams c{3, 3, 3, 64, 1, Padding::Same, 0};
  const auto cost = infer_layer(LayerKind::Convolution, c, {224, 224, 3});
  EXPECT_EQ(cost.param_count, 1792u);
  EXPECT_EQ(cost.output_shape, (TensorShape{224, 224, 64}));
  EXPECT_EQ(cost.compute_flops_per_sample, 2ull * 3 * 3 * 3 * 64 * 224 * 224);
}

TEST(InferLayer, FcParams) {
  const auto cost = infer_layer(LayerKind::FullyConnected, FcParams{4096, 1000}, TensorShape::flat(4096));
  EXPECT_EQ(cost.param_count, 4'097'000u);
  EXPECT_EQ(cost.output_elems_per_sample, 1000u);
  EXPECT_EQ(cost.compute_flops_per_sample, 2ull * 4096 * 1000);
}

TEST(InferLayer, MaxPoolHalves) {
  PoolParams p;
  p.window = 2;
  p.stride = 2;
  const auto cost = infer_layer(LayerKind::Pooling, p, {8, 8, 5});
  EXPECT_EQ(cost.param_count, 0u);
  EXPECT_EQ(cost.output_shape, (TensorShape{4, 4, 5}));
  EXPECT_EQ(cost.output_elems_per_sample, 80u);
}

TEST(InferLayer, ValidConvExtent) {
  const ConvParams c{11, 11, 3, 64, 4, Padding::Valid, 0};
  EXPECT_EQ(infer_layer(LayerKind::Convolution, c, {227, 227, 3}).output_shape, (TensorShape{55, 55, 64}));
}

TEST(InferLayer, RejectsBadDimensions) {
  EXPECT_THROW(infer_layer(LayerKind::FullyConnected, FcParams{0, 10}, TensorShape::flat(1)), InvalidArgument);
  const ConvParams big_stride{1, 1, 3, 8, 9, Padding::Valid, 0};
  EXPECT_THROW(infer_layer(LayerKind::Convolution, big_stride, {4, 4, 3}), InvalidArgument);
  const ConvParams big_window{5, 5, 3, 8, 1, Padding::Valid, 0};
  EXPECT_THROW(infer_layer(LayerKind::Convolution, big_window, {4, 4, 3}), InvalidArgument);
  const ConvParams padded{5, 5, 3, 8, 1, Padding::Explicit, 1};
  EXPECT_EQ(infer_layer(LayerKind::Convolution, padded, {4, 4, 3}).output_shape, (TensorShape{2, 2, 8}));
}

TEST(ParseModel, SingleFc) {
  const auto m = parse_model("model tiny batch=1\nfc1 fc in=10 out=2\n");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.layer(1).param_count, 22u);
  EXPECT_EQ(m.total_param_bytes(), 88u);
  EXPECT_EQ(m.layer(1).index, 1);
}

TEST(ParseModel, PoolOnly) {
  const auto m = parse_model("model p batch=4 input=8x8x2\npool1 pool window=2\n");
  EXPECT_EQ(m.total_param_count(), 0u);
  EXPECT_EQ(m.total_param_bytes(), 0u);
  EXPECT_EQ(m.output_bytes(1), 4u * 4 * 2 * 4 * 4);
}

TEST(ParseModel, ChannelMismatchNamesBothLayers) {
  const char* text =
      "model bad batch=1 input=8x8x3\n"
      "c1 conv k=3 in=3 out=16 pad=same\n"
      "c2 conv k=3 in=32 out=16 pad=same\n";
  try {
    parse_model(text);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("c1"), std::string::npos);
    EXPECT_NE(what.find("c2"), std::string::npos);
  }
}

TEST(ParseModel, FcInputMismatch) {
  EXPECT_THROW(parse_model("model bad batch=1 input=2x2x4\nfc1 fc in=15 out=3\n"), ShapeError);
  // Implicit in= takes the flattened input.
  const auto m = parse_model("model ok batch=1 input=2x2x4\nfc1 fc out=3\n");
  EXPECT_EQ(m.layer(1).param_count, 16u * 3 + 3);
}

TEST(ParseModel, ErrorsCarryLineAndColumn) {
  try {
    parse_model("model m batch=1 input=4x4x1\n\nc1 conv k=3 out=2\nx1 wobble\n", "m.model");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.source(), "m.model");
    EXPECT_EQ(e.line(), 4);
    EXPECT_EQ(e.column(), 4);
  }
  try {
    parse_model("model m batch=1\nfc1 fc in=3 out=2 bogus=1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 19);
  }
  EXPECT_THROW(parse_model("fc1 fc in=3 out=2\n"), ParseError);
  EXPECT_THROW(parse_model("model m\nfc1 fc in=3 out=2\n"), ParseError);
  EXPECT_THROW(parse_model("model m batch=1\n"), ParseError);
  EXPECT_THROW(parse_model("model m batch=1\nfc1 fc in=3 out=2\nfc1 fc out=2\n"), ParseError);
  EXPECT_THROW(parse_model("model m batch=1\nfc1 fc in=3 out=x\n"), ParseError);
  EXPECT_THROW(parse_model("model m batch=1\nfc1 fc in=3 in=3 out=2\n"), ParseError);
}

TEST(ParseModel, CommentsAndAliases) {
  const auto m = parse_model(
      "# leading comment\n"
      "model m batch=2 elem_bytes=2 input=6x6x1  # trailing\n"
      "c1 Convolution k=3 out=4 pad=valid\n"
      "r1 relu\n"
      "f flatten\n"
      "d dense out=5\n"
      "s softmax\n");
  EXPECT_EQ(m.size(), 5u);
  EXPECT_EQ(m.layer(1).kind, LayerKind::Convolution);
  EXPECT_EQ(m.layer(2).kind, LayerKind::Activation);
  EXPECT_EQ(m.layer(4).param_count, 4u * 4 * 4 * 5 + 5);
  EXPECT_EQ(m.layer(5).output_elems_per_sample, 0u);
  EXPECT_EQ(m.bytes_per_element(), 2);
}

TEST(ParseModel, NothingAfterLoss) {
  EXPECT_THROW(parse_model("model m batch=1\nfc1 fc in=3 out=2\ns loss\nfc2 fc out=2\n"), ShapeError);
}

TEST(ParseModel, BlockShapeMustMatch) {
  EXPECT_THROW(parse_model("model m batch=1\nb1 block params=1 out=10 flops=1 shape=2x2x2\n"), InvalidArgument);
  const auto m = parse_model("model m batch=1\nb1 block params=7 out=8 flops=3 shape=2x2x2\nc conv k=1 out=1\n");
  EXPECT_EQ(m.layer(2).param_count, 3u);
}

TEST(ModelGraph, Invariants) {
  for (const auto& name : catalog_names()) {
    const auto m = catalog_lookup(name);
    std::uint64_t sum = 0;
    for (const auto& l : m.layers()) {
      sum += l.param_count;
      if (l.kind != LayerKind::Loss) EXPECT_GT(l.output_elems_per_sample, 0u) << name << " " << l.name;
      const bool weighted = l.kind == LayerKind::Convolution || l.kind == LayerKind::FullyConnected ||
                            l.kind == LayerKind::Block;
      if (!weighted) EXPECT_EQ(l.param_count, 0u);
    }
    EXPECT_EQ(sum * static_cast<std::uint64_t>(m.bytes_per_element()), m.total_param_bytes()) << name;
    EXPECT_EQ(m.cumulative_param_bytes(static_cast<int>(m.size())), m.total_param_bytes());
  }
}

TEST(ModelGraph, BatchDoublingDoublesOutputsOnly) {
  for (const auto& name : catalog_names()) {
    const auto m = catalog_lookup(name);
    const auto d = m.with_batch_size(m.batch_size() * 2);
    EXPECT_EQ(d.total_param_bytes(), m.total_param_bytes());
    for (int i = 1; i <= static_cast<int>(m.size()); ++i) EXPECT_EQ(d.output_bytes(i), 2 * m.output_bytes(i));
  }
}

TEST(ModelGraph, RoundTrip) {
  for (const auto& name : catalog_names()) {
    const auto m = catalog_lookup(name);
    const auto text = to_descriptor(m);
    EXPECT_EQ(parse_model(text), m) << name;
    EXPECT_EQ(to_descriptor(parse_model(text)), text);
  }
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto m = testutil::random_model(rng);
    EXPECT_EQ(parse_model(to_descriptor(m)), m);
  }
}

TEST(Catalog, TableSizes) {
  EXPECT_NEAR(catalog_lookup("vgg11").total_param_bytes() / (1024.0 * 1024 * 1024), 0.50, 0.015);
  EXPECT_NEAR(catalog_lookup("alexnet").total_param_bytes() / (1024.0 * 1024 * 1024), 0.23, 0.007);
  EXPECT_NEAR(catalog_lookup("inception-v3").total_param_bytes() / (1024.0 * 1024 * 1024), 0.09, 0.0027);
}

TEST(Catalog, EightModelsAndLookupNormalization) {
  const std::vector<std::string> expected{"alexnet", "googlenet", "inception-v3", "lenet",
                                          "overfeat", "resnet-50", "vgg11", "vgg19"};
  EXPECT_EQ(catalog_names(), expected);
  EXPECT_EQ(catalog_lookup("ResNet50"), catalog_lookup("resnet-50"));
  EXPECT_EQ(catalog_lookup("Inception_V3"), catalog_lookup("inception-v3"));
  try {
    catalog_lookup("mobilenet");
    FAIL();
  } catch (const UnknownModelError& e) {
    EXPECT_NE(std::string(e.what()).find("vgg19"), std::string::npos);
  }
}

TEST(Catalog, FcDominatesVgg) {
  for (const char* name : {"vgg11", "vgg19"}) {
    const auto m = catalog_lookup(name);
    std::uint64_t fc = 0;
    for (const auto& l : m.layers())
      if (l.kind == LayerKind::FullyConnected) fc += l.param_count;
    EXPECT_GT(static_cast<double>(fc), 0.7 * static_cast<double>(m.total_param_count())) << name;
  }
}

TEST(Catalog, EnvironmentOverride) {
  const auto dir = std::filesystem::temp_directory_path() / "ralp_catalog_override";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "tiny.model") << "model tiny batch=3\nfc1 fc in=10 out=2\n";
  }
  setenv(kCatalogDirEnv, dir.c_str(), 1);
  EXPECT_EQ(catalog_names(), std::vector<std::string>{"tiny"});
  EXPECT_EQ(catalog_lookup("tiny").total_param_count(), 22u);
  EXPECT_THROW(catalog_lookup("vgg11"), UnknownModelError);
  unsetenv(kCatalogDirEnv);
  EXPECT_EQ(catalog_names().size(), 8u);
  std::filesystem::remove_all(dir);
}
