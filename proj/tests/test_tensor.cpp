/*
 * Copyright 2026 The DRS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "drs/rng.hpp"
#include "drs/ops.hpp"
#include "drs/tape.hpp"
#include "drs/tensor.hpp"
#include "drs/tensor_io.hpp"
#include "oracles.hpp"

using namespace drs;

TEST(Tensor, ConstructionAndShape) {
  Tensor t(Shape{2, 3, 4, 5}, 1.5f);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.rank(), 4u);
  EXPECT_EQ(t.dim(3), 5u);
  EXPECT_EQ(to_string(t.shape()), "[2,3,4,5]");
  t.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(t[119], 7.0f);
  EXPECT_EQ(Tensor::scalar(3.0f).item(), 3.0f);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 3}).reshaped(Shape{4}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2}).item(), ShapeError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  auto r = t.reshaped(Shape{3, 2});
  EXPECT_EQ(r.vec(), t.vec());
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
}

TEST(Tensor, CastAndFinite) {
  Tensor t(Shape{3}, std::vector<float>{0.5f, -1.0f, 2.0f});
  auto d = t.cast<double>();
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(TensorIo, HeaderLayout) {
  Tensor t(Shape{2, 1}, std::vector<float>{1.0f, -2.0f});
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4u + 1 + 1 + 2 * 4 + 2 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "DRST");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), kTensorFileVersion);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2);  // little-endian dim 0
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0);
  float first;
  std::memcpy(&first, bytes.data() + 14, 4);
  EXPECT_EQ(first, 1.0f);
}

TEST(TensorIo, RoundTripIsBitExact) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Shape shape;
    const std::size_t rank = 1 + uniform_index(rng, 4);
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(1 + uniform_index(rng, 5));
    auto t = oracle::random_tensor<float>(rng, shape, -1e6, 1e6);
    t[0] = -0.0f;
    t[t.size() - 1] = std::numeric_limits<float>::denorm_min();
    std::stringstream ss;
    write_tensor(ss, t);
    const Tensor back = read_tensor(ss);
    ASSERT_EQ(back.shape(), t.shape());
    EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(float)), 0);
  }
}

TEST(TensorIo, RejectsMalformedInput) {
  std::stringstream bad_magic("XXXX");
  EXPECT_THROW(read_tensor(bad_magic), FormatError);

  Tensor t(Shape{4}, 1.0f);
  std::stringstream ss;
  write_tensor(ss, t);
  std::string bytes = ss.str();

  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  std::stringstream v(wrong_version);
  EXPECT_THROW(read_tensor(v), FormatError);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_tensor(truncated), FormatError);
}

TEST(TensorIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "drs_tensor_io_test.drst";
  Tensor t(Shape{2, 2}, std::vector<float>{0.25f, 1e-8f, -3.0f, 42.0f});
  save_tensor(path, t);
  EXPECT_EQ(load_tensor(path), t);
  std::filesystem::remove(path);
  EXPECT_THROW(load_tensor(path), FormatError);
}

TEST(Rng, SplitmixReferenceValues) {
  // splitmix64 from state 0: the first outputs of the reference generator
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, std::string_view("a")), derive_seed(2, std::string_view("a")));
  EXPECT_EQ(derive_seed(5, std::string_view("x")), derive_seed(5, std::string_view("x")));
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(uniform_index(rng, 7), 7u);
    const double u = uniform(rng, -2.0, 5.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 5.0);
  }
}

TEST(Tape, LeavesAndGradients) {
  Tape tape;
  auto a = tape.parameter(Tensor(Shape{2}, std::vector<float>{1, 2}));
  auto c = tape.constant(Tensor(Shape{2}, 3.0f));
  EXPECT_TRUE(a.requires_grad());
  EXPECT_FALSE(c.requires_grad());
  auto loss = sum(mul(a, c));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(a).vec(), (std::vector<float>{3, 3}));
  EXPECT_EQ(tape.grad(c).vec(), (std::vector<float>{0, 0}));
}

TEST(Tape, SharedSubexpressionAccumulates) {
  Tape tape;
  auto x = tape.parameter(Tensor(Shape{1}, 2.0f));
  auto y = mul(x, x);
  auto loss = sum(add(y, x));
  tape.backward(loss);
  EXPECT_FLOAT_EQ(tape.grad(x)[0], 5.0f);  // 2x + 1
}

TEST(Tape, BackwardTwiceResetsGradients) {
  Tape tape;
  auto x = tape.parameter(Tensor(Shape{1}, 2.0f));
  auto loss = sum(mul(x, x));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_FLOAT_EQ(tape.grad(x)[0], 4.0f);
}

TEST(Tape, RejectsNonScalarAndForeignLoss) {
  Tape tape, other;
  auto x = tape.parameter(Tensor(Shape{2}, 1.0f));
  EXPECT_THROW(tape.backward(x), ShapeError);
  auto y = other.parameter(Tensor(Shape{1}, 1.0f));
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
  EXPECT_THROW(add(x, other.constant(Tensor(Shape{2}))), std::invalid_argument);
}

TEST(Tape, NonRecordingTapeKeepsNoGraph) {
  Tape tape(false);
  auto x = tape.parameter(Tensor(Shape{1}, 2.0f));
  EXPECT_FALSE(x.requires_grad());
  auto y = mul(x, x);
  EXPECT_FLOAT_EQ(y.value()[0], 4.0f);
}

TEST(Tape, FiniteCheckRaisesNumericalError) {
  Tape tape;
  tape.set_check_finite(true);
  auto x = tape.constant(Tensor(Shape{1}, std::numeric_limits<float>::max()));
  EXPECT_THROW(mul(x, x), NumericalError);
}
