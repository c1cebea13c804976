#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "hierxai/oracle.hpp"
#include "hierxai/pipeline.hpp"
#include "hierxai/subprocess_oracle.hpp"
#include "hierxai/wire.hpp"

using namespace hierxai;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "hierxai_test_oracle";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::filesystem::path write_spec(const std::string& name, const std::string& json) {
  const auto p = scratch(name);
  std::ofstream(p) << json;
  return p;
}

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937& rng) {
  std::vector<float> d(h * w * c);
  for (auto& v : d) v = std::uniform_real_distribution<float>(0, 1)(rng);
  return Image(h, w, c, std::move(d));
}

std::string toy_command(const std::filesystem::path& spec, const std::string& extra = "") {
  return std::string(HIERXAI_TOY_ORACLE) + " --spec " + spec.string() + extra;
}

}  // namespace

TEST(Toy, HelloEchoesConstruction) {
  ToyOracle lin(LinearToy{{1, 2, 2}, {{1, 0, 0, 0}, {0, 1, 0, 0}}});
  const OracleInfo info = lin.hello();
  EXPECT_EQ(info.n_classes, 2u);
  EXPECT_EQ(info.input_shape, (std::array<std::size_t, 3>{1, 2, 2}));
  ToyOracle pp(PlantedPatchToy{{3, 8, 8}, {2, 2, 3, 3}});
  EXPECT_EQ(pp.hello().n_classes, 2u);
}

TEST(Toy, LinearClosedForm) {
  std::vector<float> left(16, 0.0f);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 2; ++x) left[y * 4 + x] = 1.0f;
  ToyOracle o(LinearToy{{1, 4, 4}, {std::vector<float>(16, 0.5f), left}});
  const auto zero = logits_of(o, Image(4, 4, 1, 0.0f));
  EXPECT_EQ(zero, (LogitVector{0.0f, 0.0f}));
  const auto ones = logits_of(o, Image(4, 4, 1, 1.0f));
  EXPECT_EQ(ones[1], 8.0f);
  const Image x = Image(4, 4, 1, 0.25f);
  const std::vector<Image> batch{x, x};
  const auto out = o.logits(batch);
  EXPECT_EQ(out[0], out[1]);
}

TEST(Toy, ConstantPicksLargest) {
  ToyOracle o(ConstantToy{{1, 3, 3}, {1.0f, 2.0f}});
  std::mt19937 rng(1);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(argmax(logits_of(o, random_image(3, 3, 1, rng))), 1u);
}

TEST(Toy, PlantedPatchFlip) {
  const PlantedPatchToy spec{{1, 6, 6}, {1, 1, 2, 2}, 2.0f, 0.5f};
  ToyOracle o(spec);
  Image img(6, 6, 1, 0.1f);
  for (std::size_t y = 1; y < 3; ++y)
    for (std::size_t x = 1; x < 3; ++x) img.at(0, y, x) = 0.5f;
  const auto l = logits_of(o, img);
  EXPECT_FLOAT_EQ(l[1] - 0.0f, 2.0f * 0.5f);
  EXPECT_EQ(argmax(l), 1u);
  Mask patch(6, 6);
  for (std::size_t y = 1; y < 3; ++y)
    for (std::size_t x = 1; x < 3; ++x) patch.set(y * 6 + x);
  EXPECT_EQ(argmax(logits_of(o, apply_mask(img, patch, FillPolicy::constant(0)))), 0u);
}

TEST(Toy, OrthogonalSupports) {
  std::vector<float> w0(8, 0.0f), w1(8, 0.0f);
  for (int i = 0; i < 4; ++i) w0[i] = 1.0f + i;
  for (int i = 4; i < 8; ++i) w1[i] = 2.0f;
  ToyOracle o(LinearToy{{1, 2, 4}, {w0, w1}});
  std::mt19937 rng(3);
  const Image img = random_image(2, 4, 1, rng);
  const Mask top(2, 4, std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0, 0});
  EXPECT_EQ(logits_of(o, img)[1], logits_of(o, apply_mask(img, top, FillPolicy::constant(0)))[1]);
}

TEST(Toy, RejectsBadSpecs) {
  EXPECT_THROW(ToyOracle(ConstantToy{{1, 2, 2}, {1.0f}}), std::invalid_argument);
  EXPECT_THROW(ToyOracle(LinearToy{{1, 2, 2}, {{1, 2}, {3, 4}}}), std::invalid_argument);
  EXPECT_THROW(ToyOracle(PlantedPatchToy{{1, 4, 4}, {3, 3, 2, 2}}), std::invalid_argument);
  ToyOracle o(ConstantToy{{1, 2, 2}, {0, 1}});
  const std::vector<Image> wrong{Image(3, 3, 1, 0.0f)};
  EXPECT_THROW(o.logits(wrong), OracleError);
}

TEST(Softmax, SumsToOne) {
  const auto p = softmax({1000.0f, 1001.0f, 999.0f});
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
  EXPECT_GT(p[1], p[0]);
  EXPECT_NEAR(softmax({0.0f, 0.0f})[0], 0.5, 1e-12);
}

TEST(Cache, TransparentAndCounts) {
  auto inner = std::make_shared<ToyOracle>(LinearToy{{1, 3, 3}, {std::vector<float>(9, 1.0f), std::vector<float>(9, -1.0f)}});
  CachingOracle cache(inner, 4);
  std::mt19937 rng(4);
  std::vector<Image> imgs;
  for (int i = 0; i < 6; ++i) imgs.push_back(random_image(3, 3, 1, rng));
  const auto direct = inner->logits(imgs);
  EXPECT_EQ(cache.logits(imgs), direct);
  EXPECT_EQ(cache.misses(), 6u);
  const std::vector<Image> again{imgs[5], imgs[4]};
  const auto hit = cache.logits(again);
  EXPECT_EQ(hit[0], direct[5]);
  EXPECT_EQ(hit[1], direct[4]);
  EXPECT_EQ(cache.hits(), 2u);
  EXPECT_EQ(cache.hello(), inner->hello());
  EXPECT_EQ(cache.identity(), inner->identity());
}

TEST(Wire, Base64) {
  EXPECT_EQ(wire::base64_encode(""), "");
  EXPECT_EQ(wire::base64_encode("f"), "Zg==");
  EXPECT_EQ(wire::base64_encode("fo"), "Zm8=");
  EXPECT_EQ(wire::base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(wire::base64_decode("Zm9vYg=="), "foob");
  EXPECT_THROW(wire::base64_decode("Zm9"), wire::ProtocolError);
  EXPECT_THROW(wire::base64_decode("Zm9*"), wire::ProtocolError);
}

TEST(Wire, LittleEndianFloatPayload) {
  const std::vector<Image> batch{Image(2, 2, 1, std::vector<float>{1.0f, 0.0f, -2.0f, 0.5f})};
  const auto j = nlohmann::json::parse(wire::encode(wire::make_logits_request(7, batch)));
  EXPECT_EQ(j["op"], "logits");
  EXPECT_EQ(j["dtype"], "f32");
  EXPECT_EQ(j["shape"], nlohmann::json::array({1, 1, 2, 2}));
  const std::string raw = wire::base64_decode(j["data"].get<std::string>());
  // 1.0f = 0x3f800000, little-endian
  EXPECT_EQ(raw.substr(0, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(Wire, RequestRoundTrip) {
  std::mt19937 rng(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<Image> batch;
    const std::size_t n = 1 + rng() % 4, c = rng() % 2 ? 3 : 1;
    for (std::size_t k = 0; k < n; ++k) batch.push_back(random_image(2 + rng() % 5, 2 + rng() % 5, c, rng));
    for (auto& b : batch) b = Image(batch[0].height(), batch[0].width(), c, std::vector<float>(b.data().begin(), b.data().begin() + batch[0].size()));
    const wire::Request req = wire::make_logits_request(rng(), batch);
    EXPECT_EQ(wire::decode_request(wire::encode(req)), req);
    const auto& l = std::get<wire::LogitsRequest>(req);
    const auto imgs = wire::images_of(l);
    for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(imgs[k], batch[k]);
  }
  const wire::Request hello = wire::HelloRequest{99};
  EXPECT_EQ(wire::decode_request(wire::encode(hello)), hello);
}

TEST(Wire, ResponseRoundTrip) {
  wire::Response a;
  a.id = 3;
  a.logits = std::vector<LogitVector>{{0.5f, -1.25f}, {3.0e-8f, 7.0f}};
  EXPECT_EQ(wire::decode_response(wire::encode(a)), a);
  wire::Response b;
  b.id = 4;
  b.info = OracleInfo{10, {3, 32, 32}, ""};
  EXPECT_EQ(wire::decode_response(wire::encode(b)), b);
  wire::Response c;
  c.id = 5;
  c.ok = false;
  c.error = "boom";
  EXPECT_EQ(wire::decode_response(wire::encode(c)), c);
  EXPECT_THROW(wire::decode_response("{\"id\":1}"), wire::ProtocolError);
  EXPECT_THROW(wire::decode_response("nope"), wire::ProtocolError);
}

TEST(Wire, HandleLineNeverThrows) {
  ToyOracle o(ConstantToy{{1, 2, 2}, {0.0f, 1.0f}});
  const std::vector<std::string> bad{
      "",
      "not json",
      "[1,2]",
      R"({"op":"hello"})",
      R"({"id":5,"op":"dance"})",
      R"({"id":6,"op":"logits","shape":[1,1,2,2],"dtype":"f64","data":""})",
      R"({"id":7,"op":"logits","shape":[1,1,2,2],"dtype":"f32","data":"AAAA"})",
      R"({"id":8,"op":"logits","shape":[1,1,3,3],"dtype":"f32","data":")" +
          wire::base64_encode(std::string(36, '\0')) + "\"}",
  };
  for (const auto& line : bad) {
    const wire::Response r = wire::decode_response(wire::handle_line(o, line));
    EXPECT_FALSE(r.ok) << line;
    EXPECT_FALSE(r.error.empty());
  }
  EXPECT_EQ(wire::decode_response(wire::handle_line(o, R"({"id":5,"op":"dance"})")).id, 5u);
  EXPECT_EQ(wire::decode_response(wire::handle_line(o, bad.back())).id, 8u);
  const wire::Response ok = wire::decode_response(wire::handle_line(o, R"({"id":9,"op":"hello"})"));
  EXPECT_TRUE(ok.ok);
  EXPECT_EQ(ok.info->n_classes, 2u);
}

TEST(Wire, ServeAnswersEveryLine) {
  ToyOracle o(ConstantToy{{1, 2, 2}, {0.0f, 1.0f}});
  std::istringstream in("{\"id\":1,\"op\":\"hello\"}\n\ngarbage\n{\"id\":3,\"op\":\"hello\"}\n");
  std::ostringstream out;
  wire::serve(o, in, out);
  std::istringstream lines(out.str());
  std::string line;
  std::vector<wire::Response> rs;
  while (std::getline(lines, line)) rs.push_back(wire::decode_response(line));
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_TRUE(rs[0].ok);
  EXPECT_FALSE(rs[1].ok);
  EXPECT_EQ(rs[2].id, 3u);
}

TEST(ToySpecFile, ParsesAndRejects) {
  const auto j = nlohmann::json::parse(R"({"kind":"planted_patch","input":[3,8,8],"rect":[1,2,3,4],"gain":2,"margin":0.25})");
  const auto spec = std::get<PlantedPatchToy>(parse_toy_spec(j));
  EXPECT_EQ(spec.rect, (Rect{1, 2, 3, 4}));
  EXPECT_EQ(spec.gain, 2.0f);
  EXPECT_THROW(parse_toy_spec(nlohmann::json::parse(R"({"kind":"constant","input":[1,2,2],"values":[1,2],"x":1})")), ConfigError);
  EXPECT_THROW(parse_toy_spec(nlohmann::json::parse(R"({"kind":"cnn","input":[1,2,2]})")), ConfigError);
  const auto w = scratch("w.npy");
  npy::write_f32(w, {2, 1, 2, 2}, {1, 0, 0, 0, 0, 0, 0, 1});
  const auto p = write_spec("lin.json", R"({"kind":"linear","input":[1,2,2],"weights_npy":"w.npy"})");
  const auto lin = std::get<LinearToy>(load_toy_spec(p));
  EXPECT_EQ(lin.weights[1], (std::vector<float>{0, 0, 0, 1}));
}

TEST(Subprocess, MatchesInProcess) {
  const auto spec = write_spec("lin_sub.json",
                               R"({"kind":"linear","input":[1,3,3],"weights":[[1,2,3,4,5,6,7,8,9],[9,8,7,6,5,4,3,2,1]]})");
  SubprocessOracle sub(toy_command(spec));
  ToyOracle local(std::get<LinearToy>(load_toy_spec(spec)));
  EXPECT_EQ(sub.hello().n_classes, 2u);
  EXPECT_EQ(sub.hello().input_shape, local.hello().input_shape);
  std::mt19937 rng(6);
  std::vector<Image> batch;
  for (int i = 0; i < 9; ++i) batch.push_back(random_image(3, 3, 1, rng));
  EXPECT_EQ(sub.logits(batch), local.logits(batch));
  EXPECT_TRUE(sub.logits({}).empty());
  const std::vector<Image> wrong{Image(2, 2, 1, 0.0f)};
  EXPECT_THROW(sub.logits(wrong), OracleError);
}

TEST(Subprocess, ConcurrentCallersGetTheirOwnReplies) {
  const auto spec = write_spec("lin_conc.json", R"({"kind":"linear","input":[1,2,2],"weights":[[1,0,0,0],[0,0,0,1]]})");
  SubprocessOracle sub(toy_command(spec));
  std::vector<std::thread> threads;
  std::atomic<int> bad{0};
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        const float v = float(t * 100 + i);
        const auto l = logits_of(sub, Image(2, 2, 1, v));
        if (l[0] != v || l[1] != v) ++bad;
      }
    });
  for (auto& th : threads) th.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Subprocess, CrashFailsPendingRequestWithId) {
  const auto spec = write_spec("const_crash.json", R"({"kind":"constant","input":[1,2,2],"values":[0,1]})");
  SubprocessOracle sub(toy_command(spec, " --exit-after 1"));
  try {
    logits_of(sub, Image(2, 2, 1, 0.0f));
    FAIL() << "expected an oracle error";
  } catch (const OracleError& e) {
    EXPECT_NE(std::string(e.what()).find("request 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(logits_of(sub, Image(2, 2, 1, 0.0f)), OracleError);
}

TEST(Subprocess, StartupFailures) {
  EXPECT_THROW(SubprocessOracle("exit 0"), OracleError);
  EXPECT_THROW(SubprocessOracle("echo not-json"), OracleError);
  EXPECT_THROW(SubprocessOracle(toy_command(scratch("missing.json"))), OracleError);
}

TEST(Subprocess, ChildExitsAfterHandshake) {
  // the request is larger than a pipe buffer and nobody reads it
  SubprocessOracle sub(R"(read l; echo '{"classes":2,"id":1,"input":[3,128,128],"ok":true}')");
  const std::vector<Image> batch{Image(128, 128, 3, 0.5f)};
  for (int i = 0; i < 3; ++i) EXPECT_THROW(sub.logits(batch), OracleError);
}

TEST(Subprocess, Timeout) {
  EXPECT_THROW(SubprocessOracle("sleep 1", std::chrono::milliseconds(200)), OracleError);
}
