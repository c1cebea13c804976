#pragma once

// Newline-delimited JSON protocol between the engine and an oracle server.
//
//   request:  {"id":u64,"op":"hello"}
//             {"id":u64,"op":"logits","shape":[N,C,H,W],"dtype":"f32","data":"<base64 LE float32>"}
//   response: {"id":u64,"ok":true,"classes":K,"input":[C,H,W]}
//             {"id":u64,"ok":true,"logits":[[K floats] x N]}
//             {"id":u64,"ok":false,"error":"msg"}

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hierxai/oracle.hpp"

namespace hierxai::wire {

static_assert(std::endian::native == std::endian::little, "wire encoding assumes a little-endian host");

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (static_cast<std::uint8_t>(in[i]) << 16) | (static_cast<std::uint8_t>(in[i + 1]) << 8) |
                            static_cast<std::uint8_t>(in[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  if (i < in.size()) {
    std::uint32_t v = static_cast<std::uint8_t>(in[i]) << 16;
    if (i + 1 < in.size()) v |= static_cast<std::uint8_t>(in[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < in.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

inline std::string base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (in.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::string out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = in[i + k];
      if (c == '=' && i + 4 == in.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw ProtocolError("invalid base64 padding");
        v[k] = value(c);
        if (v[k] < 0) throw ProtocolError("invalid base64 character");
      }
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<char>((w >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<char>((w >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<char>(w & 0xff));
  }
  return out;
}

struct HelloRequest {
  std::uint64_t id = 0;
  bool operator==(const HelloRequest&) const = default;
};

struct LogitsRequest {
  std::uint64_t id = 0;
  std::array<std::size_t, 4> shape{};  // N, C, H, W
  std::vector<float> data;
  bool operator==(const LogitsRequest&) const = default;
};

using Request = std::variant<HelloRequest, LogitsRequest>;

struct Response {
  std::uint64_t id = 0;
  bool ok = true;
  std::string error;
  std::optional<OracleInfo> info;                 // hello
  std::optional<std::vector<LogitVector>> logits;  // logits

  bool operator==(const Response& o) const {
    if (id != o.id || ok != o.ok || error != o.error || logits != o.logits || info.has_value() != o.info.has_value())
      return false;
    return !info || (info->n_classes == o.info->n_classes && info->input_shape == o.info->input_shape);
  }
};

inline LogitsRequest make_logits_request(std::uint64_t id, std::span<const Image> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  LogitsRequest r;
  r.id = id;
  r.shape = {batch.size(), batch[0].channels(), batch[0].height(), batch[0].width()};
  r.data.reserve(batch.size() * batch[0].size());
  for (const Image& img : batch) {
    if (img.channels() != r.shape[1] || img.height() != r.shape[2] || img.width() != r.shape[3])
      throw std::invalid_argument("batch images differ in shape");
    r.data.insert(r.data.end(), img.data().begin(), img.data().end());
  }
  return r;
}

inline std::vector<Image> images_of(const LogitsRequest& r) {
  const std::size_t per = r.shape[1] * r.shape[2] * r.shape[3];
  std::vector<Image> out;
  out.reserve(r.shape[0]);
  for (std::size_t i = 0; i < r.shape[0]; ++i)
    out.emplace_back(r.shape[2], r.shape[3], r.shape[1],
                     std::vector<float>(r.data.begin() + static_cast<std::ptrdiff_t>(i * per),
                                        r.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
  return out;
}

inline std::string encode(const Request& req) {
  nlohmann::json j;
  if (const auto* h = std::get_if<HelloRequest>(&req)) {
    j = {{"id", h->id}, {"op", "hello"}};
  } else {
    const auto& l = std::get<LogitsRequest>(req);
    const std::string raw(reinterpret_cast<const char*>(l.data.data()), l.data.size() * sizeof(float));
    j = {{"id", l.id}, {"op", "logits"}, {"shape", l.shape}, {"dtype", "f32"}, {"data", base64_encode(raw)}};
  }
  return j.dump();
}

inline std::string encode(const Response& r) {
  nlohmann::json j = {{"id", r.id}, {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
  } else if (r.info) {
    j["classes"] = r.info->n_classes;
    j["input"] = r.info->input_shape;
  } else if (r.logits) {
    j["logits"] = *r.logits;
  }
  return j.dump();
}

/// Best-effort id of a request line, for error replies to malformed input.
inline std::uint64_t peek_id(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.is_object() && j.contains("id") && j["id"].is_number_unsigned()) return j["id"].get<std::uint64_t>();
  } catch (const std::exception&) {
  }
  return 0;
}

inline Request decode_request(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("request must be a JSON object");
  if (!j.contains("id") || !j["id"].is_number_unsigned()) throw ProtocolError("request id must be an unsigned integer");
  if (!j.contains("op") || !j["op"].is_string()) throw ProtocolError("request op must be a string");
  const auto id = j["id"].get<std::uint64_t>();
  const auto op = j["op"].get<std::string>();
  if (op == "hello") return HelloRequest{id};
  if (op != "logits") throw ProtocolError("unknown op: " + op);
  if (!j.contains("dtype") || j["dtype"] != "f32") throw ProtocolError("dtype must be f32");
  if (!j.contains("shape") || !j["shape"].is_array() || j["shape"].size() != 4) throw ProtocolError("shape must be [N,C,H,W]");
  LogitsRequest r;
  r.id = id;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!j["shape"][k].is_number_unsigned()) throw ProtocolError("shape entries must be unsigned integers");
    r.shape[k] = j["shape"][k].get<std::size_t>();
  }
  if (!j.contains("data") || !j["data"].is_string()) throw ProtocolError("data must be a base64 string");
  const std::string raw = base64_decode(j["data"].get<std::string>());
  const std::size_t n = r.shape[0] * r.shape[1] * r.shape[2] * r.shape[3];
  if (raw.size() != n * sizeof(float)) throw ProtocolError("data length does not match shape");
  r.data.resize(n);
  std::memcpy(r.data.data(), raw.data(), raw.size());
  return r;
}

inline Response decode_response(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed JSON reply: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() || !j.contains("ok") || !j["ok"].is_boolean())
    throw ProtocolError("reply must carry id and ok");
  Response r;
  r.id = j["id"].get<std::uint64_t>();
  r.ok = j["ok"].get<bool>();
  if (!r.ok) {
    r.error = j.value("error", std::string("unspecified oracle error"));
    return r;
  }
  try {
    if (j.contains("classes")) {
      OracleInfo info;
      info.n_classes = j["classes"].get<std::size_t>();
      const auto in = j.at("input").get<std::vector<std::size_t>>();
      if (in.size() != 3) throw ProtocolError("input must be [C,H,W]");
      info.input_shape = {in[0], in[1], in[2]};
      r.info = info;
    } else if (j.contains("logits")) {
      r.logits = j["logits"].get<std::vector<LogitVector>>();
    } else {
      throw ProtocolError("reply carries neither classes nor logits");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed reply: ") + e.what());
  }
  return r;
}

/// Answers one request line with one response line using `oracle`.
/// Never throws for bad input; errors become ok:false replies.
inline std::string handle_line(Oracle& oracle, std::string_view line) {
  Response resp;
  try {
    const Request req = decode_request(line);
    if (const auto* h = std::get_if<HelloRequest>(&req)) {
      resp.id = h->id;
      resp.info = oracle.hello();
    } else {
      const auto& l = std::get<LogitsRequest>(req);
      resp.id = l.id;
      resp.logits = oracle.logits(images_of(l));
    }
  } catch (const std::exception& e) {
    resp = Response{};
    resp.id = peek_id(line);
    resp.ok = false;
    resp.error = e.what();
  }
  return encode(resp);
}

/// Serves requests from `in` until EOF.
inline void serve(Oracle& oracle, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_line(oracle, line) << '\n' << std::flush;
  }
}

}  // namespace hierxai::wire
