#include "mbridge/pipeline/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbridge/numcore/errors.hpp"

namespace mbridge::pipeline {

namespace {

using Json = nlohmann::ordered_json;
constexpr char kMagic[8] = {'M', 'B', 'R', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

class Payload {
 public:
  std::size_t append(std::span<const double> values) {
    const std::size_t offset = count_;
    for (double v : values) put_u64(bytes_, std::bit_cast<std::uint64_t>(v));
    count_ += values.size();
    return offset;
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
  std::size_t count_ = 0;
};

class PayloadReader {
 public:
  PayloadReader(const std::string& bytes, std::size_t begin) : bytes_(bytes), begin_(begin) {}

  std::vector<double> read(std::size_t offset, std::size_t count) const {
    if ((bytes_.size() - begin_) / 8 < offset + count) throw IoError("checkpoint payload is truncated");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<double>(get_u64(bytes_, begin_ + 8 * (offset + i)));
    return out;
  }

 private:
  const std::string& bytes_;
  std::size_t begin_;
};

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) { return serialize(a) == serialize(b); }

std::string serialize(const Checkpoint& c) {
  Payload payload;
  Json header;
  header["format_version"] = c.format_version;
  header["kind"] = c.kind;
  header["config"] = c.config_json.empty() ? Json::object() : Json::parse(c.config_json);
  header["vocabulary"] = c.vocabulary;
  Json tensors = Json::array();
  for (const auto& [name, t] : c.tensors) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", payload.append(t.data())}});
  }
  header["tensors"] = tensors;
  Json states = Json::array();
  for (const auto& [name, s] : c.adam) {
    Json entry;
    entry["name"] = name;
    entry["shape"] = s.m.shape();
    entry["step"] = s.step;
    entry["beta1"] = s.beta1;
    entry["beta2"] = s.beta2;
    entry["eps"] = s.eps;
    entry["m"] = payload.append(s.m.data());
    entry["v"] = payload.append(s.v.data());
    states.push_back(entry);
  }
  header["adam"] = {{"lr", c.adam_lr}, {"states", states}};
  header["rng_state"] = c.rng_state;
  header["epoch"] = c.epoch;
  Json trace;
  trace["columns"] = c.trace_columns;
  trace["rows"] = c.trace.size();
  std::size_t trace_offset = 0;
  bool first = true;
  for (const auto& row : c.trace) {
    if (row.size() != c.trace_columns.size()) throw DimensionError("trace row width differs from its columns");
    const auto off = payload.append(row);
    if (first) trace_offset = off;
    first = false;
  }
  trace["offset"] = trace_offset;
  header["trace"] = trace;

  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out += text;
  out += payload.bytes();
  return out;
}

Checkpoint deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw IoError("checkpoint header is truncated");
  Json header;
  try {
    header = Json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  const std::size_t payload_begin = 16 + header_len;
  if ((bytes.size() - payload_begin) % 8 != 0) throw IoError("checkpoint payload is not a whole number of f64");
  const PayloadReader payload(bytes, payload_begin);

  try {
    Checkpoint c;
    c.format_version = header.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion) {
      throw IoError("checkpoint format_version " + std::to_string(c.format_version) + " is not supported (expected " +
                    std::to_string(kCheckpointFormatVersion) + ")");
    }
    c.kind = header.at("kind").get<std::string>();
    c.config_json = header.at("config").dump();
    c.vocabulary = header.at("vocabulary").get<std::vector<std::string>>();
    for (const auto& t : header.at("tensors")) {
      const auto shape = t.at("shape").get<Shape>();
      c.tensors.emplace_back(t.at("name").get<std::string>(),
                             Tensor(shape, payload.read(t.at("offset").get<std::size_t>(), shape_size(shape))));
    }
    const auto& adam = header.at("adam");
    c.adam_lr = adam.at("lr").get<double>();
    for (const auto& s : adam.at("states")) {
      const auto shape = s.at("shape").get<Shape>();
      AdamState st;
      st.m = Tensor(shape, payload.read(s.at("m").get<std::size_t>(), shape_size(shape)));
      st.v = Tensor(shape, payload.read(s.at("v").get<std::size_t>(), shape_size(shape)));
      st.step = s.at("step").get<std::size_t>();
      st.lr = c.adam_lr;
      st.beta1 = s.at("beta1").get<double>();
      st.beta2 = s.at("beta2").get<double>();
      st.eps = s.at("eps").get<double>();
      c.adam.emplace(s.at("name").get<std::string>(), std::move(st));
    }
    c.rng_state = header.at("rng_state").get<std::string>();
    c.epoch = header.at("epoch").get<std::size_t>();
    const auto& trace = header.at("trace");
    c.trace_columns = trace.at("columns").get<std::vector<std::string>>();
    const auto rows = trace.at("rows").get<std::size_t>();
    const auto width = c.trace_columns.size();
    const auto all = payload.read(trace.at("offset").get<std::size_t>(), rows * width);
    for (std::size_t r = 0; r < rows; ++r) {
      c.trace.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(r * width),
                           all.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const DimensionError& e) {
    throw IoError(std::string("malformed checkpoint tensor: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void store_parameters(Checkpoint& checkpoint, const ParameterList& params) {
  for (const auto* p : params) checkpoint.tensors.emplace_back(p->name, p->value);
}

void restore_parameters(const Checkpoint& checkpoint, const ParameterList& params) {
  for (auto* p : params) {
    const auto it = std::find_if(checkpoint.tensors.begin(), checkpoint.tensors.end(),
                                 [p](const auto& entry) { return entry.first == p->name; });
    if (it == checkpoint.tensors.end()) throw InputError("checkpoint has no tensor '" + p->name + "'");
    if (it->second.shape() != p->value.shape()) {
      throw DimensionError("tensor '" + p->name + "' is " + shape_to_string(it->second.shape()) +
                           " in the checkpoint but " + shape_to_string(p->value.shape()) + " in the model");
    }
    p->value = it->second;
  }
}

void store_optimizer(Checkpoint& checkpoint, const Adam& adam) {
  checkpoint.adam_lr = adam.lr();
  checkpoint.adam = adam.states();
}

void restore_optimizer(const Checkpoint& checkpoint, Adam& adam) {
  auto& states = adam.states();
  for (auto& [name, state] : states) {
    const auto it = checkpoint.adam.find(name);
    if (it == checkpoint.adam.end()) throw InputError("checkpoint has no optimizer state for '" + name + "'");
    if (it->second.m.shape() != state.m.shape()) throw DimensionError("optimizer state shape differs for '" + name + "'");
    const double lr = state.lr;
    state = it->second;
    state.lr = lr;
  }
  adam.set_lr(checkpoint.adam_lr);
}

}  // namespace mbridge::pipeline
