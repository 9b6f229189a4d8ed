#include "mbridge/synthdata/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mbridge/numcore/errors.hpp"

namespace mbridge::synthdata {

namespace {

constexpr std::uint64_t kSceneStream = 0x5ce7e;
constexpr std::uint64_t kNoiseStream = 0x7015e;
constexpr std::uint64_t kBankStream = 0xba7c;
constexpr int kCells = kGridSize * kGridSize;

std::vector<std::vector<double>> gaussian_rows(Rng& rng, std::size_t rows, std::size_t width) {
  std::vector<std::vector<double>> out(rows, std::vector<double>(width));
  for (auto& r : out) {
    for (auto& v : r) v = rng.normal();
  }
  return out;
}

template <std::size_t N>
int lookup(const std::array<std::string_view, N>& table, const std::string& word) {
  for (std::size_t i = 0; i < N; ++i) {
    if (table[i] == word) return static_cast<int>(i);
  }
  return -1;
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

Scene generate_scene(std::uint64_t seed) {
  Rng rng(mix_seed(seed, kSceneStream));
  Scene scene;
  scene.seed = seed;
  const auto count = static_cast<std::size_t>(1 + rng.index(kMaxObjects));
  std::array<int, kCells> cells{};
  std::iota(cells.begin(), cells.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(kCells - i));
    std::swap(cells[i], cells[j]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    Object o;
    o.row = cells[i] / kGridSize;
    o.col = cells[i] % kGridSize;
    o.shape = static_cast<int>(rng.index(kShapes.size()));
    o.color = static_cast<int>(rng.index(kColors.size()));
    o.size = static_cast<int>(rng.index(kSizes.size()));
    scene.objects.push_back(o);
  }
  std::sort(scene.objects.begin(), scene.objects.end(),
            [](const Object& a, const Object& b) { return a.row * kGridSize + a.col < b.row * kGridSize + b.col; });
  return scene;
}

bool valid_scene(const Scene& scene) {
  if (scene.objects.empty() || scene.objects.size() > kMaxObjects) return false;
  int last = -1;
  for (const auto& o : scene.objects) {
    if (o.row < 0 || o.row >= kGridSize || o.col < 0 || o.col >= kGridSize) return false;
    if (o.shape < 0 || o.shape >= static_cast<int>(kShapes.size()) || o.color < 0 ||
        o.color >= static_cast<int>(kColors.size()) || o.size < 0 || o.size >= static_cast<int>(kSizes.size())) {
      return false;
    }
    const int cell = o.row * kGridSize + o.col;
    if (cell <= last) return false;
    last = cell;
  }
  return true;
}

FeatureBank::FeatureBank(std::uint64_t corpus_seed, std::size_t d_v) : d_v_(d_v), block_(d_v / 4) {
  if (d_v < 16) throw InputError("d_v must be at least 16, got " + std::to_string(d_v));
  Rng rng(mix_seed(corpus_seed, kBankStream));
  shape_ = gaussian_rows(rng, kShapes.size(), block_);
  color_ = gaussian_rows(rng, kColors.size(), block_);
  size_ = gaussian_rows(rng, kSizes.size(), block_);
  const std::size_t position = d_v - 3 * block_;
  row_ = gaussian_rows(rng, kGridSize, position / 2);
  col_ = gaussian_rows(rng, kGridSize, position - position / 2);
}

std::vector<double> FeatureBank::embed(const Object& o) const {
  std::vector<double> row;
  row.reserve(d_v_);
  const auto append = [&row](const std::vector<double>& v) { row.insert(row.end(), v.begin(), v.end()); };
  append(shape_.at(static_cast<std::size_t>(o.shape)));
  append(color_.at(static_cast<std::size_t>(o.color)));
  append(size_.at(static_cast<std::size_t>(o.size)));
  append(row_.at(static_cast<std::size_t>(o.row)));
  append(col_.at(static_cast<std::size_t>(o.col)));
  return row;
}

Tensor featurize(const Scene& scene, const FeatureBank& bank, double noise_sigma) {
  if (scene.objects.empty()) throw InputError("scene has no objects");
  Rng rng(mix_seed(scene.seed, kNoiseStream));
  Tensor out({scene.objects.size(), bank.d_v()});
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto base = bank.embed(scene.objects[k]);
    auto dst = out.row(k);
    for (std::size_t j = 0; j < base.size(); ++j) {
      dst[j] = base[j];
      if (noise_sigma != 0.0) dst[j] += noise_sigma * rng.normal();
    }
  }
  return out;
}

std::vector<std::string> caption_words(const Scene& scene) {
  std::vector<std::string> words;
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const auto& o = scene.objects[k];
    if (k > 0) words.emplace_back("and");
    words.emplace_back("a");
    words.emplace_back(kSizes.at(static_cast<std::size_t>(o.size)));
    words.emplace_back(kColors.at(static_cast<std::size_t>(o.color)));
    words.emplace_back(kShapes.at(static_cast<std::size_t>(o.shape)));
  }
  return words;
}

TokenSequence caption_of(const Scene& scene, const Vocabulary& vocab) {
  return vocab.encode_caption(caption_words(scene));
}

std::vector<ParsedObject> parse_caption(const std::vector<std::string>& words) {
  std::vector<ParsedObject> out;
  std::size_t i = 0;
  const auto fail = [&words](const std::string& why) {
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    return InputError("not a scene caption (" + why + "): \"" + text + "\"");
  };
  while (true) {
    if (i + 4 > words.size()) throw fail("truncated object phrase");
    if (words[i] != "a") throw fail("expected 'a'");
    ParsedObject p;
    p.size = lookup(kSizes, words[i + 1]);
    p.color = lookup(kColors, words[i + 2]);
    p.shape = lookup(kShapes, words[i + 3]);
    if (p.size < 0 || p.color < 0 || p.shape < 0) throw fail("unknown attribute");
    out.push_back(p);
    i += 4;
    if (i == words.size()) break;
    if (words[i] != "and") throw fail("expected 'and'");
    ++i;
  }
  if (out.size() > kMaxObjects) throw fail("too many objects");
  return out;
}

Vocabulary synthetic_vocabulary() {
  std::vector<std::string> words{"a", "and"};
  for (auto w : kShapes) words.emplace_back(w);
  for (auto w : kColors) words.emplace_back(w);
  for (auto w : kSizes) words.emplace_back(w);
  return Vocabulary::from_words(words);
}

std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw InputError("split ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("split ratios must sum to 1");
  const auto round_count = [n](double r) {
    return static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
  };
  const std::size_t train = std::min(n, round_count(ratios[0]));
  const std::size_t val = std::min(n - train, round_count(ratios[1]));
  return {train, val, n - train - val};
}

std::vector<CaptionSample> generate_samples(const CorpusConfig& config, const Vocabulary& vocab) {
  const FeatureBank bank(config.seed, config.d_v);
  std::vector<CaptionSample> out;
  out.reserve(config.n_scenes);
  for (std::size_t i = 0; i < config.n_scenes; ++i) {
    const Scene scene = generate_scene(mix_seed(config.seed, i));
    out.push_back(CaptionSample{static_cast<std::int64_t>(i), featurize(scene, bank, config.noise_sigma),
                                caption_of(scene, vocab)});
  }
  return out;
}

std::string sample_to_json(const CaptionSample& sample, const Vocabulary& vocab) {
  std::string line = "{\"scene_id\":" + std::to_string(sample.scene_id) + ",\"features\":[";
  for (std::size_t k = 0; k < sample.regions.rows(); ++k) {
    if (k > 0) line += ',';
    line += '[';
    const auto row = sample.regions.row(k);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) line += ',';
      append_double(line, row[j]);
    }
    line += ']';
  }
  line += ']';
  if (!sample.caption.ids.empty()) {
    line += ",\"caption\":" + nlohmann::json(vocab.decode(sample.caption.ids)).dump();
  }
  line += '}';
  return line;
}

void write_split(const std::filesystem::path& path, const std::vector<CaptionSample>& samples,
                 const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : samples) out << sample_to_json(s, vocab) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<CaptionSample> read_split(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CaptionSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
    try {
      CaptionSample s;
      s.scene_id = rec.at("scene_id").get<std::int64_t>();
      const auto& feats = rec.at("features");
      if (!feats.is_array() || feats.empty()) throw InputError(where + ": features must be a non-empty array");
      const std::size_t d = feats.front().size();
      std::vector<double> flat;
      for (const auto& row : feats) {
        if (!row.is_array() || row.size() != d || d == 0) throw InputError(where + ": ragged features");
        for (const auto& v : row) {
          const double x = v.get<double>();
          if (!std::isfinite(x)) throw InputError(where + ": non-finite feature");
          flat.push_back(x);
        }
      }
      s.regions = Tensor({feats.size(), d}, std::move(flat));
      if (rec.contains("caption")) {
        s.caption = vocab.encode_caption(rec.at("caption").get<std::vector<std::string>>());
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path build_corpus(const CorpusConfig& config, const std::filesystem::path& dir) {
  if (config.n_scenes == 0) throw InputError("n_scenes must be positive");
  if (config.d_v < 16) throw InputError("d_v must be at least 16, got " + std::to_string(config.d_v));
  if (!(config.noise_sigma >= 0.0)) throw InputError("noise_sigma must be nonnegative");
  const auto counts = split_counts(config.n_scenes, config.ratios);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const Vocabulary vocab = synthetic_vocabulary();
  const auto samples = generate_samples(config, vocab);
  const std::array<const char*, 3> names{"train", "val", "test"};
  std::size_t begin = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::vector<CaptionSample> part(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                          samples.begin() + static_cast<std::ptrdiff_t>(begin + counts[s]));
    write_split(dir / (std::string(names[s]) + ".jsonl"), part, vocab);
    begin += counts[s];
  }

  nlohmann::ordered_json manifest;
  manifest["generator"] = "mbridge-synthdata";
  manifest["version"] = kGeneratorVersion;
  manifest["seed"] = config.seed;
  manifest["d_v"] = config.d_v;
  manifest["noise_sigma"] = config.noise_sigma;
  manifest["counts"] = {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}};
  manifest["vocabulary"] = vocab.tokens();
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
  return path;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<int>();
    m.d_v = j.at("d_v").get<std::size_t>();
    m.noise_sigma = j.at("noise_sigma").get<double>();
    const auto& c = j.at("counts");
    m.counts = {c.at("train").get<std::size_t>(), c.at("val").get<std::size_t>(), c.at("test").get<std::size_t>()};
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace mbridge::synthdata
