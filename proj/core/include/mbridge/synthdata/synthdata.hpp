#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mbridge/captioner/sample.hpp"
#include "mbridge/numcore/rng.hpp"
#include "mbridge/numcore/tensor.hpp"
#include "mbridge/textae/vocabulary.hpp"

namespace mbridge::synthdata {

inline constexpr int kGridSize = 4;
inline constexpr std::size_t kMaxObjects = 4;
inline constexpr int kGeneratorVersion = 1;

inline constexpr std::array<std::string_view, 3> kShapes{"circle", "square", "triangle"};
inline constexpr std::array<std::string_view, 4> kColors{"red", "blue", "green", "yellow"};
inline constexpr std::array<std::string_view, 2> kSizes{"small", "large"};

struct Object {
  int shape = 0;  // index into kShapes
  int color = 0;
  int size = 0;
  int row = 0;
  int col = 0;

  friend bool operator==(const Object&, const Object&) = default;
};

/// Objects are kept in row-major grid order.
struct Scene {
  std::uint64_t seed = 0;
  std::vector<Object> objects;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Draw order from one stream of `seed`: object count in [1, 4], then the
/// cells (partial Fisher-Yates over the 16 cells in row-major order), then
/// shape, color, size per object in cell-draw order.
Scene generate_scene(std::uint64_t seed);

/// True when the scene has 1..4 objects on distinct in-grid cells in
/// row-major order.
bool valid_scene(const Scene& scene);

/// Fixed attribute embeddings for one corpus. d_v splits into shape, color,
/// size and position blocks of d_v/4 columns each, the position block taking
/// the remainder. The position block is a row embedding followed by a column
/// embedding. Entries are standard normal.
class FeatureBank {
 public:
  /// Throws InputError when d_v < 16.
  FeatureBank(std::uint64_t corpus_seed, std::size_t d_v);

  std::size_t d_v() const { return d_v_; }
  std::size_t block_width() const { return block_; }
  /// Region row for an object with no noise.
  std::vector<double> embed(const Object& object) const;

 private:
  std::size_t d_v_;
  std::size_t block_;
  std::vector<std::vector<double>> shape_, color_, size_, row_, col_;
};

/// One row per object (scene order) plus N(0, noise_sigma²) noise drawn from
/// a stream of the scene seed.
Tensor featurize(const Scene& scene, const FeatureBank& bank, double noise_sigma);

/// "a {size} {color} {shape}" per object joined with "and" (content words
/// only; no specials).
std::vector<std::string> caption_words(const Scene& scene);
/// caption_words wrapped in `<bos>`/`<eos>`.
TokenSequence caption_of(const Scene& scene, const Vocabulary& vocab);

struct ParsedObject {
  int shape = 0;
  int color = 0;
  int size = 0;

  friend auto operator<=>(const ParsedObject&, const ParsedObject&) = default;
};

/// Inverse of the caption grammar. Throws InputError on any other sentence.
std::vector<ParsedObject> parse_caption(const std::vector<std::string>& words);

/// Every terminal of the caption grammar.
Vocabulary synthetic_vocabulary();

struct CorpusConfig {
  std::size_t n_scenes = 1000;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  std::size_t d_v = 32;
  double noise_sigma = 0.1;
};

/// Split sizes: train and val rounded to nearest, test takes the rest.
/// Throws InputError when ratios are negative or do not sum to 1.
std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& ratios);

/// Samples of scene ids [0, n) in id order.
std::vector<CaptionSample> generate_samples(const CorpusConfig& config, const Vocabulary& vocab);

/// Writes train.jsonl, val.jsonl, test.jsonl and manifest.json under `dir`
/// (created when missing); consecutive scene ids go to train, val, test.
/// Returns the manifest path. Throws InputError for n_scenes = 0 or d_v < 16
/// and IoError when a file cannot be written.
std::filesystem::path build_corpus(const CorpusConfig& config, const std::filesystem::path& dir);

/// One JSONL record with floats in 17 significant digits.
std::string sample_to_json(const CaptionSample& sample, const Vocabulary& vocab);
void write_split(const std::filesystem::path& path, const std::vector<CaptionSample>& samples,
                 const Vocabulary& vocab);
/// Reads records written by write_split. A record without "caption" gets an
/// empty caption. Throws IoError when unreadable and InputError on a
/// malformed record or ragged features.
std::vector<CaptionSample> read_split(const std::filesystem::path& path, const Vocabulary& vocab);

struct Manifest {
  std::uint64_t seed = 0;
  int version = 0;
  std::size_t d_v = 0;
  double noise_sigma = 0.0;
  std::array<std::size_t, 3> counts{};
  std::vector<std::string> vocabulary;  // id order, specials included
};
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace mbridge::synthdata
