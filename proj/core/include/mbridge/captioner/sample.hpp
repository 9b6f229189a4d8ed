#pragma once

#include <cstdint>

#include "mbridge/numcore/tensor.hpp"
#include "mbridge/textae/vocabulary.hpp"

namespace mbridge {

/// Region features V [K×d_v] paired with a caption in decoder-facing form.
struct CaptionSample {
  std::int64_t scene_id = 0;
  Tensor regions;
  TokenSequence caption;
};

}  // namespace mbridge
