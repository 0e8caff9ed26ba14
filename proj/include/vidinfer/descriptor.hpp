#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vidinfer/backends.hpp"
#include "vidinfer/types.hpp"

namespace vidinfer::descriptor {

// Resolves a temporal frame index to its file path.
using FrameResolver = std::function<std::filesystem::path(int)>;

// One caption per frame in temporal order; backend failures are rethrown with
// the offending frame index attached.
std::vector<Caption> caption_frameset(const FrameSet& frames, const FrameResolver& resolve,
                                      backends::Captioner& captioner, const std::string& prompt);

// Global exact-string dedup (first occurrence kept), then captions joined as
// "<c1>, then, <c2>, ...". A caption containing the separator itself is
// normalized by collapsing ", then, " to ", then " before joining.
Description build_description(const std::vector<Caption>& captions);

// Inverse of the join; used by the round-trip properties.
std::vector<std::string> split_description(const std::string& text);

}  // namespace vidinfer::descriptor
