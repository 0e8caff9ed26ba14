#include "vidinfer/descriptor.hpp"

#include <set>
#include <stdexcept>

namespace vidinfer::descriptor {

namespace {

const std::string kSeparator = ", then, ";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string normalize_caption(std::string text) {
    std::size_t pos = 0;
    while ((pos = text.find(kSeparator, pos)) != std::string::npos)
        text.replace(pos, kSeparator.size(), ", then ");
    return text;
}

}  // namespace

std::vector<Caption> caption_frameset(const FrameSet& frames, const FrameResolver& resolve,
                                      backends::Captioner& captioner, const std::string& prompt) {
    if (frames.indices.empty()) throw std::invalid_argument("caption_frameset: empty frame set");
    std::vector<Caption> out;
    out.reserve(frames.indices.size());
    for (const int idx : frames.indices) {
        try {
            Caption c = captioner.caption_frame(resolve(idx), prompt);
            c.frame_index = idx;
            c.text = trim(c.text);
            out.push_back(std::move(c));
        } catch (const std::exception& e) {
            throw std::runtime_error("caption_frameset: frame " + std::to_string(idx) + ": " +
                                     e.what());
        }
    }
    return out;
}

Description build_description(const std::vector<Caption>& captions) {
    if (captions.empty()) throw std::invalid_argument("build_description: no captions");
    Description d;
    std::set<std::string> seen;
    for (const auto& c : captions) {
        const std::string text = normalize_caption(trim(c.text));
        if (text.empty()) continue;
        if (!seen.insert(text).second) continue;  // global dedup, first occurrence kept
        if (!d.text.empty()) d.text += kSeparator;
        d.text += text;
        d.source_frames.push_back(c.frame_index);
    }
    if (d.text.empty())
        throw std::invalid_argument("build_description: all captions empty after trimming");
    return d;
}

std::vector<std::string> split_description(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(kSeparator, start);
        if (pos == std::string::npos) {
            out.push_back(text.substr(start));
            return out;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + kSeparator.size();
    }
}

}  // namespace vidinfer::descriptor
