#include "vidinfer/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace vidinfer::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

int truncate_prefix(int frame_count, double rho) {
    if (frame_count < 1) throw std::invalid_argument("truncate_prefix: frame_count must be >= 1");
    if (!(rho > 0.0) || rho > 1.0)
        throw std::invalid_argument("truncate_prefix: rho must be in (0, 1]");
    const int observed = static_cast<int>(std::floor(rho * frame_count));
    return std::max(1, observed);
}

FrameSet uniform_sample(int observed_count, int budget, const std::string& video_id) {
    if (observed_count < 1) throw std::invalid_argument("uniform_sample: observed_count must be >= 1");
    if (budget < 1) throw std::invalid_argument("uniform_sample: budget must be >= 1");
    const int m = std::min(budget, observed_count);
    FrameSet out;
    out.video_id = video_id;
    out.stage = FrameStage::sampled_N;
    out.indices.reserve(m);
    for (int i = 0; i < m; ++i) {
        const auto idx = static_cast<int>(
            std::floor((i + 0.5) * static_cast<double>(observed_count) / m));
        out.indices.push_back(std::min(idx, observed_count - 1));
    }
    return out;
}

FrameSet subsample(const FrameSet& frames, int l) {
    if (frames.indices.empty()) throw std::invalid_argument("subsample: empty frame set");
    if (l < 1) throw std::invalid_argument("subsample: L must be >= 1");
    const int n = static_cast<int>(frames.indices.size());
    const FrameSet positions = uniform_sample(n, l, frames.video_id);
    FrameSet out;
    out.video_id = frames.video_id;
    out.stage = FrameStage::subsampled_L;
    out.indices.reserve(positions.indices.size());
    for (const int p : positions.indices) out.indices.push_back(frames.indices[p]);
    return out;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("manifest: cannot open '" + path + "'");
    const fs::path base = fs::path(path).parent_path();

    Manifest manifest;
    std::set<std::string> seen;
    std::vector<std::string> problems;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) +
                                     ": parse failure: " + e.what());
        }
        if (j.contains("dataset_name") && !j.contains("video_id")) {
            manifest.dataset_name = j.at("dataset_name").get<std::string>();
            continue;
        }
        VideoManifestEntry entry;
        try {
            entry.video_id = j.at("video_id").get<std::string>();
            entry.frame_dir = j.at("frame_dir").get<std::string>();
            entry.frame_count = j.at("frame_count").get<int>();
            entry.ground_truth = j.at("ground_truth").get<std::string>();
            const auto task = task_from_string(j.at("task").get<std::string>());
            if (!task) throw std::runtime_error("unknown task '" + j.at("task").get<std::string>() + "'");
            entry.task = TaskSpec::for_task(*task);
            entry.rho = j.at("rho").get<double>();
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest: line " + std::to_string(lineno) + ": " + e.what());
        }

        if (!seen.insert(entry.video_id).second)
            problems.push_back("duplicate video_id '" + entry.video_id + "'");
        if (entry.frame_count < 1)
            problems.push_back(entry.video_id + ": frame_count must be >= 1");
        if (!(entry.rho > 0.0) || entry.rho > 1.0)
            problems.push_back(entry.video_id + ": rho must be in (0, 1]");

        fs::path dir = entry.frame_dir;
        if (dir.is_relative()) dir = base / dir;
        entry.frame_dir = dir.string();
        if (!fs::is_directory(dir))
            problems.push_back(entry.video_id + ": unreadable frame_dir '" + dir.string() + "'");

        manifest.entries.push_back(std::move(entry));
    }
    if (!problems.empty()) {
        std::string msg = "manifest: " + std::to_string(problems.size()) + " problem(s):";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }
    if (manifest.dataset_name.empty())
        manifest.dataset_name = fs::path(path).stem().string();
    return manifest;
}

FrameDir::FrameDir(const fs::path& dir) : dir_(dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("frames: unreadable frame_dir '" + dir.string() + "'");
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files_.push_back(entry.path());
    std::sort(files_.begin(), files_.end());
    if (files_.empty())
        throw std::runtime_error("frames: no frame files in '" + dir.string() + "'");
}

const fs::path& FrameDir::at(int temporal_index) const {
    if (temporal_index < 0 || temporal_index >= count())
        throw std::out_of_range("frames: index " + std::to_string(temporal_index) +
                                " out of range for '" + dir_.string() + "'");
    return files_[static_cast<std::size_t>(temporal_index)];
}

}  // namespace vidinfer::ingest
