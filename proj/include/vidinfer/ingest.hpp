#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vidinfer/types.hpp"

namespace vidinfer::ingest {

struct Manifest {
    std::string dataset_name;
    std::vector<VideoManifestEntry> entries;
};

// observed = max(1, floor(rho * frame_count)); the observed frames are the
// temporal prefix. Throws on rho outside (0, 1].
int truncate_prefix(int frame_count, double rho);

// Midpoint-rule uniform sampling: index i of m = min(budget, observed_count)
// frames is floor((i + 0.5) * observed_count / m).
FrameSet uniform_sample(int observed_count, int budget, const std::string& video_id = "");

// Midpoint rule applied to the positions of an existing FrameSet.
FrameSet subsample(const FrameSet& frames, int l);

// Manifest file: one JSON object per line with fields video_id, frame_dir,
// frame_count, ground_truth, task, rho; an optional leading {"dataset_name":..}
// header line names the dataset. Relative frame_dir resolves against the
// manifest's directory.
Manifest load_manifest(const std::string& path);

// Sorted frame files of a directory; position in the sorted list is the
// temporal index (files are named by zero-padded index).
class FrameDir {
  public:
    explicit FrameDir(const std::filesystem::path& dir);
    const std::filesystem::path& at(int temporal_index) const;
    int count() const { return static_cast<int>(files_.size()); }

  private:
    std::vector<std::filesystem::path> files_;
    std::filesystem::path dir_;
};

}  // namespace vidinfer::ingest
