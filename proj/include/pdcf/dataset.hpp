#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pdcf/image_io.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf {

/// One training sample: degraded input and reference target, both
/// (1, 3, H, W) in [0,1] with identical shape.
struct ImagePair {
    Tensor raw;
    Tensor ref;
    std::string id;
};

namespace dataset_detail {

inline bool supported_image(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm";
}

}  // namespace dataset_detail

/// Sorted (stem, path) listing of the supported images in a directory.
inline std::vector<std::pair<std::string, std::string>> list_images(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError(dir + " is not a directory");
    std::map<std::string, std::string> by_stem;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        if (!dataset_detail::supported_image(p)) continue;
        const std::string stem = p.stem().string();
        if (by_stem.count(stem)) {
            throw DataError(dir + ": duplicate image stem " + stem);
        }
        by_stem[stem] = p.string();
    }
    return {by_stem.begin(), by_stem.end()};
}

/// Loads the paired dataset under `root`, which must contain raw/ and ref/
/// subdirectories with images matched by filename stem. Every image is
/// decoded to [0,1] and resized to size x size. Pairs come back in
/// lexicographic stem order; unmatched files are reported to `warn` and
/// skipped.
inline std::vector<ImagePair> load_dataset(const std::string& root, int size,
                                           std::ostream* warn = nullptr) {
    namespace fs = std::filesystem;
    const std::string raw_dir = (fs::path(root) / "raw").string();
    const std::string ref_dir = (fs::path(root) / "ref").string();
    if (!fs::is_directory(raw_dir) || !fs::is_directory(ref_dir)) {
        throw DataError(root + " must contain raw/ and ref/ subdirectories");
    }
    const auto raws = list_images(raw_dir);
    const auto refs = list_images(ref_dir);
    std::map<std::string, std::string> ref_by_stem(refs.begin(), refs.end());

    std::vector<ImagePair> pairs;
    for (const auto& [stem, raw_path] : raws) {
        auto it = ref_by_stem.find(stem);
        if (it == ref_by_stem.end()) {
            if (warn) *warn << "warning: " << raw_path << " has no matching reference, skipped\n";
            continue;
        }
        ImagePair pair;
        pair.id = stem;
        bool dropped = false;
        pair.raw = io::resize_bilinear(io::to_tensor(io::load_image(raw_path, &dropped)), size, size);
        if (dropped && warn) *warn << "warning: " << raw_path << ": alpha channel dropped\n";
        pair.ref = io::resize_bilinear(io::to_tensor(io::load_image(it->second, &dropped)), size, size);
        if (dropped && warn) *warn << "warning: " << it->second << ": alpha channel dropped\n";
        pairs.push_back(std::move(pair));
        ref_by_stem.erase(it);
    }
    for (const auto& [stem, ref_path] : ref_by_stem) {
        if (warn) *warn << "warning: " << ref_path << " has no matching raw image, skipped\n";
    }
    if (pairs.empty()) {
        throw DataError(root + ": no matching raw/ref image pairs found");
    }
    return pairs;
}

}  // namespace pdcf
