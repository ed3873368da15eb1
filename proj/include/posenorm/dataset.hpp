#pragma once

#include <string>
#include <vector>

#include "posenorm/image.hpp"
#include "posenorm/pose_skeleton.hpp"

namespace posenorm {

enum class Split { train, query, gallery };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct DataSample {
    PersonImage image;
    KeypointSet keypoints;
    PoseImage pose;  // rasterized keypoints, same dims as image
    int identity = 0;
    int camera = 0;
    std::string sample_id;
    Split split = Split::train;
};

struct Dataset {
    std::vector<DataSample> samples;
    int n_identities = 0;
    int n_cameras = 0;
    int h = 0;
    int w = 0;

    std::vector<int> indices_of(Split s) const;
    void validate() const;
};

// Training-split samples grouped by identity; the sampling domain for
// generator training pairs and the classifier training set.
struct TrainView {
    const Dataset* dataset = nullptr;
    std::vector<int> identity_ids;               // identities present in the split
    std::vector<std::vector<int>> by_identity;   // sample indices per identity

    static TrainView from_split(const Dataset& ds, Split split = Split::train);
    int total_images() const;
};

}  // namespace posenorm
