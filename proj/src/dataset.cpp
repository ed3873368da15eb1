#include "posenorm/dataset.hpp"

#include <map>
#include <stdexcept>

namespace posenorm {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::query: return "query";
        default: return "gallery";
    }
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "query") return Split::query;
    if (name == "gallery") return Split::gallery;
    throw std::invalid_argument("unknown split name '" + name + "'");
}

std::vector<int> Dataset::indices_of(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(samples.size()); ++i)
        if (samples[static_cast<size_t>(i)].split == s) out.push_back(i);
    return out;
}

void Dataset::validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset: no samples");
    std::map<int, int> train_count;
    for (const auto& s : samples) {
        if (s.image.h != h || s.image.w != w)
            throw std::invalid_argument("dataset: sample " + s.sample_id + " has wrong dims");
        if (!s.pose.same_dims(s.image))
            throw std::invalid_argument("dataset: sample " + s.sample_id + " pose dims mismatch");
        if (s.identity < 0 || s.identity >= n_identities)
            throw std::invalid_argument("dataset: sample " + s.sample_id + " identity out of range");
        if (s.split == Split::train) train_count[s.identity]++;
    }
    for (int id = 0; id < n_identities; ++id)
        if (train_count[id] == 0)
            throw std::invalid_argument("dataset: identity " + std::to_string(id) +
                                        " has no keypoint-bearing training images");
}

TrainView TrainView::from_split(const Dataset& ds, Split split) {
    TrainView view;
    view.dataset = &ds;
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i)
        if (ds.samples[static_cast<size_t>(i)].split == split)
            groups[ds.samples[static_cast<size_t>(i)].identity].push_back(i);
    for (auto& [id, idxs] : groups) {
        view.identity_ids.push_back(id);
        view.by_identity.push_back(std::move(idxs));
    }
    return view;
}

int TrainView::total_images() const {
    int n = 0;
    for (const auto& g : by_identity) n += static_cast<int>(g.size());
    return n;
}

}  // namespace posenorm
