#include "lsiq/idm.hpp"

#include <algorithm>

namespace lsiq {

void InverseDynamicsModel::update(std::span<const Transition> batch) {
    if (action_totals_.empty()) action_totals_.assign(static_cast<std::size_t>(n_actions_), 0);
    for (const Transition& t : batch) {
        auto& row = counts_[key(t.s, t.s_next)];
        if (row.empty()) row.assign(static_cast<std::size_t>(n_actions_), 0);
        row[static_cast<std::size_t>(t.a)] += 1;
        action_totals_[static_cast<std::size_t>(t.a)] += 1;
        total_ += 1;
    }
}

void InverseDynamicsModel::add_count(int s, int s_next, int a, long count) {
    if (action_totals_.empty()) action_totals_.assign(static_cast<std::size_t>(n_actions_), 0);
    auto& row = counts_[key(s, s_next)];
    if (row.empty()) row.assign(static_cast<std::size_t>(n_actions_), 0);
    row[static_cast<std::size_t>(a)] += count;
    action_totals_[static_cast<std::size_t>(a)] += count;
    total_ += count;
}

InverseDynamicsModel::Prediction InverseDynamicsModel::predict(int s, int s_next) const {
    if (total_ == 0) throw UntrainedModelError("inverse dynamics model has no observations");
    auto it = counts_.find(key(s, s_next));
    const std::vector<long>& row = it != counts_.end() ? it->second : action_totals_;
    int best = 0;
    for (int a = 1; a < n_actions_; ++a)
        if (row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(best)]) best = a;
    return Prediction{best, it != counts_.end()};
}

bool InverseDynamicsModel::covered(int s, int s_next) const {
    return counts_.find(key(s, s_next)) != counts_.end();
}

std::vector<std::array<long, 4>> InverseDynamicsModel::count_entries() const {
    std::vector<std::array<long, 4>> rows;
    for (const auto& [k, row] : counts_) {
        int s = static_cast<int>(k >> 32);
        int s_next = static_cast<int>(k & 0xffffffffULL);
        for (int a = 0; a < n_actions_; ++a)
            if (row[static_cast<std::size_t>(a)] > 0)
                rows.push_back({s, s_next, a, row[static_cast<std::size_t>(a)]});
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

}  // namespace lsiq
