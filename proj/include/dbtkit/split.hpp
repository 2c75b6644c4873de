#ifndef DBTKIT_SPLIT_HPP
#define DBTKIT_SPLIT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dbtkit/rng.hpp"
#include "dbtkit/types.hpp"

namespace dbtkit {

/// How many patients of a group go to validation and test; remainder trains.
struct SplitCounts {
    int val = 0;
    int test = 0;
};

/// Either explicit per-group counts or global proportions applied per group.
struct SplitPlan {
    std::optional<std::map<CohortGroup, SplitCounts>> counts;
    double train_frac = 0.8;
    double val_frac = 0.1;
    double test_frac = 0.1;

    static SplitPlan proportions(double train, double val, double test) {
        SplitPlan p;
        p.train_frac = train;
        p.val_frac = val;
        p.test_frac = test;
        return p;
    }
    static SplitPlan per_group(std::map<CohortGroup, SplitCounts> c) {
        SplitPlan p;
        p.counts = std::move(c);
        return p;
    }
};

struct SplitResult {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

namespace detail {

inline int count_masses(const CohortEntry& e) {
    return static_cast<int>(
        std::count(e.lesion_kinds.begin(), e.lesion_kinds.end(), LesionKind::mass));
}

// Pick `k` entries from `pool` (consumed) whose mass fraction tracks
// `target_ratio` of the whole group. At each step takes the candidate that
// keeps |masses - target * lesions| smallest, first-in-shuffled-order on ties.
inline std::vector<const CohortEntry*> stratified_pick(std::vector<const CohortEntry*>& pool,
                                                       int k, double target_ratio) {
    std::vector<const CohortEntry*> picked;
    int sel_mass = 0, sel_lesions = 0;
    for (int step = 0; step < k; ++step) {
        std::size_t best = 0;
        double best_dev = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const int m = sel_mass + count_masses(*pool[i]);
            const int l = sel_lesions + static_cast<int>(pool[i]->lesion_kinds.size());
            const double dev = std::abs(m - target_ratio * l);
            if (dev < best_dev) {
                best_dev = dev;
                best = i;
            }
        }
        sel_mass += count_masses(*pool[best]);
        sel_lesions += static_cast<int>(pool[best]->lesion_kinds.size());
        picked.push_back(pool[best]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return picked;
}

}  // namespace detail

/// Patient-level split: every patient lands in exactly one subset, all of a
/// patient's studies travel with them, and the biopsied groups keep the
/// mass:AD mix of validation/test close to the group-wide ratio.
inline SplitResult split_cohort(const std::vector<CohortEntry>& entries, const SplitPlan& plan,
                                std::uint64_t seed) {
    for (const auto& e : entries) e.validate();
    {
        std::set<std::string> seen;
        for (const auto& e : entries)
            if (!seen.insert(e.patient_id).second)
                throw std::invalid_argument("duplicate patient_id: " + e.patient_id);
    }

    SplitResult result;
    constexpr std::array<CohortGroup, 4> groups = {CohortGroup::normal, CohortGroup::actionable,
                                                   CohortGroup::benign, CohortGroup::cancer};
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const CohortGroup group = groups[gi];
        std::vector<const CohortEntry*> pool;
        for (const auto& e : entries)
            if (e.group == group) pool.push_back(&e);
        if (pool.empty()) continue;

        // Canonical order first so the shuffle alone decides the outcome.
        std::sort(pool.begin(), pool.end(),
                  [](const CohortEntry* a, const CohortEntry* b) {
                      return a->patient_id < b->patient_id;
                  });
        Rng rng = Rng::derive(seed, gi);
        rng.shuffle(pool);

        const int n = static_cast<int>(pool.size());
        int n_val, n_test;
        if (plan.counts) {
            auto it = plan.counts->find(group);
            n_val = it == plan.counts->end() ? 0 : it->second.val;
            n_test = it == plan.counts->end() ? 0 : it->second.test;
        } else {
            n_val = static_cast<int>(std::lround(n * plan.val_frac));
            n_test = static_cast<int>(std::lround(n * plan.test_frac));
        }
        if (n_val < 0 || n_test < 0 || n_val + n_test > n)
            throw std::invalid_argument("group " + to_string(group) + " has " +
                                        std::to_string(n) + " patients, requested val=" +
                                        std::to_string(n_val) + " test=" +
                                        std::to_string(n_test));

        const bool biopsied = group == CohortGroup::benign || group == CohortGroup::cancer;
        std::vector<const CohortEntry*> val_picked, test_picked;
        if (biopsied) {
            int total_mass = 0, total_lesions = 0;
            for (const auto* e : pool) {
                total_mass += detail::count_masses(*e);
                total_lesions += static_cast<int>(e->lesion_kinds.size());
            }
            const double ratio =
                total_lesions > 0 ? static_cast<double>(total_mass) / total_lesions : 0.0;
            val_picked = detail::stratified_pick(pool, n_val, ratio);
            test_picked = detail::stratified_pick(pool, n_test, ratio);
        } else {
            val_picked.assign(pool.begin(), pool.begin() + n_val);
            test_picked.assign(pool.begin() + n_val, pool.begin() + n_val + n_test);
            pool.erase(pool.begin(), pool.begin() + n_val + n_test);
        }
        for (const auto* e : val_picked) result.val.push_back(e->patient_id);
        for (const auto* e : test_picked) result.test.push_back(e->patient_id);
        for (const auto* e : pool) result.train.push_back(e->patient_id);
    }
    return result;
}

}  // namespace dbtkit

#endif  // DBTKIT_SPLIT_HPP
