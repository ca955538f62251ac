#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "srfm/config.hpp"
#include "srfm/record.hpp"

namespace srfm {

// Latent trait width of the generator's hidden user/item/query vectors.
constexpr int kTraitDim = 6;

namespace synth_detail {

using TraitVec = std::array<double, kTraitDim>;

inline double dot(const TraitVec& a, const TraitVec& b) {
    double s = 0.0;
    for (int i = 0; i < kTraitDim; ++i) s += a[i] * b[i];
    return s;
}

inline TraitVec gaussian(std::mt19937_64& rng, double stddev = 1.0) {
    std::normal_distribution<double> d(0.0, stddev);
    TraitVec v;
    for (double& x : v) x = d(rng);
    return v;
}

inline TraitVec unit(std::mt19937_64& rng) {
    TraitVec v = gaussian(rng);
    double n = std::sqrt(dot(v, v));
    for (double& x : v) x /= (n > 0 ? n : 1.0);
    return v;
}

// Picks an intercept so that mean sigmoid(logit + intercept) hits `target`.
inline double calibrate_intercept(const std::vector<double>& logits, double target) {
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        double mean = 0.0;
        for (double z : logits) mean += 1.0 / (1.0 + std::exp(-(z + mid)));
        mean /= static_cast<double>(logits.size());
        (mean < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct ItemInfo {
    long long id;
    TraitVec base_trait;              // shared, drives title words
    std::vector<std::string> title_words;
};

}  // namespace synth_detail

struct SynthDataset {
    // domain (1-based) -> split -> serialized record lines
    std::map<int, std::map<std::string, std::vector<InteractionRecord>>> by_domain;
};

// Deterministic synthetic multi-domain click log. Item titles are drawn from
// trait-correlated vocabulary, so text carries signal that survives the
// per-domain trait translation applied to IDs and sparse features.
inline SynthDataset generate_dataset(const SynthConfig& cfg) {
    using namespace synth_detail;
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);

    // Word bank: each word has a latent trait direction.
    const int n_words = 400;
    std::vector<TraitVec> word_traits;
    std::vector<std::string> words;
    for (int w = 0; w < n_words; ++w) {
        word_traits.push_back(unit(rng));
        words.push_back("w" + std::to_string(w));
    }

    // Per-domain shift directions; domain 1 is the unshifted reference.
    std::vector<TraitVec> shift_dir(cfg.K + 1);
    shift_dir[1] = TraitVec{};
    for (int k = 2; k <= cfg.K; ++k) shift_dir[k] = unit(rng);

    // Domain-invariant popularity direction: the part of the click signal
    // that is visible through item features alone (sparse buckets, titles).
    TraitVec pop_dir = unit(rng);

    // Domain kinds alternate S, R, S, R, ...
    auto kind_of = [](int k) { return k % 2 == 1 ? DomainKind::kSearch : DomainKind::kRec; };

    // Items: a shared pool visible to every domain plus per-domain items.
    int n_shared = static_cast<int>(cfg.items_per_domain * cfg.shared_item_fraction);
    int n_local = cfg.items_per_domain - n_shared;
    long long next_item = 0;

    auto make_title = [&](const TraitVec& trait, double noise) {
        // top-correlated words out of a random candidate slice, noised per word
        std::vector<int> cand(40);
        std::uniform_int_distribution<int> wd(0, n_words - 1);
        for (int& c : cand) c = wd(rng);
        std::sort(cand.begin(), cand.end(), [&](int a, int b) {
            return dot(word_traits[a], trait) > dot(word_traits[b], trait);
        });
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        std::vector<std::string> title;
        for (int i = 0; i < 4; ++i)
            title.push_back(ud(rng) < noise ? words[wd(rng)] : words[cand[i]]);
        return title;
    };

    std::vector<ItemInfo> shared_items;
    for (int i = 0; i < n_shared; ++i) {
        ItemInfo it;
        it.id = next_item++;
        it.base_trait = gaussian(rng);
        it.title_words = make_title(it.base_trait, 0.0);
        shared_items.push_back(std::move(it));
    }

    struct DomainData {
        std::vector<ItemInfo> items;          // shared first, then local
        std::vector<TraitVec> item_eff;       // trait after domain shift
        std::vector<TraitVec> user_traits;
        std::vector<long long> user_ids;
    };
    std::vector<DomainData> domains(cfg.K + 1);
    long long next_user = 0;
    for (int k = 1; k <= cfg.K; ++k) {
        DomainData& d = domains[k];
        double noise = cfg.title_noise.empty() ? 0.0 : cfg.title_noise[k - 1];
        d.items = shared_items;
        for (int i = 0; i < n_local; ++i) {
            ItemInfo it;
            it.id = next_item++;
            it.base_trait = gaussian(rng);
            it.title_words = make_title(it.base_trait, 0.0);
            d.items.push_back(std::move(it));
        }
        if (noise > 0.0)
            for (ItemInfo& it : d.items) it.title_words = make_title(it.base_trait, noise);
        for (const ItemInfo& it : d.items) {
            TraitVec eff = it.base_trait;
            for (int t = 0; t < kTraitDim; ++t) eff[t] += cfg.shift_strength * shift_dir[k][t];
            d.item_eff.push_back(eff);
        }
        for (int u = 0; u < cfg.users_per_domain; ++u) {
            d.user_traits.push_back(gaussian(rng));
            d.user_ids.push_back(next_user++);
        }
    }

    // Sparse ids quantize the domain-shifted trait, 4 buckets per dimension;
    // per-domain noise re-rolls a bucket at random.
    auto sparse_ids_of = [&](const TraitVec& t, double noise) {
        std::vector<long long> ids;
        std::uniform_int_distribution<int> bd(0, 3);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int dim = 0; dim < kTraitDim; ++dim) {
            int bucket = t[dim] < -0.7 ? 0 : t[dim] < 0.0 ? 1 : t[dim] < 0.7 ? 2 : 3;
            if (noise > 0.0 && u01(rng) < noise) bucket = bd(rng);
            ids.push_back(dim * 4 + bucket);
        }
        return ids;
    };

    auto join = [](const std::vector<std::string>& ws) {
        std::string s;
        for (const auto& w : ws) s += (s.empty() ? "" : " ") + w;
        return s;
    };

    // First pass: draw every event's structure and logits; labels after
    // intercept calibration so the realized rate tracks base_ctr.
    struct PendingRecord {
        InteractionRecord rec;
        double ctr_logit;
        double sim_logit;
        int session;
    };
    std::vector<PendingRecord> pending;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int s = 0; s < cfg.sessions; ++s) {
        int k = 1 + s % cfg.K;
        DomainData& d = domains[k];
        std::uniform_int_distribution<int> upick(0, static_cast<int>(d.user_traits.size()) - 1);
        std::uniform_int_distribution<int> ipick(0, static_cast<int>(d.items.size()) - 1);
        int u = upick(rng);
        DomainKind kind = kind_of(k);
        double snoise = cfg.sparse_noise.empty() ? 0.0 : cfg.sparse_noise[k - 1];

        // behavior history: items this user leans toward
        std::vector<BehaviorEvent> history;
        for (int h = 0; h < 5; ++h) {
            int cand = ipick(rng);
            if (dot(d.user_traits[u], d.item_eff[cand]) > 0.0 || ud(rng) < 0.25) {
                BehaviorEvent e;
                e.item_id = d.items[cand].id;
                e.behavior_type = ud(rng) < 0.5 ? DomainKind::kSearch : DomainKind::kRec;
                e.attr_ids = sparse_ids_of(d.item_eff[cand], snoise);
                history.push_back(std::move(e));
            }
        }

        for (int r = 0; r < cfg.records_per_session; ++r) {
            int i = ipick(rng);
            PendingRecord p;
            p.session = s;
            p.rec.domain_id = k;
            p.rec.domain_kind = kind;
            p.rec.user_id = d.user_ids[u];
            p.rec.item_id = d.items[i].id;
            p.rec.item_title = join(d.items[i].title_words);
            p.rec.history = history;
            p.rec.item_sparse_ids = sparse_ids_of(d.item_eff[i], snoise);
            p.ctr_logit = 0.6 * dot(d.user_traits[u], d.item_eff[i]) / kTraitDim * 3.0 +
                          1.5 * dot(pop_dir, d.item_eff[i]);
            p.sim_logit = 0.0;
            if (kind == DomainKind::kSearch) {
                // query trait leans toward the user's interests
                TraitVec q = d.user_traits[u];
                TraitVec n = gaussian(rng, 0.6);
                for (int t = 0; t < kTraitDim; ++t) q[t] = 0.7 * q[t] + n[t];
                double qnoise = cfg.title_noise.empty() ? 0.0 : cfg.title_noise[k - 1];
                p.rec.query_text = join(make_title(q, qnoise));
                p.rec.query_sparse_ids = sparse_ids_of(q, snoise);
                double match = dot(q, d.items[i].base_trait) / kTraitDim * 3.0;
                p.ctr_logit += 0.8 * match;
                p.sim_logit = 1.5 * match;
            }
            if (cfg.conditional_shift) p.ctr_logit += 0.4 * (k - (cfg.K + 1) * 0.5);
            pending.push_back(std::move(p));
        }
    }

    std::vector<double> ctr_logits, sim_logits;
    for (const auto& p : pending) {
        ctr_logits.push_back(p.ctr_logit);
        if (p.rec.domain_kind == DomainKind::kSearch) sim_logits.push_back(p.sim_logit);
    }
    double ctr_b = calibrate_intercept(ctr_logits, cfg.base_ctr);
    double sim_b = sim_logits.empty() ? 0.0 : calibrate_intercept(sim_logits, 0.5);

    SynthDataset out;
    for (auto& p : pending) {
        double pc = 1.0 / (1.0 + std::exp(-(p.ctr_logit + ctr_b)));
        p.rec.y_ctr = ud(rng) < pc ? 1 : 0;
        if (p.rec.domain_kind == DomainKind::kSearch) {
            double ps = 1.0 / (1.0 + std::exp(-(p.sim_logit + sim_b)));
            p.rec.y_sim = ud(rng) < ps ? 1 : 0;
        }
        // 80/10/10 by the session's index within its own domain, so every
        // domain receives all three splits whatever K is
        int slot = (p.session / cfg.K) % 10;
        const char* split = slot == 8 ? "eval" : slot == 9 ? "test" : "train";
        out.by_domain[p.rec.domain_id][split].push_back(std::move(p.rec));
    }

    // Cold domain: cap its train split, leave eval/test full-sized.
    if (cfg.cold_domain >= 1) {
        auto& train = out.by_domain[cfg.cold_domain]["train"];
        if (static_cast<int>(train.size()) > cfg.n_cold) train.resize(cfg.n_cold);
    }
    return out;
}

inline void write_dataset(const SynthDataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [k, splits] : ds.by_domain)
        for (const auto& [split, recs] : splits) {
            std::ofstream f(dir + "/domain_" + std::to_string(k) + "." + split + ".jsonl");
            for (const InteractionRecord& r : recs) f << serialize_record(r) << "\n";
        }
}

inline std::vector<InteractionRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    std::vector<InteractionRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(parse_record(line, line_no));
    }
    return out;
}

}  // namespace srfm
