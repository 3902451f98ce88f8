#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <queue>
#include <string>
#include <vector>

#include "fkpi/models.hpp"
#include "fkpi/prob.hpp"
#include "fkpi/rng.hpp"

// Continuous-time interacting jump particle system: between interaction
// jumps every particle moves as the reference CTMC (exact exponential
// holding times); interaction clocks ring at the case rate and relocate the
// particle inside the current population. Three schedulings of the Case-1
// jumps are implemented; they agree in law, not pathwise.

namespace fkpi {

enum class CtJumpCase { Case1, Case2, Case3, PlusMinus };

inline const char* to_string(CtJumpCase c) {
    switch (c) {
        case CtJumpCase::Case1: return "case1";
        case CtJumpCase::Case2: return "case2";
        case CtJumpCase::Case3: return "case3";
        case CtJumpCase::PlusMinus: return "plusminus";
    }
    return "?";
}

enum class JumpSchedulingMode { IndividualClocks, PopulationClock, ThinnedPopulationClock };

inline const char* to_string(JumpSchedulingMode m) {
    switch (m) {
        case JumpSchedulingMode::IndividualClocks: return "individual";
        case JumpSchedulingMode::PopulationClock: return "population";
        case JumpSchedulingMode::ThinnedPopulationClock: return "thinned";
    }
    return "?";
}

struct CtEvent {
    double time = 0.0;
    std::int64_t particle = -1;  // -1 for population-level proposals
    char kind = '?';             // 'm' motion, 'j' interaction jump, 'r' thinned reject
    int from = -1;
    int to = -1;
};

struct CtRunResult {
    std::vector<double> record_times;
    std::vector<ProbabilityVector> snapshots;
    std::vector<CtEvent> events;     // filled only when requested
    std::size_t motion_events = 0;
    std::size_t jump_events = 0;
    std::size_t thinned_proposals = 0;  // accepted + rejected, thinned mode only
};

namespace detail {

struct CtSegmentView {
    double u_max = 0.0;               // sup_x U(x) on the segment (case 1)
    SignedVector v;                   // potential values
    SignedVector motion_rate;         // q(x) = -L(x,x)
    std::vector<SignedVector> move_w;  // off-diagonal jump weights per row
};

inline std::vector<CtSegmentView> segment_views(const FKModelCTMC& model, CtJumpCase jcase) {
    std::vector<CtSegmentView> out;
    const std::size_t d = model.state_count();
    for (std::size_t seg = 0; seg < model.segment_count(); ++seg) {
        CtSegmentView s;
        s.v = model.potential_of(seg).values;
        if (jcase == CtJumpCase::Case1) {
            for (double x : s.v)
                if (x > 0.0) throw SignViolation("ct case 1 requires V = -U with U >= 0");
            for (double x : s.v) s.u_max = std::max(s.u_max, -x);
        }
        if (jcase == CtJumpCase::Case2)
            for (double x : s.v)
                if (x < 0.0) throw SignViolation("ct case 2 requires V >= 0");
        const Matrix& l = model.generator_of(seg);
        s.motion_rate.resize(d);
        s.move_w.assign(d, SignedVector(d, 0.0));
        for (std::size_t i = 0; i < d; ++i) {
            s.motion_rate[i] = -l(i, i);
            for (std::size_t j = 0; j < d; ++j)
                if (i != j) s.move_w[i][j] = l(i, j);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Population bookkeeping: states, per-state index buckets with O(1)
/// removal, and per-state counts.
class Buckets {
public:
    Buckets(std::size_t d, const std::vector<std::uint32_t>& states)
        : buckets_(d), pos_(states.size()), states_(states) {
        for (std::size_t i = 0; i < states.size(); ++i) {
            pos_[i] = buckets_[states[i]].size();
            buckets_[states[i]].push_back(i);
        }
    }

    std::uint32_t state_of(std::size_t i) const { return states_[i]; }
    double count(std::size_t s) const { return static_cast<double>(buckets_[s].size()); }
    std::size_t count_n(std::size_t s) const { return buckets_[s].size(); }

    std::size_t pick_in_state(std::size_t s, Rng& rng) const {
        const auto& b = buckets_[s];
        return b[rng.uniform_index(b.size())];
    }

    void move(std::size_t i, std::uint32_t to) {
        std::uint32_t from = states_[i];
        if (from == to) return;
        auto& b = buckets_[from];
        std::size_t p = pos_[i];
        b[p] = b.back();
        pos_[b[p]] = p;
        b.pop_back();
        pos_[i] = buckets_[to].size();
        buckets_[to].push_back(i);
        states_[i] = to;
    }

    const std::vector<std::uint32_t>& states() const { return states_; }

    ProbabilityVector empirical() const {
        SignedVector w(buckets_.size());
        for (std::size_t s = 0; s < buckets_.size(); ++s) w[s] = count(s);
        return ProbabilityVector(std::move(w));
    }

private:
    std::vector<std::vector<std::size_t>> buckets_;
    std::vector<std::size_t> pos_;
    std::vector<std::uint32_t> states_;
};

}  // namespace detail

/// Event-driven simulation up to the horizon. Case 1 supports all three
/// scheduling modes; cases 2, 3 and the +/- split use the population-clock
/// engine (their clock rates depend on the whole population, so individual
/// clocks would be redrawn after every event anyway).
inline CtRunResult simulate_ct(const FKModelCTMC& model, CtJumpCase jcase,
                               std::size_t n_particles, double horizon, JumpSchedulingMode mode,
                               std::uint64_t seed, const std::vector<double>& record_at,
                               bool keep_event_log = false) {
    if (n_particles < 1) throw BadSize("simulate_ct: need at least one particle");
    if (horizon > model.horizon() + kNormTol) throw HorizonExceeded("simulate_ct: beyond model horizon");
    if (mode != JumpSchedulingMode::PopulationClock && jcase != CtJumpCase::Case1)
        throw ModelMismatch("individual/thinned scheduling applies to case 1 only");
    for (double t : record_at)
        if (t < 0.0 || t > horizon + kNormTol)
            throw HorizonExceeded("simulate_ct: record time out of range");

    const std::size_t d = model.state_count();
    auto segments = detail::segment_views(model, jcase);

    CtRunResult out;
    out.record_times = record_at;
    std::sort(out.record_times.begin(), out.record_times.end());

    // boundaries where clocks must be re-drawn: segment breaks
    std::vector<double> breaks;
    for (std::size_t seg = 1; seg < model.segment_count(); ++seg)
        breaks.push_back(model.segment_start(seg));
    breaks.push_back(horizon);

    Rng init_rng(derive_seed(seed, 0xC7), 0);
    std::vector<std::uint32_t> init(n_particles);
    for (auto& s : init)
        s = static_cast<std::uint32_t>(init_rng.categorical(model.initial_law().weights(), 1.0));
    detail::Buckets pop(d, init);

    auto log_event = [&](double t, std::int64_t i, char kind, int from, int to) {
        if (keep_event_log) out.events.push_back(CtEvent{t, i, kind, from, to});
    };

    std::size_t next_record = 0;
    auto take_records_up_to = [&](double t) {
        while (next_record < out.record_times.size() && out.record_times[next_record] <= t + 1e-12) {
            out.snapshots.push_back(pop.empirical());
            ++next_record;
        }
    };

    double now = 0.0;
    std::size_t seg_idx = model.segment_at(0.0);

    if (mode == JumpSchedulingMode::IndividualClocks) {
        // per-particle clocks on per-particle streams; lazy heap invalidation
        Rng relocate_master(derive_seed(seed, 0xA1), 0);
        std::vector<Rng> streams;
        streams.reserve(n_particles);
        for (std::size_t i = 0; i < n_particles; ++i)
            streams.emplace_back(derive_seed(seed, 0xB2), i);
        std::vector<std::uint64_t> version(n_particles, 0);

        struct Entry {
            double time;
            std::size_t particle;
            std::uint64_t version;
            bool operator>(const Entry& o) const { return time > o.time; }
        };
        std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

        auto schedule = [&](std::size_t i) {
            const auto& seg = segments[seg_idx];
            std::uint32_t x = pop.state_of(i);
            double q = seg.motion_rate[x];
            double u = -seg.v[x];
            double total = q + u;
            double t = total > 0.0 ? now + streams[i].exponential(total) : 1e300;
            heap.push(Entry{t, i, ++version[i]});
        };
        auto schedule_all = [&]() {
            for (std::size_t i = 0; i < n_particles; ++i) schedule(i);
        };
        schedule_all();

        std::size_t next_break = 0;
        while (true) {
            double boundary = breaks[next_break];
            Entry e{1e300, 0, 0};
            while (!heap.empty()) {
                e = heap.top();
                if (e.version == version[e.particle]) break;
                heap.pop();
                e.time = 1e300;
            }
            if (e.time > boundary) {
                take_records_up_to(boundary);
                now = boundary;
                if (boundary >= horizon - 1e-15) break;
                ++next_break;
                seg_idx = model.segment_at(now + 1e-12);
                schedule_all();  // rates changed with the segment
                continue;
            }
            heap.pop();
            take_records_up_to(e.time);
            now = e.time;
            std::size_t i = e.particle;
            const auto& seg = segments[seg_idx];
            std::uint32_t x = pop.state_of(i);
            double q = seg.motion_rate[x];
            double u = -seg.v[x];
            // which clock rang: motion w.p. q/(q+u)
            if (streams[i].next_unit() * (q + u) < q) {
                double total_w = 0.0;
                for (double w : seg.move_w[x]) total_w += w;
                auto to = static_cast<std::uint32_t>(streams[i].categorical(seg.move_w[x], total_w));
                log_event(now, static_cast<std::int64_t>(i), 'm', int(x), int(to));
                pop.move(i, to);
                ++out.motion_events;
            } else {
                std::size_t j = relocate_master.uniform_index(n_particles);
                auto to = pop.state_of(j);
                log_event(now, static_cast<std::int64_t>(i), 'j', int(x), int(to));
                pop.move(i, to);
                ++out.jump_events;
            }
            schedule(i);
        }
        return out;
    }

    // population-clock engines (plain and thinned)
    Rng rng(derive_seed(seed, 0xD4), 0);
    std::size_t next_break = 0;
    while (true) {
        const auto& seg = segments[seg_idx];
        double boundary = breaks[next_break];

        double motion_total = 0.0;
        for (std::size_t s = 0; s < d; ++s) motion_total += pop.count(s) * seg.motion_rate[s];

        double mean_v = 0.0;
        for (std::size_t s = 0; s < d; ++s) mean_v += pop.count(s) * seg.v[s];
        mean_v /= static_cast<double>(n_particles);

        // interaction channel rates per state (source-state weights)
        SignedVector src_w(d, 0.0);
        double jump_total = 0.0;
        SignedVector minus_w, plus_dest;
        double minus_total = 0.0, plus_total = 0.0;
        switch (jcase) {
            case CtJumpCase::Case1:
                for (std::size_t s = 0; s < d; ++s) src_w[s] = pop.count(s) * (-seg.v[s]);
                break;
            case CtJumpCase::Case2:
                // common rate m(V): every particle carries it
                for (std::size_t s = 0; s < d; ++s) src_w[s] = pop.count(s) * mean_v;
                break;
            case CtJumpCase::Case3:
                for (std::size_t s = 0; s < d; ++s) {
                    double w = 0.0;
                    for (std::size_t sp = 0; sp < d; ++sp)
                        w += pop.count(sp) * std::max(seg.v[sp] - seg.v[s], 0.0);
                    src_w[s] = pop.count(s) * w / static_cast<double>(n_particles);
                }
                break;
            case CtJumpCase::PlusMinus: {
                minus_w.assign(d, 0.0);
                plus_dest.assign(d, 0.0);
                for (std::size_t s = 0; s < d; ++s) {
                    minus_w[s] = pop.count(s) * std::max(mean_v - seg.v[s], 0.0);
                    minus_total += minus_w[s];
                    plus_dest[s] = pop.count(s) * std::max(seg.v[s] - mean_v, 0.0);
                    plus_total += plus_dest[s];
                }
                break;
            }
        }
        if (jcase != CtJumpCase::PlusMinus)
            for (double w : src_w) jump_total += w;

        double channel_jump = jcase == CtJumpCase::PlusMinus ? minus_total + plus_total
                              : mode == JumpSchedulingMode::ThinnedPopulationClock
                                  ? static_cast<double>(n_particles) * seg.u_max
                                  : jump_total;
        double total = motion_total + channel_jump;
        if (!(total >= 0.0)) throw UnboundedRate("simulate_ct: negative total rate");

        double t_next = total > 0.0 ? now + rng.exponential(total) : 1e300;
        if (t_next > boundary) {
            take_records_up_to(boundary);
            now = boundary;
            if (boundary >= horizon - 1e-15) break;
            ++next_break;
            seg_idx = model.segment_at(now + 1e-12);
            continue;  // clocks implicitly redrawn (memorylessness)
        }
        take_records_up_to(t_next);
        now = t_next;

        double pick = rng.next_unit() * total;
        if (pick < motion_total) {
            // motion event: state ~ count*q, particle uniform in bucket
            SignedVector w(d);
            for (std::size_t s = 0; s < d; ++s) w[s] = pop.count(s) * seg.motion_rate[s];
            std::size_t s = rng.categorical(w, motion_total);
            std::size_t i = pop.pick_in_state(s, rng);
            double total_w = 0.0;
            for (double x : seg.move_w[s]) total_w += x;
            auto to = static_cast<std::uint32_t>(rng.categorical(seg.move_w[s], total_w));
            log_event(now, static_cast<std::int64_t>(i), 'm', int(s), int(to));
            pop.move(i, to);
            ++out.motion_events;
            continue;
        }

        if (mode == JumpSchedulingMode::ThinnedPopulationClock) {
            ++out.thinned_proposals;
            double accept = channel_jump > 0.0 ? jump_total / channel_jump : 0.0;
            if (!(accept >= 0.0 && accept <= 1.0 + 1e-12))
                throw UnboundedRate("simulate_ct: thinning bound violated");
            if (!rng.bernoulli(accept)) {
                log_event(now, -1, 'r', -1, -1);
                continue;
            }
        }

        if (jcase == CtJumpCase::PlusMinus) {
            double sub = rng.next_unit() * (minus_total + plus_total);
            if (sub < minus_total) {
                // minus channel: source ~ (mean - V)_- rate, uniform destination
                std::size_t s = rng.categorical(minus_w, minus_total);
                std::size_t i = pop.pick_in_state(s, rng);
                std::size_t j = rng.uniform_index(n_particles);
                auto to = pop.state_of(j);
                log_event(now, static_cast<std::int64_t>(i), 'j', int(s), int(to));
                pop.move(i, to);
            } else {
                // plus channel: uniform source, destination ~ (V - mean)_+
                std::size_t i = rng.uniform_index(n_particles);
                auto from = pop.state_of(i);
                auto to = static_cast<std::uint32_t>(rng.categorical(plus_dest, plus_total));
                log_event(now, static_cast<std::int64_t>(i), 'j', int(from), int(to));
                pop.move(i, to);
            }
            ++out.jump_events;
            continue;
        }

        // plain interaction jump: source state ~ src_w
        std::size_t s = rng.categorical(src_w, jump_total);
        std::size_t i = pop.pick_in_state(s, rng);
        std::uint32_t to = 0;
        switch (jcase) {
            case CtJumpCase::Case1: {
                std::size_t j = rng.uniform_index(n_particles);
                to = pop.state_of(j);
                break;
            }
            case CtJumpCase::Case2: {
                SignedVector w(d);
                double tw = 0.0;
                for (std::size_t sp = 0; sp < d; ++sp) {
                    w[sp] = pop.count(sp) * seg.v[sp];
                    tw += w[sp];
                }
                to = static_cast<std::uint32_t>(rng.categorical(w, tw));
                break;
            }
            case CtJumpCase::Case3: {
                SignedVector w(d);
                double tw = 0.0;
                for (std::size_t sp = 0; sp < d; ++sp) {
                    w[sp] = pop.count(sp) * std::max(seg.v[sp] - seg.v[s], 0.0);
                    tw += w[sp];
                }
                if (!(tw > 0.0)) throw DegenerateWeight("case 3 relocation with zero weight");
                to = static_cast<std::uint32_t>(rng.categorical(w, tw));
                break;
            }
            default:
                throw ModelMismatch("unexpected case");
        }
        log_event(now, static_cast<std::int64_t>(i), 'j', int(s), int(to));
        pop.move(i, to);
        ++out.jump_events;
    }
    take_records_up_to(horizon);
    return out;
}

/// Per-mode empirical means at the horizon with pairwise differences; the
/// three schedulings sample the same McKean law, so the differences should
/// vanish within Monte Carlo error.
struct ModeReport {
    JumpSchedulingMode mode;
    SignedVector mean;  // per-state occupation, averaged over seeds
    SignedVector se;
};

struct EquivalenceReport {
    std::vector<ModeReport> modes;
    // max over states of |mean_a - mean_b| / se_combined, per mode pair
    std::vector<std::pair<std::string, double>> pairwise_z;
};

inline EquivalenceReport scheduling_equivalence_check(const FKModelCTMC& model,
                                                      std::size_t n_particles, double horizon,
                                                      const std::vector<std::uint64_t>& seeds) {
    const std::size_t d = model.state_count();
    EquivalenceReport rep;
    for (auto mode : {JumpSchedulingMode::IndividualClocks, JumpSchedulingMode::PopulationClock,
                      JumpSchedulingMode::ThinnedPopulationClock}) {
        std::vector<SignedVector> obs;
        for (auto seed : seeds) {
            auto r = simulate_ct(model, CtJumpCase::Case1, n_particles, horizon, mode, seed,
                                 {horizon});
            obs.push_back(r.snapshots.back().weights());
        }
        ModeReport mr;
        mr.mode = mode;
        mr.mean.assign(d, 0.0);
        mr.se.assign(d, 0.0);
        for (const auto& o : obs)
            for (std::size_t s = 0; s < d; ++s) mr.mean[s] += o[s];
        for (auto& x : mr.mean) x /= static_cast<double>(obs.size());
        for (const auto& o : obs)
            for (std::size_t s = 0; s < d; ++s)
                mr.se[s] += (o[s] - mr.mean[s]) * (o[s] - mr.mean[s]);
        for (auto& x : mr.se)
            x = std::sqrt(x / static_cast<double>(obs.size() - 1) /
                          static_cast<double>(obs.size()));
        rep.modes.push_back(std::move(mr));
    }
    for (std::size_t a = 0; a < rep.modes.size(); ++a)
        for (std::size_t b = a + 1; b < rep.modes.size(); ++b) {
            double z = 0.0;
            for (std::size_t s = 0; s < d; ++s) {
                double se = std::sqrt(rep.modes[a].se[s] * rep.modes[a].se[s] +
                                      rep.modes[b].se[s] * rep.modes[b].se[s]);
                if (se > 0.0)
                    z = std::max(z, std::abs(rep.modes[a].mean[s] - rep.modes[b].mean[s]) / se);
            }
            rep.pairwise_z.emplace_back(
                std::string(to_string(rep.modes[a].mode)) + "/" + to_string(rep.modes[b].mode), z);
        }
    return rep;
}

}  // namespace fkpi
