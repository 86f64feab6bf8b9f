#pragma once

#include <deque>
#include <span>
#include <vector>

#include "semgrid/common.hpp"
#include "semgrid/rng.hpp"
#include "semgrid/secondary.hpp"

namespace semgrid {

/// Timestamped consensus packet, the unit of all cyber exchange.
struct Packet {
    int src = 0;
    int dst = 0;
    uint64_t seq = 0;     // monotone per (src, dst) stream
    double stamp_s = 0.0; // source timestamp; equals send time except under TSA
    SigmaPayload payload;
};

/// One attack configuration, active inside [window_start_s, window_end_s).
struct LinkAttack {
    double latency_s = 0.0;
    double dropout_p = 0.0;
    int tsa_offset_samples = 0;     // signed n in the +/- n*T_s stamp shift
    double sample_period_s = 1e-4;  // T_s
    double window_start_s = 0.0;
    double window_end_s = kInf;

    bool active(double now_s) const { return now_s >= window_start_s && now_s < window_end_s; }

    void validate() const {
        require(latency_s >= 0.0, "attack: latency must be >= 0");
        require(dropout_p >= 0.0 && dropout_p <= 1.0, "attack: dropout_p must be in [0,1]");
        require(sample_period_s > 0.0, "attack: sample_period_s must be > 0");
        require(window_end_s >= window_start_s, "attack: window end before start");
    }
};

/// Zero-order-hold receiver state for one stream: the subscriber keeps the
/// last delivered payload until the next packet arrives.
struct ReceiverSlot {
    SigmaPayload last_payload;
    double last_stamp_s = 0.0;
    bool has_payload = false;
    uint64_t deliveries = 0;
    bool negative_freshness_seen = false;  // TSA pushed a stamp past now

    /// Freshness F = now - stamp of latest packet; +inf before any delivery.
    double freshness(double now_s) {
        if (!has_payload) return kInf;
        const double f = now_s - last_stamp_s;
        if (f < 0.0) negative_freshness_seen = true;
        return f;
    }
};

/// Ring buffer of a source's payload history, recorded at the plant rate.
/// TSA replay looks up the payload nearest to the shifted timestamp; ties
/// resolve to the older entry. Bounded at 2^16 entries.
class SourceHistory {
public:
    static constexpr size_t kCapacity = 1u << 16;

    void record(double stamp_s, const SigmaPayload& payload) {
        if (buf_.size() == kCapacity) buf_.pop_front();
        buf_.push_back({stamp_s, payload});
    }

    bool empty() const { return buf_.empty(); }
    size_t size() const { return buf_.size(); }

    /// Nearest recorded payload to target_s. underrun is set when the target
    /// predates all history (the oldest buffered payload is returned then).
    SigmaPayload lookup_nearest(double target_s, double* stamp_out, bool* underrun) const {
        require(!buf_.empty(), "source_history: lookup on empty history");
        if (underrun) *underrun = target_s < buf_.front().stamp_s;
        size_t lo = 0, hi = buf_.size();
        while (lo < hi) {  // first entry with stamp >= target
            const size_t mid = (lo + hi) / 2;
            if (buf_[mid].stamp_s < target_s) lo = mid + 1; else hi = mid;
        }
        size_t pick;
        if (lo == 0) pick = 0;
        else if (lo == buf_.size()) pick = buf_.size() - 1;
        else {
            const double d_older = target_s - buf_[lo - 1].stamp_s;
            const double d_newer = buf_[lo].stamp_s - target_s;
            pick = (d_newer < d_older) ? lo : lo - 1;  // tie -> older
        }
        if (stamp_out) *stamp_out = buf_[pick].stamp_s;
        return buf_[pick].payload;
    }

private:
    struct Entry {
        double stamp_s;
        SigmaPayload payload;
    };
    std::deque<Entry> buf_;
};

/// Directed link (src -> dst): in-flight queue under attack policy plus the
/// receiver's hold-last-sample slot.
class Link {
public:
    Link() = default;
    Link(int src, int dst, uint64_t scenario_seed)
        : src_(src), dst_(dst),
          rng_(scenario_seed, static_cast<uint64_t>(src), static_cast<uint64_t>(dst)) {}

    int src() const { return src_; }
    int dst() const { return dst_; }

    /// Applies active attacks and enqueues (or drops) the packet. If several
    /// attacks are active, latencies add, any dropout draw can discard, and
    /// the last TSA entry wins.
    void send(Packet pkt, double now_s, std::span<const LinkAttack> attacks,
              const SourceHistory* history) {
        require(pkt.seq > last_seq_, "link: packet seq must be strictly increasing");
        last_seq_ = pkt.seq;
        ++sent_;

        double latency = 0.0;
        const LinkAttack* tsa = nullptr;
        for (size_t i = 0; i < attacks.size(); ++i) {
            const LinkAttack& a = attacks[i];
            if (!a.active(now_s)) continue;
            if (a.dropout_p > 0.0 && rng_.uniform(pkt.seq * attacks.size() + i) < a.dropout_p) {
                ++dropped_;
                return;
            }
            latency += a.latency_s;
            if (a.tsa_offset_samples != 0) tsa = &a;
        }
        if (tsa != nullptr) {
            const double shift = tsa->tsa_offset_samples * tsa->sample_period_s;
            const double target = pkt.stamp_s + shift;
            pkt.stamp_s = target;
            if (history != nullptr && !history->empty()) {
                bool underrun = false;
                pkt.payload = history->lookup_nearest(target, nullptr, &underrun);
                if (underrun) ++replay_underruns_;
            }
        }

        const double deliver_at = now_s + latency;
        // Keep ordered by (deliver_at, seq); varying latency windows can
        // otherwise interleave deliveries out of order.
        auto it = queue_.end();
        while (it != queue_.begin()) {
            auto prev = std::prev(it);
            if (prev->deliver_at_s < deliver_at ||
                (prev->deliver_at_s == deliver_at && prev->pkt.seq < pkt.seq))
                break;
            it = prev;
        }
        queue_.insert(it, InFlight{deliver_at, std::move(pkt)});
    }

    /// Pops every packet due by now (delivery-time order, seq tie-break) and
    /// updates the receiver slot with each.
    std::vector<Packet> deliver_due(double now_s) {
        std::vector<Packet> out;
        while (!queue_.empty() && queue_.front().deliver_at_s <= now_s) {
            Packet p = std::move(queue_.front().pkt);
            queue_.pop_front();
            slot_.last_payload = p.payload;
            slot_.last_stamp_s = p.stamp_s;
            slot_.has_payload = true;
            ++slot_.deliveries;
            ++delivered_;
            out.push_back(std::move(p));
        }
        return out;
    }

    ReceiverSlot& slot() { return slot_; }
    const ReceiverSlot& slot() const { return slot_; }

    uint64_t sent() const { return sent_; }
    uint64_t dropped() const { return dropped_; }
    uint64_t delivered() const { return delivered_; }
    uint64_t in_flight() const { return queue_.size(); }
    uint64_t replay_underruns() const { return replay_underruns_; }

private:
    struct InFlight {
        double deliver_at_s;
        Packet pkt;
    };

    int src_ = 0;
    int dst_ = 0;
    StreamRng rng_;
    std::deque<InFlight> queue_;
    ReceiverSlot slot_;
    uint64_t last_seq_ = 0;
    uint64_t sent_ = 0;
    uint64_t dropped_ = 0;
    uint64_t delivered_ = 0;
    uint64_t replay_underruns_ = 0;
};

}  // namespace semgrid
