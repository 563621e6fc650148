#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "modest/hashing.hpp"
#include "modest/rng.hpp"
#include "modest/sampling.hpp"

using namespace modest;

namespace {

NodeId id(std::uint64_t v) { return NodeId{v}; }

std::vector<NodeId> ids(std::initializer_list<std::uint64_t> vs) {
    std::vector<NodeId> out;
    for (auto v : vs) out.push_back(id(v));
    return out;
}

// Independent digest oracle: bytewise FNV-1a written as arithmetic on the
// big-endian expansion, then the avalanche finalizer, composed differently
// from the library path.
std::uint64_t oracle_digest(std::uint64_t node, std::uint64_t round) {
    std::uint64_t h = 14695981039346656037ULL;
    for (int word = 0; word < 2; ++word) {
        const std::uint64_t v = word == 0 ? node : round;
        for (int shift = 56; shift >= 0; shift -= 8) {
            h = (h ^ ((v >> shift) & 0xffULL)) * 1099511628211ULL;
        }
    }
    h = (h ^ (h >> 33)) * 0xff51afd7ed558ccdULL;
    h = (h ^ (h >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return h ^ (h >> 33);
}

}  // namespace

TEST_CASE("sample digest matches frozen reference vectors") {
    // vectors computed with an external implementation of fnv1a64 + fmix64
    CHECK(sample_digest(id(0), 0) == 0xa5e0dba6c385580aULL);
    CHECK(sample_digest(id(1), 1) == 0xb1da13f90218b3adULL);
    CHECK(sample_digest(id(7), 3) == 0x2b78f97c633035a5ULL);
    CHECK(sample_digest(id(42), 7) == 0x6d8e0c33b2e5c0e8ULL);
    CHECK(sample_digest(id(0xDEADBEEF), 123456789) == 0xdf994ddb61acacb8ULL);
    CHECK(sample_digest(id(0x8000000000000000ULL), 1099511627776LL) == 0x5fc442c5bcaa0509ULL);
}

TEST_CASE("sample digest agrees with the independent oracle") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t node = rng.next_u64();
        const std::uint64_t round = rng.uniform_int(1u << 20);
        CHECK(sample_digest(id(node), static_cast<Round>(round)) == oracle_digest(node, round));
    }
}

TEST_CASE("rank_candidates is deterministic and order-insensitive") {
    auto cands = ids({3, 1, 4, 1, 5, 9, 2, 6});  // duplicate 1 on purpose: caller passes sets
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

    const auto r1 = rank_candidates(cands, 11);
    const auto r2 = rank_candidates(cands, 11);
    CHECK(r1.entries.size() == r2.entries.size());
    for (std::size_t i = 0; i < r1.entries.size(); ++i) CHECK(r1.entries[i].node == r2.entries[i].node);

    auto shuffled = cands;
    Rng rng(3);
    rng.shuffle(shuffled);
    const auto r3 = rank_candidates(shuffled, 11);
    for (std::size_t i = 0; i < r1.entries.size(); ++i) CHECK(r1.entries[i].node == r3.entries[i].node);
}

TEST_CASE("ranking a different round is a permutation of the same set") {
    std::vector<NodeId> cands;
    for (std::uint64_t v = 0; v < 16; ++v) cands.push_back(id(v));
    const auto rk = rank_candidates(cands, 9);
    const auto rk1 = rank_candidates(cands, 10);

    auto members = [](const RankedCandidates& r) {
        std::set<NodeId> s;
        for (const auto& e : r.entries) s.insert(e.node);
        return s;
    };
    CHECK(members(rk) == members(rk1));
    bool same_order = true;
    for (std::size_t i = 0; i < rk.entries.size(); ++i)
        same_order = same_order && rk.entries[i].node == rk1.entries[i].node;
    CHECK_FALSE(same_order);
}

TEST_CASE("golden ranking for nodes 1..10 at round 5") {
    std::vector<NodeId> cands;
    for (std::uint64_t v = 1; v <= 10; ++v) cands.push_back(id(v));
    const auto ranked = rank_candidates(cands, 5);
    const auto expected = ids({9, 5, 10, 8, 1, 7, 6, 4, 3, 2});  // via the reference implementation
    REQUIRE(ranked.entries.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(ranked.entries[i].node == expected[i]);
}

TEST_CASE("begin_sample pings the ranked head") {
    std::vector<NodeId> cands;
    for (std::uint64_t v = 0; v < 10; ++v) cands.push_back(id(v));
    const auto ranked = rank_candidates(cands, 4);

    SampleRequest req(ranked, 3);
    const auto step = req.begin();
    CHECK(step.pings == ranked.head(3));
    CHECK_FALSE(step.completed);
    CHECK_FALSE(step.stalled);

    // s >= |candidates|: ping everyone, still pending
    SampleRequest all(ranked, 10);
    CHECK(all.begin().pings.size() == 10);
    SampleRequest over(ranked, 12);
    const auto over_step = over.begin();
    CHECK(over_step.pings.size() == 10);
    CHECK_FALSE(over_step.stalled);

    SampleRequest empty(rank_candidates({}, 4), 2);
    CHECK(empty.begin().stalled);
}

TEST_CASE("pongs complete the sample in rank order regardless of arrival order") {
    std::vector<NodeId> cands;
    for (std::uint64_t v = 0; v < 8; ++v) cands.push_back(id(v));
    const auto ranked = rank_candidates(cands, 2);
    const auto head = ranked.head(3);

    SampleRequest req(ranked, 3);
    req.begin();
    CHECK_FALSE(req.on_pong(head[2]).completed);
    CHECK_FALSE(req.on_pong(head[0]).completed);
    const auto done = req.on_pong(head[1]);
    CHECK(done.completed);
    CHECK(done.sample == head);  // canonical rank order, not arrival order

    // duplicate and unknown pongs are ignored
    SampleRequest req2(ranked, 3);
    req2.begin();
    req2.on_pong(head[0]);
    CHECK(req2.on_pong(head[0]).pings.empty());
    CHECK_FALSE(req2.on_pong(head[0]).completed);
    CHECK(req2.responders().size() == 1);
    CHECK_FALSE(req2.on_pong(id(999)).completed);  // never pinged
}

TEST_CASE("timeout advances one further down the ranked list") {
    std::vector<NodeId> cands;
    for (std::uint64_t v = 0; v < 6; ++v) cands.push_back(id(v));
    const auto ranked = rank_candidates(cands, 3);
    const auto order = ranked.head(6);

    SampleRequest req(ranked, 3);
    req.begin();
    req.on_pong(order[0]);
    req.on_pong(order[1]);

    // rank 3 is dead: its timeout pings rank 4
    const auto step = req.on_ping_timeout(order[2]);
    CHECK(step.pings == std::vector<NodeId>{order[3]});

    // the sequential candidate's pong completes {1, 2, 4}
    const auto done = req.on_pong(order[3]);
    CHECK(done.completed);
    CHECK(done.sample == std::vector<NodeId>{order[0], order[1], order[3]});
}

TEST_CASE("exhausting the ranked list below target stalls the attempt") {
    std::vector<NodeId> cands = ids({1, 2, 3});
    SampleRequest req(rank_candidates(cands, 1), 2);
    const auto order = rank_candidates(cands, 1).head(3);
    req.begin();  // pings first two
    CHECK(req.on_ping_timeout(order[0]).pings == std::vector<NodeId>{order[2]});
    CHECK_FALSE(req.on_ping_timeout(order[1]).stalled);  // one ping still outstanding
    const auto last = req.on_ping_timeout(order[2]);
    CHECK(last.stalled);
    CHECK(req.stalled());

    // all pong but fewer than target: stalled via the pong path
    SampleRequest small(rank_candidates(ids({7}), 3), 2);
    small.begin();
    CHECK(small.on_pong(id(7)).stalled);
}

TEST_CASE("late pong after a timeout still counts toward completion") {
    std::vector<NodeId> cands = ids({1, 2, 3, 4});
    const auto ranked = rank_candidates(cands, 6);
    const auto order = ranked.head(4);

    SampleRequest req(ranked, 2);
    req.begin();
    CHECK(req.on_ping_timeout(order[0]).pings == std::vector<NodeId>{order[2]});
    req.on_pong(order[1]);
    // the timed-out head finally answers; it was pinged, so it is eligible
    const auto done = req.on_pong(order[0]);
    CHECK(done.completed);
    CHECK(done.sample == std::vector<NodeId>{order[0], order[1]});
}

TEST_CASE("retry delay backs off exponentially and caps at 8x") {
    const SimTime dt = ms_to_us(100);
    CHECK(sample_retry_delay(dt, 1) == dt);
    CHECK(sample_retry_delay(dt, 2) == 2 * dt);
    CHECK(sample_retry_delay(dt, 3) == 4 * dt);
    CHECK(sample_retry_delay(dt, 4) == 8 * dt);
    CHECK(sample_retry_delay(dt, 9) == 8 * dt);
}

TEST_CASE("consistency: equal candidate sets and liveness give identical samples") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<NodeId> cands;
        const auto count = 3 + rng.uniform_int(20);
        std::set<std::uint64_t> used;
        while (cands.size() < count) {
            const auto v = rng.next_u64();
            if (used.insert(v).second) cands.push_back(id(v));
        }
        const auto target = 1 + rng.uniform_int(3);
        const Round k = static_cast<Round>(1 + rng.uniform_int(50));

        // node A sees pongs in rank order, node B in reverse; same liveness
        const auto ranked = rank_candidates(cands, k);
        SampleRequest a(ranked, target);
        SampleRequest b(ranked, target);
        a.begin();
        b.begin();
        const auto head = ranked.head(target);
        std::vector<NodeId> sample_a, sample_b;
        for (const NodeId& j : head) {
            const auto st = a.on_pong(j);
            if (st.completed) sample_a = st.sample;
        }
        for (auto it = head.rbegin(); it != head.rend(); ++it) {
            const auto st = b.on_pong(*it);
            if (st.completed) sample_b = st.sample;
        }
        REQUIRE_FALSE(sample_a.empty());
        CHECK(sample_a == sample_b);
    }
}

TEST_CASE("selection frequency is uniform across candidates") {
    // n=32 quick check; the full n=64/5000-round version runs in acceptance
    const std::size_t n = 32, s = 4;
    const int rounds = 2000;
    const auto node_ids = make_node_ids(3, n);
    std::map<NodeId, int> counts;
    for (int k = 1; k <= rounds; ++k)
        for (const NodeId& j : rank_candidates(node_ids, k).head(s)) ++counts[j];
    const double p = static_cast<double>(s) / static_cast<double>(n);
    const double mean = rounds * p;
    const double sd = std::sqrt(rounds * p * (1 - p));
    for (const auto& [j, c] : counts) CHECK(std::abs(c - mean) <= 4.0 * sd);
    CHECK(counts.size() == n);
}
