#pragma once

#include <map>
#include <string>
#include <vector>

#include "splitshield/group.hpp"
#include "splitshield/rng.hpp"
#include "splitshield/transport.hpp"

namespace splitshield {

enum class PsuRole { active, passive };

// Three commutative exponents in [1, q-1] (the active party's s1,s2,s3 or
// the passive party's t1,t2,t3).
struct PartySecrets {
  mpz_class e1, e2, e3;

  static PartySecrets random(const GroupParams& params, Rng& rng);
};

// Output of the protocol for one party: the shared sorted UID set U plus this
// party's own-id -> uid bijection.
struct UidMap {
  std::vector<std::vector<std::uint8_t>> uids;  // lexicographically sorted
  std::map<std::string, std::vector<std::uint8_t>> mapping;
};

// Every message this party received, in arrival order, with its round tag.
struct TranscriptEntry {
  MsgTag tag;
  std::vector<std::vector<std::uint8_t>> elements;
};
using Transcript = std::vector<TranscriptEntry>;

// Runs the two-round commutative-hashing union protocol plus the private
// hashing phase over the given transport. own_ids must be distinct after
// hash_to_group (tiny test groups will collide; that raises CollisionError).
// The peer must run the complementary role on the other endpoint.
UidMap run_psu(PsuRole role, const std::vector<std::string>& own_ids,
               const GroupParams& params, Transport& transport, Rng& rng,
               Transcript* received = nullptr);

// Optional pre-step: append k random synthetic ids so set sizes do not leak
// exact counts. Off by default; the ids are hex strings that cannot collide
// with ordinary ids by prefix.
std::vector<std::string> with_dummy_ids(std::vector<std::string> ids, std::size_t k, Rng& rng);

}  // namespace splitshield
