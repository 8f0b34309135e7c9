#include "splitshield/psu.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "splitshield/errors.hpp"

namespace splitshield {

namespace {

using Bytes = std::vector<std::uint8_t>;

std::vector<Bytes> encode_all(const std::vector<GroupElement>& elems,
                              const GroupParams& params) {
  std::vector<Bytes> out;
  out.reserve(elems.size());
  for (const auto& e : elems) out.push_back(encode_element(e, params));
  return out;
}

std::vector<GroupElement> decode_all(const std::vector<Bytes>& bytes,
                                     const GroupParams& params) {
  std::vector<GroupElement> out;
  out.reserve(bytes.size());
  for (const auto& b : bytes) out.push_back(decode_element(b, params));
  return out;
}

void send_elements(Transport& t, MsgTag tag, const std::vector<GroupElement>& elems,
                   const GroupParams& params) {
  t.send(Message{tag, encode_elements(encode_all(elems, params))});
}

std::vector<GroupElement> recv_elements(Transport& t, MsgTag expect, const GroupParams& params,
                                        Transcript* capture) {
  Message msg = t.recv();
  if (msg.tag != expect)
    throw ProtocolError("psu: unexpected message tag " +
                        std::to_string(static_cast<int>(msg.tag)));
  auto raw = decode_elements(msg.payload, params.element_width());
  if (capture) capture->push_back(TranscriptEntry{msg.tag, raw});
  return decode_all(raw, params);
}

std::vector<GroupElement> pow_all(const std::vector<GroupElement>& elems, const mpz_class& exp,
                                  const GroupParams& params) {
  std::vector<GroupElement> out;
  out.reserve(elems.size());
  for (const auto& e : elems) out.push_back(pow_element(e, exp, params));
  return out;
}

void shuffle_elements(std::vector<GroupElement>& elems, Rng& rng) { rng.shuffle(elems); }

std::vector<GroupElement> hash_own_ids(const std::vector<std::string>& ids,
                                       const GroupParams& params) {
  std::vector<GroupElement> out;
  out.reserve(ids.size());
  std::set<mpz_class> seen;
  for (const auto& id : ids) {
    GroupElement e = hash_to_group(id, params);
    if (!seen.insert(e.value).second)
      throw CollisionError("psu: two own ids hash to the same group element");
    out.push_back(e);
  }
  return out;
}

// Deduplicating merge of the two doubly-exponentiated sets (step 7); the
// duplicates are exactly the intersection's images.
std::vector<GroupElement> merge_dedup(const std::vector<GroupElement>& a,
                                      const std::vector<GroupElement>& b) {
  std::set<mpz_class> seen;
  std::vector<GroupElement> out;
  for (const auto& list : {a, b})
    for (const auto& e : list)
      if (seen.insert(e.value).second) out.push_back(e);
  return out;
}

UidMap finalize(const std::vector<GroupElement>& final_set,
                const std::vector<std::string>& own_ids,
                const std::vector<GroupElement>& own_final, const GroupParams& params) {
  UidMap out;
  out.uids = encode_all(final_set, params);
  std::sort(out.uids.begin(), out.uids.end());
  for (std::size_t i = 0; i + 1 < out.uids.size(); ++i)
    if (out.uids[i] == out.uids[i + 1])
      throw CollisionError("psu: duplicate final hashes from distinct ids");

  for (std::size_t i = 0; i < own_ids.size(); ++i) {
    Bytes uid = encode_element(own_final[i], params);
    if (!std::binary_search(out.uids.begin(), out.uids.end(), uid))
      throw ProtocolError("psu: private hash landed outside the final set");
    auto inserted = out.mapping.emplace(own_ids[i], std::move(uid));
    if (!inserted.second)
      throw CollisionError("psu: duplicate own id");
  }
  // The mapping must be injective into U.
  std::set<Bytes> images;
  for (const auto& kv : out.mapping)
    if (!images.insert(kv.second).second)
      throw CollisionError("psu: two own ids map to the same uid");
  return out;
}

}  // namespace

PartySecrets PartySecrets::random(const GroupParams& params, Rng& rng) {
  return PartySecrets{random_exponent(params, rng), random_exponent(params, rng),
                      random_exponent(params, rng)};
}

UidMap run_psu(PsuRole role, const std::vector<std::string>& own_ids,
               const GroupParams& params, Transport& transport, Rng& rng,
               Transcript* received) {
  if (own_ids.empty()) throw ArgumentError("run_psu: own id set is empty");
  PartySecrets sec = PartySecrets::random(params, rng);
  std::vector<GroupElement> own = hash_own_ids(own_ids, params);
  const mpz_class& q = params.q;

  if (role == PsuRole::active) {
    // Step 3: I_a^{s1}, shuffled.
    std::vector<GroupElement> a_s1 = pow_all(own, sec.e1, params);
    shuffle_elements(a_s1, rng);
    send_elements(transport, MsgTag::round_1a, a_s1, params);

    // Steps 4-5 arrive: I_a^{s1 t1} and I_p^{t1}.
    std::vector<GroupElement> a_s1t1 = recv_elements(transport, MsgTag::round_1b, params, received);
    std::vector<GroupElement> p_t1 = recv_elements(transport, MsgTag::round_1c, params, received);

    // Step 6: I_p^{s1 t1}, shuffled.
    std::vector<GroupElement> p_s1t1 = pow_all(p_t1, sec.e1, params);
    shuffle_elements(p_s1t1, rng);
    send_elements(transport, MsgTag::round_1d, p_s1t1, params);

    // Steps 7-8: merge and apply s2 s3.
    std::vector<GroupElement> merged = merge_dedup(a_s1t1, p_s1t1);
    mpz_class s2s3 = sec.e2 * sec.e3 % q;
    std::vector<GroupElement> union_a = pow_all(merged, s2s3, params);
    shuffle_elements(union_a, rng);
    send_elements(transport, MsgTag::round_2a, union_a, params);

    // Step 9 arrives; step 10 sorts.
    std::vector<GroupElement> final_set =
        recv_elements(transport, MsgTag::round_2b, params, received);
    if (final_set.size() != merged.size())
      throw ProtocolError("psu: final set size mismatch between phases");

    // Step 11: private hashing for I_a (order carries the correspondence).
    std::vector<GroupElement> req = pow_all(own, sec.e2, params);
    send_elements(transport, MsgTag::private_req_a, req, params);
    std::vector<GroupElement> resp =
        recv_elements(transport, MsgTag::private_resp_a, params, received);
    if (resp.size() != own.size())
      throw ProtocolError("psu: private hashing response size mismatch");
    mpz_class s1s3 = sec.e1 * sec.e3 % q;
    std::vector<GroupElement> own_final = pow_all(resp, s1s3, params);

    // Step 12, peer side: y^{s1 s2 s3}.
    std::vector<GroupElement> peer_req =
        recv_elements(transport, MsgTag::private_req_p, params, received);
    mpz_class s1s2s3 = s2s3 * sec.e1 % q;
    send_elements(transport, MsgTag::private_resp_p, pow_all(peer_req, s1s2s3, params), params);

    return finalize(final_set, own_ids, own_final, params);
  }

  // Passive role; secrets are t1, t2, t3.
  std::vector<GroupElement> a_s1 = recv_elements(transport, MsgTag::round_1a, params, received);

  // Step 4: I_a^{s1 t1}, shuffled.
  std::vector<GroupElement> a_s1t1 = pow_all(a_s1, sec.e1, params);
  shuffle_elements(a_s1t1, rng);
  send_elements(transport, MsgTag::round_1b, a_s1t1, params);

  // Step 5: I_p^{t1}, shuffled.
  std::vector<GroupElement> p_t1 = pow_all(own, sec.e1, params);
  shuffle_elements(p_t1, rng);
  send_elements(transport, MsgTag::round_1c, p_t1, params);

  std::vector<GroupElement> p_s1t1 = recv_elements(transport, MsgTag::round_1d, params, received);

  // Step 9: apply t2 t3 to the union, shuffled.
  std::vector<GroupElement> union_a = recv_elements(transport, MsgTag::round_2a, params, received);
  mpz_class t2t3 = sec.e2 * sec.e3 % q;
  std::vector<GroupElement> final_set = pow_all(union_a, t2t3, params);
  shuffle_elements(final_set, rng);
  send_elements(transport, MsgTag::round_2b, final_set, params);

  // Step 11, peer side: y^{t1 t2 t3}.
  std::vector<GroupElement> peer_req =
      recv_elements(transport, MsgTag::private_req_a, params, received);
  mpz_class t1t2t3 = t2t3 * sec.e1 % q;
  send_elements(transport, MsgTag::private_resp_a, pow_all(peer_req, t1t2t3, params), params);

  // Step 12: private hashing for I_p.
  std::vector<GroupElement> req = pow_all(own, sec.e2, params);
  send_elements(transport, MsgTag::private_req_p, req, params);
  std::vector<GroupElement> resp =
      recv_elements(transport, MsgTag::private_resp_p, params, received);
  if (resp.size() != own.size())
    throw ProtocolError("psu: private hashing response size mismatch");
  mpz_class t1t3 = sec.e1 * sec.e3 % q;
  std::vector<GroupElement> own_final = pow_all(resp, t1t3, params);

  return finalize(final_set, own_ids, own_final, params);
}

std::vector<std::string> with_dummy_ids(std::vector<std::string> ids, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::ostringstream os;
    os << "dummy:" << std::hex << rng.next_u64() << rng.next_u64();
    ids.push_back(os.str());
  }
  return ids;
}

}  // namespace splitshield
