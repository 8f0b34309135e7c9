#include "splitshield/group.hpp"

#include <openssl/sha.h>

#include "splitshield/errors.hpp"

namespace splitshield {

namespace {

// RFC 3526, 2048-bit MODP group modulus.
const char* kModp2048Hex =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

mpz_class half_minus_one(const mpz_class& p) { return (p - 1) / 2; }

}  // namespace

GroupParams GroupParams::tiny_test() { return GroupParams{23, 11}; }

GroupParams GroupParams::modp2048() {
  mpz_class p;
  p.set_str(kModp2048Hex, 16);
  return GroupParams{p, half_minus_one(p)};
}

GroupParams GroupParams::from_prime(const mpz_class& p) {
  if (p < 23) throw ArgumentError("GroupParams: p must be >= 23");
  mpz_class q = half_minus_one(p);
  if (mpz_probab_prime_p(p.get_mpz_t(), 25) == 0 ||
      mpz_probab_prime_p(q.get_mpz_t(), 25) == 0)
    throw ArgumentError("GroupParams: p must be a safe prime");
  return GroupParams{p, q};
}

std::size_t GroupParams::element_width() const {
  return (mpz_sizeinbase(p.get_mpz_t(), 2) + 7) / 8;
}

bool is_quadratic_residue(const mpz_class& x, const GroupParams& params) {
  if (x <= 0 || x >= params.p) return false;
  mpz_class r;
  mpz_powm(r.get_mpz_t(), x.get_mpz_t(), params.q.get_mpz_t(), params.p.get_mpz_t());
  return r == 1;
}

GroupElement hash_to_group(const std::string& id_bytes, const GroupParams& params) {
  if (id_bytes.empty()) throw ArgumentError("hash_to_group: empty id");
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(id_bytes.data()), id_bytes.size(), digest);
  mpz_class h;
  mpz_import(h.get_mpz_t(), SHA256_DIGEST_LENGTH, 1, 1, 1, 0, digest);
  // Reduce into [1, p-1]; the +1 makes h = 0 impossible by construction.
  h = h % (params.p - 1) + 1;
  mpz_class sq;
  mpz_powm_ui(sq.get_mpz_t(), h.get_mpz_t(), 2, params.p.get_mpz_t());
  return GroupElement{sq};
}

GroupElement pow_element(const GroupElement& x, const mpz_class& exp,
                         const GroupParams& params) {
  if (exp < 1 || exp >= params.q)
    throw ArgumentError("pow_element: exponent outside [1, q-1]");
  mpz_class r;
  mpz_powm(r.get_mpz_t(), x.value.get_mpz_t(), exp.get_mpz_t(), params.p.get_mpz_t());
  return GroupElement{r};
}

mpz_class random_exponent(const GroupParams& params, Rng& rng) {
  const std::size_t bits = mpz_sizeinbase(params.q.get_mpz_t(), 2);
  const std::size_t words = (bits + 63) / 64;
  mpz_class bound = params.q - 1;  // want uniform in [0, q-2], then +1
  mpz_class x;
  do {
    std::vector<std::uint64_t> raw(words);
    for (auto& w : raw) w = rng.next_u64();
    mpz_import(x.get_mpz_t(), words, -1, 8, 0, 0, raw.data());
    // Trim to the bit length of q to keep the rejection rate below 1/2.
    mpz_class mask = (mpz_class(1) << bits) - 1;
    x &= mask;
  } while (x >= bound);
  return x + 1;
}

std::vector<std::uint8_t> encode_element(const GroupElement& x, const GroupParams& params) {
  const std::size_t width = params.element_width();
  std::vector<std::uint8_t> out(width, 0);
  std::size_t count = 0;
  mpz_export(out.data(), &count, 1, 1, 1, 0, x.value.get_mpz_t());
  if (count > width) throw ArgumentError("encode_element: value exceeds width");
  // Right-align the big-endian bytes.
  if (count < width) {
    std::vector<std::uint8_t> shifted(width, 0);
    std::copy(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(count),
              shifted.begin() + static_cast<std::ptrdiff_t>(width - count));
    return shifted;
  }
  return out;
}

GroupElement decode_element(const std::vector<std::uint8_t>& bytes, const GroupParams& params) {
  if (bytes.size() != params.element_width())
    throw ProtocolError("decode_element: width mismatch");
  mpz_class v;
  mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  if (v <= 0 || v >= params.p) throw ProtocolError("decode_element: value outside group");
  return GroupElement{v};
}

GroupParams find_safe_prime(unsigned bits, Rng& rng) {
  if (bits < 8) throw ArgumentError("find_safe_prime: need at least 8 bits");
  mpz_class q;
  const std::size_t words = (bits + 63) / 64;
  std::vector<std::uint64_t> raw(words);
  for (auto& w : raw) w = rng.next_u64();
  mpz_import(q.get_mpz_t(), words, -1, 8, 0, 0, raw.data());
  mpz_class top = mpz_class(1) << (bits - 2);
  q = q % top + top;  // force bit length of q to bits-1, so p has `bits` bits
  while (true) {
    mpz_nextprime(q.get_mpz_t(), q.get_mpz_t());
    mpz_class p = 2 * q + 1;
    if (mpz_probab_prime_p(p.get_mpz_t(), 25) != 0) return GroupParams{p, q};
  }
}

}  // namespace splitshield
