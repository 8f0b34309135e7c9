#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <vector>

#include "splitshield/rng.hpp"

namespace splitshield {

// Safe-prime group parameters: p and q = (p-1)/2 both prime. Protocol
// elements live in QR(Z_p^*), the order-q subgroup of quadratic residues.
struct GroupParams {
  mpz_class p;
  mpz_class q;

  // Tiny test group p = 23, q = 11 (collisions expected and exercised).
  static GroupParams tiny_test();
  // 2048-bit MODP-style safe prime (RFC 3526 group 14).
  static GroupParams modp2048();
  // Validates that p is a safe prime (throws ArgumentError otherwise).
  static GroupParams from_prime(const mpz_class& p);

  std::size_t element_width() const;  // ceil(bits(p) / 8)
};

struct GroupElement {
  mpz_class value;  // in [1, p-1], quadratic residue mod p

  bool operator==(const GroupElement& o) const { return value == o.value; }
};

// Euler criterion: x^q = 1 (mod p).
bool is_quadratic_residue(const mpz_class& x, const GroupParams& params);

// SHA-256 digest of the id bytes, reduced mod (p-1) then +1 so the result is
// in [1, p-1] (never 0), then squared mod p to force QR membership.
// Deterministic; distinct ids may collide at tiny p.
GroupElement hash_to_group(const std::string& id_bytes, const GroupParams& params);

// x^exp mod p; exp must be in [1, q-1].
GroupElement pow_element(const GroupElement& x, const mpz_class& exp,
                         const GroupParams& params);

// Uniform exponent in [1, q-1]; 0 is excluded so the map stays a bijection.
mpz_class random_exponent(const GroupParams& params, Rng& rng);

// Fixed-width big-endian canonical encoding; lexicographic order on these
// bytes is the protocol's element order.
std::vector<std::uint8_t> encode_element(const GroupElement& x, const GroupParams& params);
GroupElement decode_element(const std::vector<std::uint8_t>& bytes, const GroupParams& params);

// Deterministic safe-prime search (test/tooling helper; production uses the
// published 2048-bit constant).
GroupParams find_safe_prime(unsigned bits, Rng& rng);

}  // namespace splitshield
