#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drmmesh/pre.hpp"

using namespace drmmesh;

// All fixed expectations below are worked small-order examples (q = 101):
// elements are written as their exponents, so G1(x) is g^x and G2(y) is z^y.

TEST_CASE("keygen exposes Z^a1 and g^a2") {
  auto params = SystemParams::transparent(101);
  PreKeyPair kp = pre_keygen_with(params, 2, 3);
  CHECK(kp.pub.z_a1 == transparent_g2(params, 2));
  CHECK(kp.pub.g_a2 == transparent_g1(params, 3));
  CHECK(kp.a1 == 2);
  CHECK(kp.a2 == 3);
}

TEST_CASE("keygen draws nonzero secrets") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(3);
  for (int i = 0; i < 50; ++i) {
    PreKeyPair kp = pre_keygen(params, rng);
    CHECK(kp.a1 != 0);
    CHECK(kp.a2 != 0);
    CHECK(!params.is_identity(kp.pub.z_a1));
    CHECK(!params.is_identity(kp.pub.g_a2));
  }
}

TEST_CASE("rekeygen combines delegator a1 with delegatee g^a2") {
  auto params = SystemParams::transparent(101);
  PreKeyPair alice = pre_keygen_with(params, 2, 77);
  PrePublicKey bob{transparent_g2(params, 33), transparent_g1(params, 5)};
  Element rk = pre_rekeygen(params, alice, bob);
  CHECK(rk == transparent_g1(params, 10));  // g^(2*5)
}

TEST_CASE("rekeygen refuses a zero delegator exponent") {
  auto params = SystemParams::transparent(101);
  PreKeyPair broken = pre_keygen_with(params, 0, 7);
  PrePublicKey bob{transparent_g2(params, 1), transparent_g1(params, 5)};
  CHECK_THROWS_AS(pre_rekeygen(params, broken, bob), CryptoError);
}

TEST_CASE("first-level encryption of a fixed message") {
  auto params = SystemParams::transparent(101);
  PreKeyPair alice = pre_keygen_with(params, 2, 3);
  Element m = transparent_g2(params, 4);
  PreCiphertext c = pre_encrypt_first_with(params, m, alice.pub, 7);
  CHECK(c.kind == CiphertextKind::First);
  CHECK(c.alpha == transparent_g2(params, 14));  // Z^(a1*k) = Z^14
  CHECK(c.beta == transparent_g2(params, 11));   // m * Z^k = Z^(4+7)
}

TEST_CASE("second-level encryption of a fixed message") {
  auto params = SystemParams::transparent(101);
  PreKeyPair alice = pre_keygen_with(params, 2, 3);
  Element m = transparent_g2(params, 4);
  PreCiphertext c = pre_encrypt_second_with(params, m, alice.pub, 7);
  CHECK(c.kind == CiphertextKind::Second);
  CHECK(c.alpha == transparent_g1(params, 7));   // g^k
  CHECK(c.beta == transparent_g2(params, 18));   // m * Z^(a1*k) = Z^(4+14)
}

TEST_CASE("re-encryption pairs alpha with the re-encryption key") {
  auto params = SystemParams::transparent(101);
  PreCiphertext second{CiphertextKind::Second, transparent_g1(params, 7),
                       transparent_g2(params, 18)};
  Element rk = transparent_g1(params, 10);
  PreCiphertext re = pre_reencrypt(params, second, rk);
  CHECK(re.kind == CiphertextKind::Reencrypted);
  CHECK(re.alpha == transparent_g2(params, 70));  // e(g^7, g^10)
  CHECK(re.beta == transparent_g2(params, 18));
}

TEST_CASE("decrypting a first-level ciphertext uses a1") {
  auto params = SystemParams::transparent(101);
  PreKeyPair alice = pre_keygen_with(params, 2, 3);
  PreCiphertext c{CiphertextKind::First, transparent_g2(params, 14),
                  transparent_g2(params, 11)};
  // inv(2) = 51 mod 101; beta / alpha^inv(a1) = Z^(11-7) = Z^4
  CHECK(pre_decrypt_first(params, c, alice) == transparent_g2(params, 4));
}

TEST_CASE("decrypting a re-encrypted ciphertext uses the delegatee a2") {
  auto params = SystemParams::transparent(101);
  PreKeyPair bob = pre_keygen_with(params, 9, 5);
  PreCiphertext c{CiphertextKind::Reencrypted, transparent_g2(params, 70),
                  transparent_g2(params, 18)};
  // inv(5) = 81 mod 101; beta / alpha^inv(a2) = Z^(18-14) = Z^4
  CHECK(pre_decrypt_first(params, c, bob) == transparent_g2(params, 4));
}

TEST_CASE("decrypting a second-level ciphertext directly uses a pairing") {
  auto params = SystemParams::transparent(101);
  PreKeyPair alice = pre_keygen_with(params, 2, 3);
  PreCiphertext c{CiphertextKind::Second, transparent_g1(params, 7),
                  transparent_g2(params, 18)};
  CHECK(pre_decrypt_second(params, c, alice) == transparent_g2(params, 4));
}

TEST_CASE("decrypt functions check the ciphertext kind") {
  auto params = SystemParams::transparent(101);
  PreKeyPair alice = pre_keygen_with(params, 2, 3);
  PreCiphertext second{CiphertextKind::Second, transparent_g1(params, 7),
                       transparent_g2(params, 18)};
  PreCiphertext first{CiphertextKind::First, transparent_g2(params, 14),
                      transparent_g2(params, 11)};
  CHECK_THROWS_AS(pre_decrypt_first(params, second, alice), CryptoError);
  CHECK_THROWS_AS(pre_decrypt_second(params, first, alice), CryptoError);
  CHECK_THROWS_AS(pre_reencrypt(params, first, transparent_g1(params, 10)),
                  CryptoError);
}

TEST_CASE("round trips over random keys and messages") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(11);
  for (int i = 0; i < 200; ++i) {
    PreKeyPair alice = pre_keygen(params, rng);
    PreKeyPair bob = pre_keygen(params, rng);
    Element m = pre_random_message(params, rng);

    PreCiphertext c1 = pre_encrypt_first(params, m, alice.pub, rng);
    CHECK(pre_decrypt_first(params, c1, alice) == m);

    PreCiphertext c2 = pre_encrypt_second(params, m, alice.pub, rng);
    CHECK(pre_decrypt_second(params, c2, alice) == m);

    Element rk = pre_rekeygen(params, alice, bob.pub);
    PreCiphertext re = pre_reencrypt(params, c2, rk);
    CHECK(pre_decrypt_first(params, re, bob) == m);
  }
}

TEST_CASE("decrypting with an explicit wrong scalar yields a different value") {
  auto params = SystemParams::transparent(101);
  PreCiphertext c{CiphertextKind::First, transparent_g2(params, 14),
                  transparent_g2(params, 11)};
  CHECK(pre_decrypt_first(params, c, mpz_class(2)) == transparent_g2(params, 4));
  CHECK(pre_decrypt_first(params, c, mpz_class(3)) != transparent_g2(params, 4));
  CHECK_THROWS_AS(pre_decrypt_first(params, c, mpz_class(0)), CryptoError);
}

TEST_CASE("a delegation to B grants nothing toward a third key") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(41);
  for (int i = 0; i < 20; ++i) {
    PreKeyPair alice = pre_keygen(params, rng);
    PreKeyPair bob = pre_keygen(params, rng);
    PreKeyPair carol = pre_keygen(params, rng);
    Element m = pre_random_message(params, rng);
    // Ciphertext addressed to Carol; Bob holds a delegation from Alice.
    PreCiphertext c2 = pre_encrypt_second(params, m, carol.pub, rng);
    Element rk_ab = pre_rekeygen(params, alice, bob.pub);
    PreCiphertext re = pre_reencrypt(params, c2, rk_ab);
    // Guard against the small-order chance collision a1_A == a1_C.
    if (alice.a1 != carol.a1) {
      CHECK(pre_decrypt_first(params, re, bob) != m);
    }
  }
}

TEST_CASE("delegation does not let the delegatee read first-level ciphertexts") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(13);
  PreKeyPair alice = pre_keygen(params, rng);
  PreKeyPair bob = pre_keygen(params, rng);
  Element m = pre_random_message(params, rng);
  PreCiphertext c1 = pre_encrypt_first(params, m, alice.pub, rng);
  // Bob holds a delegation from Alice but decrypting with his own keys
  // must not recover m (overwhelmingly, over random keys).
  int hits = 0;
  for (int i = 0; i < 50; ++i) {
    PreKeyPair eve = pre_keygen(params, rng);
    if (pre_decrypt_first(params, c1, eve) == m) ++hits;
  }
  CHECK(hits <= 2);  // chance collisions only (q = 101)
  CHECK(pre_decrypt_first(params, c1, alice) == m);
  (void)bob;
}

TEST_CASE("re-randomization keeps the plaintext and changes both components") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(17);
  PreKeyPair alice = pre_keygen(params, rng);
  PreKeyPair bob = pre_keygen(params, rng);
  Element m = pre_random_message(params, rng);
  PreCiphertext c2 = pre_encrypt_second(params, m, alice.pub, rng);

  PreCiphertext fresh = pre_rerandomize_second(params, c2, alice.pub, rng);
  CHECK(fresh.kind == CiphertextKind::Second);
  CHECK(fresh.alpha != c2.alpha);
  CHECK(fresh.beta != c2.beta);
  CHECK(pre_decrypt_second(params, fresh, alice) == m);

  // Delegation still works on the re-randomized ciphertext.
  Element rk = pre_rekeygen(params, alice, bob.pub);
  CHECK(pre_decrypt_first(params, pre_reencrypt(params, fresh, rk), bob) == m);

  // Fixed-exponent check: alpha *= g^5, beta *= (Z^a1)^5.
  PreCiphertext base{CiphertextKind::Second, transparent_g1(params, 7),
                     transparent_g2(params, 18)};
  PreKeyPair fixed = pre_keygen_with(params, 2, 3);
  PreCiphertext shifted = pre_rerandomize_second_with(params, base, fixed.pub, 5);
  CHECK(shifted.alpha == transparent_g1(params, 12));
  CHECK(shifted.beta == transparent_g2(params, 28));  // 18 + 2*5
}

TEST_CASE("re-randomizing a non-second ciphertext throws") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(19);
  PreKeyPair alice = pre_keygen(params, rng);
  PreCiphertext first{CiphertextKind::First, transparent_g2(params, 14),
                      transparent_g2(params, 11)};
  CHECK_THROWS_AS(pre_rerandomize_second(params, first, alice.pub, rng),
                  CryptoError);
}

TEST_CASE("ciphertext codec round trips and validates") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(23);
  PreKeyPair alice = pre_keygen(params, rng);
  Element m = pre_random_message(params, rng);

  for (auto kind : {CiphertextKind::First, CiphertextKind::Second}) {
    PreCiphertext c = kind == CiphertextKind::First
                          ? pre_encrypt_first(params, m, alice.pub, rng)
                          : pre_encrypt_second(params, m, alice.pub, rng);
    Bytes enc = encode_pre_ciphertext(params, c);
    PreCiphertext back = decode_pre_ciphertext(params, enc);
    CHECK(back.kind == c.kind);
    CHECK(back.alpha == c.alpha);
    CHECK(back.beta == c.beta);

    Bytes bad = enc;
    bad[0] = 9;  // unknown kind
    CHECK_THROWS_AS(decode_pre_ciphertext(params, bad), CodecError);
    bad = enc;
    bad.pop_back();
    CHECK_THROWS_AS(decode_pre_ciphertext(params, bad), CodecError);
  }

  // A second-level ciphertext relabeled as first-level must fail the
  // group check (alpha lives in G1 there, G2 here).
  PreCiphertext c2 = pre_encrypt_second(params, m, alice.pub, rng);
  Bytes enc = encode_pre_ciphertext(params, c2);
  enc[0] = static_cast<uint8_t>(CiphertextKind::First);
  CHECK_THROWS_AS(decode_pre_ciphertext(params, enc), CodecError);
}

TEST_CASE("public key codec round trips") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(29);
  PreKeyPair kp = pre_keygen(params, rng);
  Bytes enc = encode_pre_public_key(params, kp.pub);
  PrePublicKey back = decode_pre_public_key(params, enc);
  CHECK(back.z_a1 == kp.pub.z_a1);
  CHECK(back.g_a2 == kp.pub.g_a2);
  Bytes bad = enc;
  bad.pop_back();
  CHECK_THROWS_AS(decode_pre_public_key(params, bad), CodecError);
}

TEST_CASE("fingerprint is stable and key-dependent") {
  auto params = SystemParams::transparent(101);
  SeededRng rng(31);
  PreKeyPair a = pre_keygen(params, rng);
  PreKeyPair b = pre_keygen(params, rng);
  CHECK(pre_public_key_fingerprint(params, a.pub) ==
        pre_public_key_fingerprint(params, a.pub));
  CHECK(pre_public_key_fingerprint(params, a.pub) !=
        pre_public_key_fingerprint(params, b.pub));
}
