#include "drmmesh/pairing.hpp"

namespace drmmesh {

// Production backend: a supersingular curve E: y^2 = x^3 + x over F_p with
// p = 3 mod 4, so E is supersingular with #E(F_p) = p + 1 and embedding
// degree 2.  Parameters are fixed so that p + 1 = q * h with q a 256-bit
// prime and h = 0 mod 4 (which forces p = 3 mod 4).
//
// G1 is the order-q subgroup of E(F_p).  The pairing is the reduced Tate
// pairing composed with the distortion map phi(x, y) = (-x, i*y), mapping
// into the order-q subgroup of F_{p^2}^* (our G2):
//
//     e(P, Q) = f_{q,P}(phi(Q)) ^ ((p^2 - 1) / q)
//
// The Miller loop uses denominator elimination: vertical-line factors lie
// in F_p and die in the final exponentiation because (p - 1) | (p^2 - 1)/q.
// F_{p^2} is F_p[i] / (i^2 + 1).

namespace {

// Deterministically generated curve constants (hex).
constexpr const char* kProdP =
    "7c5ff560b1095cf256b9b0dfd1764e7332cd6f69f0e6c45902a04e14f2ea0c162170b3a9"
    "f9ddb0fe225857669b7a5ec5bbd645b7d57c94c8b96f28c848c1e55d1bf8a02921817343"
    "53804bfd382b3296facd7762ca06373f63a8959ae1378cb45adcb11077925482983338f8"
    "25190945269c7792f4f61420f125bc2fa246e2ab";
constexpr const char* kProdQ =
    "9c6ec0933a71d5a0e8e9c3167e6f3f418674040692bd8a31a7545b7c740208a1";
constexpr const char* kProdH =
    "cb89afc308035088d5bc9bdbac3f599ffa22eea6132aff61d3e7caad94a96d6bbffee807"
    "868be14a4898023a256d27958eb27d7ae2aa2b2a7914958febe86f944ab2f5da16deab83"
    "31c4fcb84bb339510974b506d605d0ab7abb7cee7111072c";
constexpr const char* kProdGx =
    "3ade7e96a1f6a07f2afee9cf994167afbc712f8ba90a819a18b8f44408daceba32dd7f3f"
    "f5c23918f23610f2d8116d09a46d22110a2390bba9df909ec43c3174dd94a0af490f37eb"
    "a5ced0dfaf0294dcc05b9c8c5ce87ffc2ffcc1cd84be8531248afbbbe4b992aa56ec26b7"
    "0114cc1a2bf3fe279177da503616be296d3ef50";
constexpr const char* kProdGy =
    "10f3ca1d51028b764193946f48faec33d8e8f9b05603df2d4724acbc91fc87206e99bdc6"
    "abefbcc150759c8eda7301dccfe13ac366476dddd0697d6b9e9c58214efc57d0da9255b0"
    "622cdc707ec7bb16c71a11608fd5ed52a44ac9992ef9b408483d0593c1b4bd74db5df842"
    "21667619cead5833441b7f198964bf153049cf1e";

struct Fp2 {
  mpz_class a;  // real part
  mpz_class b;  // coefficient of i

  bool operator==(const Fp2&) const = default;
};

// Affine point; inf == true means the identity.
struct Pt {
  mpz_class x;
  mpz_class y;
  bool inf = false;
};

// Jacobian point (X/Z^2, Y/Z^3); Z == 0 means the identity.
struct JPt {
  mpz_class X, Y, Z;
};

class ProductionBackend final : public PairingBackend {
 public:
  ProductionBackend()
      : p_(kProdP, 16),
        q_(kProdQ, 16),
        h_(kProdH, 16),
        half_p1_((p_ + 1) / 4),
        fp_bytes_((mpz_sizeinbase(p_.get_mpz_t(), 2) + 7) / 8),
        id_("production") {
    g_ = Pt{mpz_class(kProdGx, 16), mpz_class(kProdGy, 16), false};
    z_ = tate(g_, g_);
  }

  const std::string& id() const override { return id_; }
  uint8_t wire_id() const override { return 2; }
  const mpz_class& order() const override { return q_; }

  Element g1_generator() const override { return enc1(g_); }
  Element g2_generator() const override { return enc2(z_); }

  Element g1_exp(const Element& a, const mpz_class& s) const override {
    return enc1(ec_mul(dec1(a), reduce(s)));
  }
  Element g2_exp(const Element& a, const mpz_class& s) const override {
    return enc2(f2pow(dec2(a), reduce(s)));
  }
  Element g1_mul(const Element& a, const Element& b) const override {
    return enc1(ec_add(dec1(a), dec1(b)));
  }
  Element g2_mul(const Element& a, const Element& b) const override {
    return enc2(f2mul(dec2(a), dec2(b)));
  }
  Element g2_div(const Element& a, const Element& b) const override {
    return enc2(f2mul(dec2(a), f2inv(dec2(b))));
  }

  Element pairing(const Element& a, const Element& b) const override {
    return enc2(tate(dec1(a), dec1(b)));
  }

  Element hash_to_g1(const Bytes& data) const override {
    for (uint32_t counter = 0;; ++counter) {
      mpz_class x = hash_to_fp(data, counter);
      mpz_class t = fp(x * x % p_ * x + x);  // x^3 + x
      if (sgn(t) == 0) continue;             // 2-torsion
      mpz_class y = fp_sqrt(t);
      if (sgn(y) < 0) continue;  // non-residue
      // Canonical root, then project into the order-q subgroup.
      if (y > p_ - y) y = p_ - y;
      Pt raw{x, y, false};
      Pt cleared = jtoa(jmul(raw, h_));
      if (cleared.inf) continue;
      return enc1(cleared);
    }
  }

  bool is_identity(const Element& e) const override {
    if (e.group == Group::G1) return dec1(e).inf;
    return dec2(e) == Fp2{1, 0};
  }

  void check_element(const Element& e) const override {
    if (e.group == Group::G1) {
      check_g1(e);
    } else {
      check_g2(e);
    }
  }

  // Fixed-width payloads; the internal representation is already canonical.
  Bytes to_wire(const Element& e) const override { return e.repr; }

  Element from_wire(Group group, const Bytes& payload) const override {
    Element e{group, payload};
    check_element(e);
    return e;
  }

 private:
  // --- F_p ---

  mpz_class fp(mpz_class v) const {
    v %= p_;
    if (sgn(v) < 0) v += p_;
    return v;
  }

  mpz_class fp_inv(const mpz_class& v) const {
    mpz_class r;
    if (mpz_invert(r.get_mpz_t(), v.get_mpz_t(), p_.get_mpz_t()) == 0) {
      throw CryptoError("field inversion of zero");
    }
    return r;
  }

  // Square root via t^((p+1)/4); returns -1 when t is a non-residue.
  mpz_class fp_sqrt(const mpz_class& t) const {
    mpz_class y;
    mpz_powm(y.get_mpz_t(), t.get_mpz_t(), half_p1_.get_mpz_t(), p_.get_mpz_t());
    if (y * y % p_ != t) return mpz_class(-1);
    return y;
  }

  mpz_class reduce(const mpz_class& s) const {
    mpz_class v = s % q_;
    if (sgn(v) < 0) v += q_;
    return v;
  }

  // --- F_{p^2} ---

  Fp2 f2mul(const Fp2& x, const Fp2& y) const {
    // Karatsuba: 3 multiplications.
    mpz_class m1 = x.a * y.a % p_;
    mpz_class m2 = x.b * y.b % p_;
    mpz_class m3 = (x.a + x.b) * (y.a + y.b) % p_;
    return Fp2{fp(m1 - m2), fp(m3 - m1 - m2)};
  }

  Fp2 f2sqr(const Fp2& x) const {
    mpz_class re = (x.a + x.b) * (x.a - x.b) % p_;
    mpz_class im = 2 * x.a * x.b % p_;
    return Fp2{fp(re), fp(im)};
  }

  Fp2 f2inv(const Fp2& x) const {
    mpz_class n = fp_inv(fp(x.a * x.a + x.b * x.b));
    return Fp2{x.a * n % p_, fp(-(x.b * n % p_))};
  }

  Fp2 f2conj(const Fp2& x) const { return Fp2{x.a, fp(-x.b)}; }

  Fp2 f2pow(Fp2 base, const mpz_class& e) const {
    if (sgn(e) == 0) return Fp2{1, 0};
    size_t bits = mpz_sizeinbase(e.get_mpz_t(), 2);
    Fp2 r = base;
    for (size_t i = bits - 1; i-- > 0;) {
      r = f2sqr(r);
      if (mpz_tstbit(e.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) {
        r = f2mul(r, base);
      }
    }
    return r;
  }

  // --- E(F_p), affine ---

  Pt ec_dbl(const Pt& P) const {
    if (P.inf) return P;
    if (sgn(P.y) == 0) return Pt{0, 0, true};
    mpz_class lam = (3 * P.x * P.x + 1) % p_ * fp_inv(2 * P.y % p_) % p_;
    mpz_class x3 = fp(lam * lam - 2 * P.x);
    mpz_class y3 = fp(lam * (P.x - x3) - P.y);
    return Pt{x3, y3, false};
  }

  Pt ec_add(const Pt& P, const Pt& Q) const {
    if (P.inf) return Q;
    if (Q.inf) return P;
    if (P.x == Q.x) {
      if (fp(P.y + Q.y) == 0) return Pt{0, 0, true};
      return ec_dbl(P);
    }
    mpz_class lam = fp(Q.y - P.y) * fp_inv(fp(Q.x - P.x)) % p_;
    mpz_class x3 = fp(lam * lam - P.x - Q.x);
    mpz_class y3 = fp(lam * (P.x - x3) - P.y);
    return Pt{x3, y3, false};
  }

  // --- E(F_p), Jacobian (for scalar multiplication) ---

  JPt jdbl(const JPt& P) const {
    if (sgn(P.Z) == 0 || sgn(P.Y) == 0) return JPt{1, 1, 0};
    mpz_class Y2 = P.Y * P.Y % p_;
    mpz_class S = 4 * P.X % p_ * Y2 % p_;
    mpz_class Z2 = P.Z * P.Z % p_;
    // a = 1 curve: M = 3X^2 + Z^4
    mpz_class M = (3 * P.X % p_ * P.X + Z2 * Z2) % p_;
    mpz_class X3 = fp(M * M - 2 * S);
    mpz_class Y3 = fp(M * fp(S - X3) - 8 * Y2 % p_ * Y2);
    mpz_class Z3 = 2 * P.Y * P.Z % p_;
    return JPt{X3, Y3, Z3};
  }

  // Mixed addition with an affine point (Q.inf must be false).
  JPt jadd_affine(const JPt& P, const Pt& Q) const {
    if (sgn(P.Z) == 0) return JPt{Q.x, Q.y, 1};
    mpz_class Z2 = P.Z * P.Z % p_;
    mpz_class U2 = Q.x * Z2 % p_;
    mpz_class S2 = Q.y * Z2 % p_ * P.Z % p_;
    mpz_class H = fp(U2 - P.X);
    mpz_class R = fp(S2 - P.Y);
    if (sgn(H) == 0) {
      if (sgn(R) == 0) return jdbl(P);
      return JPt{1, 1, 0};
    }
    mpz_class H2 = H * H % p_;
    mpz_class H3 = H2 * H % p_;
    mpz_class V = P.X * H2 % p_;
    mpz_class X3 = fp(R * R - H3 - 2 * V);
    mpz_class Y3 = fp(R * fp(V - X3) - P.Y * H3);
    mpz_class Z3 = P.Z * H % p_;
    return JPt{X3, Y3, Z3};
  }

  JPt jmul(const Pt& P, const mpz_class& k) const {
    if (P.inf || sgn(k) == 0) return JPt{1, 1, 0};
    size_t bits = mpz_sizeinbase(k.get_mpz_t(), 2);
    JPt R{P.x, P.y, 1};
    for (size_t i = bits - 1; i-- > 0;) {
      R = jdbl(R);
      if (mpz_tstbit(k.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) {
        R = jadd_affine(R, P);
      }
    }
    return R;
  }

  Pt jtoa(const JPt& P) const {
    if (sgn(P.Z) == 0) return Pt{0, 0, true};
    mpz_class zi = fp_inv(P.Z);
    mpz_class zi2 = zi * zi % p_;
    return Pt{P.X * zi2 % p_, P.Y * zi2 % p_ * zi % p_, false};
  }

  Pt ec_mul(const Pt& P, const mpz_class& k) const { return jtoa(jmul(P, k)); }

  // --- pairing ---

  // f_{q,P}(phi(Q)) ^ ((p^2-1)/q) with phi(x, y) = (-x, iy).  The line
  // through points with slope lam evaluated at phi(Q) is
  //   i*yq - yt - lam*(-xq - xt)  =  [lam*(xq + xt) - yt]  +  i*yq,
  // and vertical lines are skipped entirely (denominator elimination).
  Fp2 tate(const Pt& P, const Pt& Q) const {
    if (P.inf || Q.inf) return Fp2{1, 0};
    const mpz_class& xq = Q.x;
    const mpz_class& yq = Q.y;
    Fp2 f{1, 0};
    Pt T = P;
    size_t bits = mpz_sizeinbase(q_.get_mpz_t(), 2);
    for (size_t i = bits - 1; i-- > 0;) {
      // Doubling step: tangent line at T.
      {
        mpz_class lam = (3 * T.x * T.x + 1) % p_ * fp_inv(2 * T.y % p_) % p_;
        mpz_class re = fp(lam * fp(xq + T.x) - T.y);
        f = f2mul(f2sqr(f), Fp2{re, yq});
        T = ec_dbl(T);
      }
      if (mpz_tstbit(q_.get_mpz_t(), static_cast<mp_bitcnt_t>(i))) {
        // Addition step: chord through T and P.
        if (T.x == P.x && fp(T.y + P.y) == 0) {
          // T == -P: the chord is vertical, so its factor is eliminated.
          T = Pt{0, 0, true};
        } else if (!T.inf) {
          mpz_class lam = fp(P.y - T.y) * fp_inv(fp(P.x - T.x)) % p_;
          mpz_class re = fp(lam * fp(xq + T.x) - T.y);
          f = f2mul(f, Fp2{re, yq});
          T = ec_add(T, P);
        }
      }
    }
    // Final exponentiation: (p^2-1)/q = (p-1) * h, and f^(p-1) = conj(f)/f.
    Fp2 u = f2mul(f2conj(f), f2inv(f));
    return f2pow(u, h_);
  }

  // --- codecs ---

  Element enc1(const Pt& P) const {
    Bytes out;
    out.reserve(1 + 2 * fp_bytes_);
    if (P.inf) {
      out.assign(1 + 2 * fp_bytes_, 0);
    } else {
      out.push_back(0x04);
      Bytes x = mpz_to_bytes(P.x, fp_bytes_);
      Bytes y = mpz_to_bytes(P.y, fp_bytes_);
      out.insert(out.end(), x.begin(), x.end());
      out.insert(out.end(), y.begin(), y.end());
    }
    return Element{Group::G1, std::move(out)};
  }

  Pt dec1(const Element& e) const {
    if (e.group != Group::G1) throw CryptoError("production element: wrong group");
    if (e.repr.size() != 1 + 2 * fp_bytes_) {
      throw CryptoError("production element: bad G1 size");
    }
    if (e.repr[0] == 0x00) return Pt{0, 0, true};
    if (e.repr[0] != 0x04) throw CryptoError("production element: bad G1 flag");
    return Pt{mpz_from_bytes(e.repr.data() + 1, fp_bytes_),
              mpz_from_bytes(e.repr.data() + 1 + fp_bytes_, fp_bytes_), false};
  }

  Element enc2(const Fp2& v) const {
    Bytes out;
    out.reserve(2 * fp_bytes_);
    Bytes a = mpz_to_bytes(v.a, fp_bytes_);
    Bytes b = mpz_to_bytes(v.b, fp_bytes_);
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return Element{Group::G2, std::move(out)};
  }

  Fp2 dec2(const Element& e) const {
    if (e.group != Group::G2) throw CryptoError("production element: wrong group");
    if (e.repr.size() != 2 * fp_bytes_) {
      throw CryptoError("production element: bad G2 size");
    }
    return Fp2{mpz_from_bytes(e.repr.data(), fp_bytes_),
               mpz_from_bytes(e.repr.data() + fp_bytes_, fp_bytes_)};
  }

  void check_g1(const Element& e) const {
    Pt P = dec1(e);
    if (P.inf) {
      for (size_t i = 0; i < e.repr.size(); ++i) {
        if (e.repr[i] != 0) throw CryptoError("production element: bad identity");
      }
      return;
    }
    if (P.x >= p_ || P.y >= p_) throw CryptoError("production element: out of range");
    if (fp(P.y * P.y - (P.x * P.x % p_ * P.x + P.x)) != 0) {
      throw CryptoError("production element: not on curve");
    }
    if (sgn(jmul(P, q_).Z) != 0) {
      throw CryptoError("production element: not in the prime-order subgroup");
    }
  }

  void check_g2(const Element& e) const {
    Fp2 v = dec2(e);
    if (v.a >= p_ || v.b >= p_) throw CryptoError("production element: out of range");
    if (v == Fp2{0, 0}) throw CryptoError("production element: zero");
    if (f2pow(v, q_) != Fp2{1, 0}) {
      throw CryptoError("production element: not in the prime-order subgroup");
    }
  }

  mpz_class hash_to_fp(const Bytes& data, uint32_t counter) const {
    // Expand to fp_bytes_ via SHA-256 in counter mode, then reduce mod p.
    Bytes stream;
    for (uint32_t block = 0; stream.size() < fp_bytes_; ++block) {
      Bytes material = data;
      put_u32_be(material, counter);
      put_u32_be(material, block);
      Bytes digest = sha256(material);
      stream.insert(stream.end(), digest.begin(), digest.end());
    }
    stream.resize(fp_bytes_);
    return mpz_from_bytes(stream) % p_;
  }

  mpz_class p_, q_, h_, half_p1_;
  Pt g_;
  Fp2 z_;
  size_t fp_bytes_;
  std::string id_;
};

}  // namespace

SystemParams SystemParams::production() {
  static const std::shared_ptr<const PairingBackend> instance =
      std::make_shared<ProductionBackend>();
  return SystemParams(instance);
}

}  // namespace drmmesh
