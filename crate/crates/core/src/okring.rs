//! The unramified coefficient ring O_K = Z_p[t]/(m(t)) truncated at p^M.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ForgeError, Result};
use crate::modint::ModPow;
use crate::ring::{Elem, ElemOps, Ring};

/// Largest supported residue degree.
pub const MAX_FK: usize = 4;

/// Raw coordinates of an element of O_K in the basis 1, t, ..., t^{f-1}.
pub type Ok = [u64; MAX_FK];

/// Element of O_K with its precision exponent.
pub type OKElem = Elem<Ok>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OKConfig {
    pub p: u64,
    #[serde(rename = "f_K")]
    pub f_k: usize,
    /// Monic modulus m(t), coefficients from the constant term upwards.
    pub m: Vec<i64>,
    /// The unit u with pi = u * p.
    pub pi_unit: i64,
    #[serde(rename = "M")]
    pub prec: u32,
}

impl OKConfig {
    pub fn new(p: u64, f_k: usize, m: Vec<i64>, pi_unit: i64, prec: u32) -> Self {
        OKConfig { p, f_k, m, pi_unit, prec }
    }

    /// Q_p with pi = u p.
    pub fn qp(p: u64, pi_unit: i64, prec: u32) -> Self {
        OKConfig::new(p, 1, vec![0, 1], pi_unit, prec)
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.f_k as u32)
    }

    /// Check that p is prime, m is monic of degree f_K and irreducible mod p,
    /// and that pi_unit is a p-adic unit.
    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) {
            return Err(ForgeError::InvalidConfig(format!("p = {} is not prime", self.p)));
        }
        if self.f_k == 0 || self.f_k > MAX_FK {
            return Err(ForgeError::InvalidConfig(format!(
                "f_K = {} outside 1..={MAX_FK}",
                self.f_k
            )));
        }
        if self.m.len() != self.f_k + 1 || *self.m.last().unwrap() != 1 {
            return Err(ForgeError::InvalidConfig(
                "m must be monic of degree f_K (coefficients low to high)".into(),
            ));
        }
        if self.pi_unit.rem_euclid(self.p as i64) == 0 {
            return Err(ForgeError::InvalidConfig("pi_unit is not a unit".into()));
        }
        let pm: Vec<u64> = self.m.iter().map(|&c| c.rem_euclid(self.p as i64) as u64).collect();
        if !fp::is_irreducible(&pm, self.p) {
            return Err(ForgeError::InvalidConfig("m is not irreducible mod p".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OkRing {
    cfg: OKConfig,
    z: ModPow,
    f: usize,
    /// t^f = sum red[i] t^i, sparse.
    red: Vec<(usize, u64)>,
    pi: Ok,
    /// u^{-1} as an integer.
    uinv: u64,
}

impl OkRing {
    pub fn new(cfg: OKConfig) -> Result<Self> {
        cfg.validate()?;
        let z = ModPow::new(cfg.p, cfg.prec)?;
        let f = cfg.f_k;
        let red = (0..f)
            .filter(|&i| cfg.m[i] != 0)
            .map(|i| (i, z.from_i64(-cfg.m[i])))
            .collect();
        let u = z.from_i64(cfg.pi_unit);
        let mut pi = [0u64; MAX_FK];
        pi[0] = z.mul(u, z.from_u64(cfg.p));
        let mut ring = OkRing { cfg, z, f, red, pi, uinv: 0 };
        let mut uo = [0u64; MAX_FK];
        uo[0] = u;
        ring.uinv = ring.inv_unit(&uo).expect("pi_unit is a unit")[0];
        Ok(ring)
    }

    pub fn config(&self) -> &OKConfig {
        &self.cfg
    }
    pub fn p(&self) -> u64 {
        self.cfg.p
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn q(&self) -> u64 {
        self.cfg.q()
    }
    pub fn prec(&self) -> u32 {
        self.cfg.prec
    }
    pub fn modint(&self) -> &ModPow {
        &self.z
    }

    pub fn int(&self, n: i64) -> Ok {
        let mut r = [0u64; MAX_FK];
        r[0] = self.z.from_i64(n);
        r
    }
    pub fn from_coords(&self, c: &[i64]) -> Ok {
        let mut r = [0u64; MAX_FK];
        for (i, &v) in c.iter().enumerate().take(self.f) {
            r[i] = self.z.from_i64(v);
        }
        r
    }
    /// Divide a small exact constant by pi^k using its signed integer
    /// coordinates, so no digit is lost.
    pub fn exact_div_pi(&self, a: &Ok, k: u32) -> Result<Ok> {
        let pk = (self.p() as i64).pow(k);
        let c = self.coords(a);
        if c.iter().any(|x| x % pk != 0) {
            return Err(ForgeError::NotDivisible { val: self.val(a), need: k });
        }
        let q: Vec<i64> = c.iter().map(|x| x / pk).collect();
        let mut u = self.from_coords(&q);
        for _ in 0..k {
            u = self.mul(&u, &self.int_unit_inv());
        }
        Ok(u)
    }
    fn int_unit_inv(&self) -> Ok {
        let mut r = [0u64; MAX_FK];
        r[0] = self.uinv;
        r
    }
    /// Coordinates as signed integers in a symmetric range.
    pub fn coords(&self, a: &Ok) -> Vec<i64> {
        (0..self.f).map(|i| self.z.to_i128(a[i]) as i64).collect()
    }
    /// Coordinates as integers in `[0, p^M)`.
    pub fn canonical(&self, a: &Ok) -> Vec<u64> {
        (0..self.f).map(|i| self.z.to_u64(a[i])).collect()
    }
    pub fn pi(&self) -> Ok {
        self.pi
    }
    pub fn q_elem(&self) -> Ok {
        self.int(self.q() as i64)
    }
    pub fn el(&self, raw: Ok) -> OKElem {
        self.exact(raw)
    }

    /// Exact coordinate-wise division by p^k.
    pub fn div_p(&self, a: &Ok, k: u32) -> Ok {
        let mut r = [0u64; MAX_FK];
        for i in 0..self.f {
            r[i] = self.z.div_p_pow(a[i], k);
        }
        r
    }

    /// Residue classes represented by sum c_i t^i with c_i in {0,..,p-1},
    /// ordered by the integer sum c_i p^i.
    pub fn digit_reps(&self) -> Vec<OKElem> {
        let p = self.p();
        (0..self.q())
            .map(|mut idx| {
                let mut r = [0u64; MAX_FK];
                for c in r.iter_mut().take(self.f) {
                    *c = self.z.from_u64(idx % p);
                    idx /= p;
                }
                self.el(r)
            })
            .collect()
    }

    /// Teichmuller representative of the residue class of a unit.
    pub fn teichmuller(&self, a: &Ok) -> Ok {
        let mut x = *a;
        for _ in 0..self.prec() + 1 {
            let y = self.pow(&x, self.q());
            if y == x {
                break;
            }
            x = y;
        }
        x
    }

    #[inline]
    fn mul_raw(&self, a: &Ok, b: &Ok) -> Ok {
        let z = &self.z;
        if self.f == 1 {
            return [z.mul(a[0], b[0]), 0, 0, 0];
        }
        let f = self.f;
        let mut conv = [0u64; 2 * MAX_FK - 1];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                if b[j] != 0 {
                    conv[i + j] = z.add(conv[i + j], z.mul(a[i], b[j]));
                }
            }
        }
        for k in (f..2 * f - 1).rev() {
            let c = conv[k];
            if c == 0 {
                continue;
            }
            for &(i, r) in &self.red {
                conv[k - f + i] = z.add(conv[k - f + i], z.mul(c, r));
            }
        }
        let mut out = [0u64; MAX_FK];
        out[..f].copy_from_slice(&conv[..f]);
        out
    }
}

impl Ring for OkRing {
    type E = Ok;

    fn zero(&self) -> Ok {
        [0; MAX_FK]
    }
    fn one(&self) -> Ok {
        self.int(1)
    }
    #[inline]
    fn is_zero(&self, a: &Ok) -> bool {
        a.iter().all(|&c| c == 0)
    }
    #[inline]
    fn add(&self, a: &Ok, b: &Ok) -> Ok {
        let mut r = [0u64; MAX_FK];
        for i in 0..self.f {
            r[i] = self.z.add(a[i], b[i]);
        }
        r
    }
    #[inline]
    fn sub(&self, a: &Ok, b: &Ok) -> Ok {
        let mut r = [0u64; MAX_FK];
        for i in 0..self.f {
            r[i] = self.z.sub(a[i], b[i]);
        }
        r
    }
    #[inline]
    fn neg(&self, a: &Ok) -> Ok {
        let mut r = [0u64; MAX_FK];
        for i in 0..self.f {
            r[i] = self.z.neg(a[i]);
        }
        r
    }
    #[inline]
    fn mul(&self, a: &Ok, b: &Ok) -> Ok {
        self.mul_raw(a, b)
    }
    fn scale(&self, a: &Ok, c: &Ok) -> Ok {
        self.mul_raw(a, c)
    }
    fn embed(&self, c: &Ok) -> Ok {
        *c
    }
    #[inline]
    fn val(&self, a: &Ok) -> u32 {
        let mut v = self.cfg.prec;
        for &c in a.iter().take(self.f) {
            if c != 0 {
                v = v.min(self.z.val(c));
            }
        }
        v
    }
    fn cap(&self) -> u32 {
        self.cfg.prec
    }
    fn e(&self) -> u32 {
        1
    }
    fn uniformizer(&self) -> Ok {
        self.pi
    }
    fn div_unif(&self, a: &Ok, k: u32) -> Ok {
        let d = self.div_p(a, k);
        let mut u = [0u64; MAX_FK];
        u[0] = self.z.pow(self.uinv, k as u64);
        self.mul_raw(&d, &u)
    }
    fn inv_unit(&self, a: &Ok) -> Option<Ok> {
        if self.val(a) > 0 {
            return None;
        }
        // a^(q-2) inverts a modulo p; Newton doubles the correct digits.
        let mut y = self.pow(a, self.q() - 2);
        let two = self.int(2);
        let mut good = 1u32;
        while good < self.prec() {
            let ay = self.mul_raw(a, &y);
            y = self.mul_raw(&y, &self.sub(&two, &ay));
            good *= 2;
        }
        Some(y)
    }
    fn base(&self) -> &OkRing {
        self
    }
    fn label(&self) -> &'static str {
        "OK"
    }
    fn to_json(&self, a: &Ok) -> Value {
        serde_json::json!(self.coords(a))
    }
    fn from_json(&self, v: &Value) -> Result<Ok> {
        let arr: Vec<i64> = match v {
            Value::Number(n) => vec![n.as_i64().ok_or_else(|| bad_json("integer"))?],
            Value::Array(_) => serde_json::from_value(v.clone()).map_err(|e| bad_json(&e.to_string()))?,
            _ => return Err(bad_json("coordinate list")),
        };
        if arr.len() > self.f {
            return Err(bad_json("too many coordinates"));
        }
        Ok(self.from_coords(&arr))
    }
}

fn bad_json(what: &str) -> ForgeError {
    ForgeError::Precondition(format!("malformed JSON: {what}"))
}

impl OkRing {
    pub fn elem_from_json(&self, v: &Value) -> Result<OKElem> {
        let raw = self.from_json(v.get("coords").ok_or_else(|| bad_json("coords"))?)?;
        let prec = v.get("prec").and_then(Value::as_u64).unwrap_or(self.prec() as u64) as u32;
        Ok(Elem::new(raw, prec.min(self.prec())))
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Polynomials over the prime field, used for the irreducibility test.
pub(crate) mod fp {
    fn trim(a: &mut Vec<u64>) {
        while a.len() > 1 && *a.last().unwrap() == 0 {
            a.pop();
        }
    }

    fn mulmod(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 * b as u128) % p as u128) as u64
    }

    fn inv(a: u64, p: u64) -> u64 {
        let mut r = 1;
        let mut b = a % p;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b, p);
            }
            b = mulmod(b, b, p);
            e >>= 1;
        }
        r
    }

    pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        let mut r = a.to_vec();
        trim(&mut r);
        let dm = m.len() - 1;
        let lead_inv = inv(m[dm], p);
        while r.len() > dm && !(r.len() == 1 && r[0] == 0) {
            let k = r.len() - 1;
            let c = mulmod(r[k], lead_inv, p);
            for i in 0..=dm {
                let t = mulmod(c, m[i], p);
                r[k - dm + i] = (r[k - dm + i] + p - t) % p;
            }
            trim(&mut r);
            if r.len() - 1 < dm {
                break;
            }
        }
        r
    }

    fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut r = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                r[i + j] = (r[i + j] + mulmod(x, y, p)) % p;
            }
        }
        r
    }

    fn powmod_x(e_pow: u32, m: &[u64], p: u64) -> Vec<u64> {
        // x^(p^e_pow) mod m by repeated p-th powering.
        let mut r = rem(&[0, 1], m, p);
        for _ in 0..e_pow {
            let mut acc = vec![1u64];
            let mut base = r.clone();
            let mut e = p;
            while e > 0 {
                if e & 1 == 1 {
                    acc = rem(&mul(&acc, &base, p), m, p);
                }
                base = rem(&mul(&base, &base, p), m, p);
                e >>= 1;
            }
            r = acc;
        }
        r
    }

    fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        trim(&mut a);
        trim(&mut b);
        while !(b.len() == 1 && b[0] == 0) {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    fn sub_x(a: &[u64], p: u64) -> Vec<u64> {
        let mut r = a.to_vec();
        if r.len() < 2 {
            r.resize(2, 0);
        }
        r[1] = (r[1] + p - 1) % p;
        trim(&mut r);
        r
    }

    /// Rabin's test: m of degree n is irreducible iff x^(p^n) = x mod m and
    /// gcd(x^(p^(n/r)) - x, m) = 1 for every prime r dividing n.
    pub fn is_irreducible(m: &[u64], p: u64) -> bool {
        let n = m.len() - 1;
        if n == 0 || m[n] == 0 {
            return false;
        }
        if n == 1 {
            return true;
        }
        let full = sub_x(&powmod_x(n as u32, m, p), p);
        if !(full.len() == 1 && full[0] == 0) {
            return false;
        }
        for r in 2..=n {
            if n.is_multiple_of(r) && super::is_prime(r as u64) {
                let g = gcd(m, &sub_x(&powmod_x((n / r) as u32, m, p), p), p);
                if g.len() > 1 {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q3() -> OkRing {
        OkRing::new(OKConfig::qp(3, -1, 40)).unwrap()
    }
    fn q27() -> OkRing {
        OkRing::new(OKConfig::new(3, 3, vec![1, 2, 0, 1], -1, 40)).unwrap()
    }

    #[test]
    fn valuations() {
        let r = q27();
        assert_eq!(r.el_val(&r.el(r.pi())), Some(1));
        assert_eq!(r.el_val(&r.el(r.q_elem())), Some(3));
        assert_eq!(r.el_val(&Elem::new(r.zero(), 10)), None);
    }

    #[test]
    fn div_by_pi_examples() {
        let r = q3();
        let pi = r.el(r.pi());
        let x = r.el_mul(&r.el_mul(&pi, &pi), &r.el_int(3));
        let y = r.el_div_unif(&x, 2).unwrap();
        assert_eq!(y.prec, 38);
        assert!(r.el_eq(&y, &r.el_int(3)).unwrap());

        let s = OkRing::new(OKConfig::new(3, 3, vec![1, 2, 0, 1], 1, 40)).unwrap();
        let y = s.el_div_unif(&s.el(s.q_elem()), 1).unwrap();
        assert_eq!(y.prec, 39);
        assert!(s.el_eq(&y, &s.el_int(9)).unwrap());

        assert_eq!(
            r.el_div_unif(&r.el_int(1), 1),
            Err(ForgeError::NotDivisible { val: 0, need: 1 })
        );
        assert!(matches!(
            r.el_div_unif(&Elem::new(r.zero(), 2), 2),
            Err(ForgeError::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn inverse_of_two_mod_81() {
        let r = OkRing::new(OKConfig::qp(3, -1, 4)).unwrap();
        let y = r.el_inv(&r.el_int(2)).unwrap();
        assert_eq!(r.canonical(&y.raw), vec![41]);
        assert_eq!(r.el_inv(&r.el(r.pi())), Err(ForgeError::NotAUnit));
        assert!(r.el_eq(&r.el_inv(&r.el_int(1)).unwrap(), &r.el_int(1)).unwrap());
    }

    #[test]
    fn digit_reps_small_cases() {
        let r = q3();
        let d: Vec<Vec<i64>> = r.digit_reps().iter().map(|e| r.coords(&e.raw)).collect();
        assert_eq!(d, vec![vec![0], vec![1], vec![2]]);
        let r2 = OkRing::new(OKConfig::qp(2, 1, 10)).unwrap();
        assert_eq!(r2.digit_reps().len(), 2);
    }

    #[test]
    fn digit_reps_cubic_pairwise_distinct_mod_pi() {
        let r = q27();
        let d = r.digit_reps();
        assert_eq!(d.len(), 27);
        for i in 0..27 {
            if i > 0 {
                assert_eq!(r.el_val(&d[i]), Some(0));
            }
            for j in 0..i {
                assert_eq!(r.el_val(&r.el_sub(&d[i], &d[j])), Some(0));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(OKConfig::new(3, 3, vec![1, 2, 0, 1], -1, 40).validate().is_ok());
        assert!(OKConfig::new(3, 2, vec![1, 0, 1], -1, 20).validate().is_ok());
        // t^2 + 2 = (t - 1)(t + 1) mod 3.
        assert!(OKConfig::new(3, 2, vec![2, 0, 1], -1, 20).validate().is_err());
        assert!(OKConfig::new(4, 1, vec![0, 1], -1, 20).validate().is_err());
        assert!(OKConfig::new(3, 1, vec![0, 1], 3, 20).validate().is_err());
    }

    fn arb_ok(r: &OkRing) -> impl Strategy<Value = Ok> {
        let r = r.clone();
        proptest::collection::vec(-1_000_000i64..1_000_000, 3).prop_map(move |v| r.from_coords(&v))
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_ok(&q27()), b in arb_ok(&q27()), c in arb_ok(&q27())) {
            let r = q27();
            prop_assert_eq!(r.add(&r.add(&a, &b), &c), r.add(&a, &r.add(&b, &c)));
            prop_assert_eq!(r.mul(&r.mul(&a, &b), &c), r.mul(&a, &r.mul(&b, &c)));
            prop_assert_eq!(r.mul(&a, &r.add(&b, &c)), r.add(&r.mul(&a, &b), &r.mul(&a, &c)));
            prop_assert_eq!(r.mul(&a, &b), r.mul(&b, &a));
        }

        #[test]
        fn frobenius_mod_pi(a in arb_ok(&q3())) {
            let r = q3();
            let d = r.sub(&r.pow(&a, 3), &a);
            prop_assert!(r.val(&d) >= 1);
        }

        #[test]
        fn div_by_pi_inverts_multiplication(a in arb_ok(&q27()), k in 0u32..5) {
            let r = q27();
            let x = r.el(a);
            let pik = r.el_pow(&r.el(r.pi()), k as u64);
            let y = r.el_div_unif(&r.el_mul(&pik, &x), k).unwrap();
            prop_assert_eq!(y.prec, 40 - k);
            prop_assert!(r.el_eq(&y, &x).unwrap());
        }

        #[test]
        fn inverse_is_inverse(a in arb_ok(&q27())) {
            let r = q27();
            let x = r.el(a);
            if r.el_val(&x) == Some(0) {
                let y = r.el_inv(&x).unwrap();
                prop_assert!(r.el_eq(&r.el_mul(&x, &y), &r.el_int(1)).unwrap());
            }
        }
    }
}
