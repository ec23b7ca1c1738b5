//! Totally ramified extensions R[z]/(Phi(z)) for an Eisenstein polynomial Phi.

use serde_json::Value;

use crate::error::{ForgeError, Result};
use crate::okring::{Ok, OkRing};
use crate::ring::Ring;

#[derive(Clone, Debug)]
pub struct Ext<R: Ring> {
    base: R,
    d: usize,
    /// Low coefficients m_0..m_{d-1} of the monic modulus.
    low: Vec<R::E>,
    /// z^d = sum red[i] z^i, sparse.
    red: Vec<(usize, R::E)>,
    /// Inverse of the unit m_0 / uniformizer.
    m0_unit_inv: R::E,
    label: &'static str,
}

impl<R: Ring> Ext<R> {
    /// `low` holds m_0..m_{d-1}; the modulus must be Eisenstein over `base`.
    pub fn new(base: R, low: Vec<R::E>, label: &'static str) -> Result<Self> {
        let d = low.len();
        if d == 0 {
            return Err(ForgeError::Precondition("extension of degree 0".into()));
        }
        if base.val(&low[0]) != 1 {
            return Err(ForgeError::Precondition(
                "modulus constant term is not a uniformizer times a unit".into(),
            ));
        }
        if low.iter().skip(1).any(|c| base.val(c) == 0) {
            return Err(ForgeError::Precondition("modulus is not Eisenstein".into()));
        }
        let red = low
            .iter()
            .enumerate()
            .filter(|(_, c)| !base.is_zero(c))
            .map(|(i, c)| (i, base.neg(c)))
            .collect();
        let u = base.div_unif(&low[0], 1);
        let m0_unit_inv = base
            .inv_unit(&u)
            .ok_or_else(|| ForgeError::Precondition("modulus constant term".into()))?;
        Ok(Ext { base, d, low, red, m0_unit_inv, label })
    }

    pub fn degree(&self) -> usize {
        self.d
    }
    pub fn lower(&self) -> &R {
        &self.base
    }
    pub fn modulus_low(&self) -> &[R::E] {
        &self.low
    }

    /// The element sum c_i z^i.
    pub fn from_coeffs(&self, mut c: Vec<R::E>) -> Vec<R::E> {
        assert!(c.len() <= self.d);
        c.resize(self.d, self.base.zero());
        c
    }

    pub fn lift(&self, c: &R::E) -> Vec<R::E> {
        let mut v = vec![self.base.zero(); self.d];
        v[0] = c.clone();
        v
    }

    pub fn gen(&self) -> Vec<R::E> {
        let mut v = vec![self.base.zero(); self.d];
        if self.d == 1 {
            v[0] = self.base.neg(&self.low[0]);
        } else {
            v[1] = self.base.one();
        }
        v
    }

    /// Reduce a polynomial of any degree modulo the defining polynomial.
    pub fn reduce(&self, mut conv: Vec<R::E>) -> Vec<R::E> {
        let d = self.d;
        if conv.len() > d {
            for k in (d..conv.len()).rev() {
                let c = std::mem::replace(&mut conv[k], self.base.zero());
                if self.base.is_zero(&c) {
                    continue;
                }
                for (i, r) in &self.red {
                    let t = self.base.mul(&c, r);
                    self.base.add_assign(&mut conv[k - d + i], &t);
                }
            }
            conv.truncate(d);
        }
        conv.resize(d, self.base.zero());
        conv
    }

    /// `a * z`, using the reduction rule for the top coefficient.
    pub fn mul_gen(&self, a: &[R::E]) -> Vec<R::E> {
        let d = self.d;
        let b = &self.base;
        let top = a[d - 1].clone();
        let mut r = vec![b.zero(); d];
        r[1..d].clone_from_slice(&a[..d - 1]);
        if !b.is_zero(&top) {
            for (i, c) in &self.red {
                b.mul_add_assign(&mut r[*i], &top, c);
            }
        }
        r
    }

    fn div_z(&self, a: &[R::E]) -> Vec<R::E> {
        let b = &self.base;
        let d = self.d;
        // c_0 / m_0, then multiply by -(z^{d-1} + m_{d-1} z^{d-2} + ... + m_1).
        let t = b.mul(&b.div_unif(&a[0], 1), &self.m0_unit_inv);
        let mut r = vec![b.zero(); d];
        r[..d - 1].clone_from_slice(&a[1..d]);
        b.sub_assign(&mut r[d - 1], &t);
        for j in 0..d - 1 {
            let m = &self.low[j + 1];
            if !b.is_zero(m) {
                let s = b.mul(&t, m);
                b.sub_assign(&mut r[j], &s);
            }
        }
        r
    }
}

impl<R: Ring> Ring for Ext<R> {
    type E = Vec<R::E>;

    fn zero(&self) -> Self::E {
        vec![self.base.zero(); self.d]
    }
    fn one(&self) -> Self::E {
        self.lift(&self.base.one())
    }
    fn is_zero(&self, a: &Self::E) -> bool {
        a.iter().all(|c| self.base.is_zero(c))
    }
    fn add(&self, a: &Self::E, b: &Self::E) -> Self::E {
        a.iter().zip(b).map(|(x, y)| self.base.add(x, y)).collect()
    }
    fn sub(&self, a: &Self::E, b: &Self::E) -> Self::E {
        a.iter().zip(b).map(|(x, y)| self.base.sub(x, y)).collect()
    }
    fn neg(&self, a: &Self::E) -> Self::E {
        a.iter().map(|x| self.base.neg(x)).collect()
    }
    fn add_assign(&self, a: &mut Self::E, b: &Self::E) {
        for (x, y) in a.iter_mut().zip(b) {
            self.base.add_assign(x, y);
        }
    }
    fn sub_assign(&self, a: &mut Self::E, b: &Self::E) {
        for (x, y) in a.iter_mut().zip(b) {
            self.base.sub_assign(x, y);
        }
    }
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E {
        let d = self.d;
        let bz: Vec<bool> = b.iter().map(|c| self.base.is_zero(c)).collect();
        let mut conv = vec![self.base.zero(); 2 * d - 1];
        for i in 0..d {
            if self.base.is_zero(&a[i]) {
                continue;
            }
            for j in 0..d {
                if !bz[j] {
                    self.base.mul_add_assign(&mut conv[i + j], &a[i], &b[j]);
                }
            }
        }
        self.reduce(conv)
    }
    fn scale(&self, a: &Self::E, c: &Ok) -> Self::E {
        a.iter().map(|x| self.base.scale(x, c)).collect()
    }
    fn embed(&self, c: &Ok) -> Self::E {
        self.lift(&self.base.embed(c))
    }
    fn val(&self, a: &Self::E) -> u32 {
        let cap = self.cap();
        let d = self.d as u32;
        a.iter()
            .enumerate()
            .map(|(i, c)| d * self.base.val(c) + i as u32)
            .min()
            .unwrap_or(cap)
            .min(cap)
    }
    fn cap(&self) -> u32 {
        self.d as u32 * self.base.cap()
    }
    fn e(&self) -> u32 {
        self.d as u32 * self.base.e()
    }
    fn uniformizer(&self) -> Self::E {
        self.gen()
    }
    fn div_unif(&self, a: &Self::E, k: u32) -> Self::E {
        let mut r = a.clone();
        for _ in 0..k {
            r = self.div_z(&r);
        }
        r
    }
    fn inv_unit(&self, a: &Self::E) -> Option<Self::E> {
        let c0 = self.base.inv_unit(&a[0])?;
        let mut y = self.lift(&c0);
        let two = self.from_int(2);
        let mut good = 1u32;
        while good < self.cap() {
            let ay = self.mul(a, &y);
            y = self.mul(&y, &self.sub(&two, &ay));
            good *= 2;
        }
        Some(y)
    }
    fn base(&self) -> &OkRing {
        self.base.base()
    }
    fn label(&self) -> &'static str {
        self.label
    }
    fn to_json(&self, a: &Self::E) -> Value {
        Value::Array(a.iter().map(|c| self.base.to_json(c)).collect())
    }
    fn from_json(&self, v: &Value) -> Result<Self::E> {
        let arr = v
            .as_array()
            .ok_or_else(|| ForgeError::Precondition("tower element must be an array".into()))?;
        if arr.len() > self.d {
            return Err(ForgeError::Precondition("too many tower coordinates".into()));
        }
        let mut out: Vec<R::E> = arr.iter().map(|x| self.base.from_json(x)).collect::<Result<_>>()?;
        out.resize(self.d, self.base.zero());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::okring::OKConfig;
    use crate::ring::ElemOps;

    fn k0() -> Ext<OkRing> {
        // z^2 + 3 = f(z)/z for f = 3x + x^3 over Z_3.
        let r = OkRing::new(OKConfig::qp(3, 1, 20)).unwrap();
        let low = vec![r.pi(), r.zero()];
        Ext::new(r, low, "K0").unwrap()
    }

    #[test]
    fn generator_relation() {
        let k = k0();
        let z = k.gen();
        let z2 = k.mul(&z, &z);
        assert_eq!(z2, k.from_int(-3));
        assert_eq!(k.val(&z), 1);
        assert_eq!(k.val(&z2), 2);
        assert_eq!(k.val(&k.from_int(9)), 4);
    }

    #[test]
    fn division_by_uniformizer() {
        let k = k0();
        let z = k.gen();
        let x = k.mul(&z, &k.add(&k.one(), &z));
        // One division by z leaves the top u-adic digit undetermined.
        let y = k.div_unif(&x, 1);
        assert!(k.val(&k.sub(&y, &k.add(&k.one(), &z))) >= k.cap() - 1);
        let three = k.from_int(3);
        let w = k.div_unif(&three, 2);
        assert!(k.val(&k.sub(&k.mul(&w, &k.mul(&z, &z)), &three)) >= k.cap() - 2);
    }

    #[test]
    fn unit_inverse() {
        let k = k0();
        let x = k.add(&k.from_int(2), &k.gen());
        let y = k.inv_unit(&x).unwrap();
        assert_eq!(k.mul(&x, &y), k.one());
        assert!(k.inv_unit(&k.gen()).is_none());
        let e = k.exact(x);
        assert!(k.el_eq(&k.el_mul(&e, &k.el_inv(&e).unwrap()), &k.el_int(1)).unwrap());
    }
}
