//! Coefficient rings with a discrete valuation and precision-tracked elements.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ForgeError, Result};
use crate::okring::{Ok, OkRing};

/// A complete discrete valuation ring truncated at a fixed power of its
/// uniformizer. Valuations are measured in units of the ring's own
/// uniformizer; `e()` is the valuation of `p` in those units.
pub trait Ring: Clone + Debug + Send + Sync {
    type E: Clone + PartialEq + Debug + Send + Sync;

    fn zero(&self) -> Self::E;
    fn one(&self) -> Self::E;
    fn is_zero(&self, a: &Self::E) -> bool;
    fn add(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn sub(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn neg(&self, a: &Self::E) -> Self::E;
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E;
    /// Multiply by an element of the base ring O_K.
    fn scale(&self, a: &Self::E, c: &Ok) -> Self::E;
    /// Image of an element of O_K.
    fn embed(&self, c: &Ok) -> Self::E;
    fn val(&self, a: &Self::E) -> u32;
    /// Largest representable precision (valuation of zero).
    fn cap(&self) -> u32;
    /// Valuation of p in this ring's units.
    fn e(&self) -> u32;
    fn uniformizer(&self) -> Self::E;
    /// Divide by the `k`-th power of the uniformizer; requires `val(a) >= k`.
    fn div_unif(&self, a: &Self::E, k: u32) -> Self::E;
    /// Inverse of a unit, `None` when `a` is not a unit.
    fn inv_unit(&self, a: &Self::E) -> Option<Self::E>;
    fn base(&self) -> &OkRing;
    fn label(&self) -> &'static str;
    fn to_json(&self, a: &Self::E) -> Value;
    fn from_json(&self, v: &Value) -> Result<Self::E>;

    fn add_assign(&self, a: &mut Self::E, b: &Self::E) {
        *a = self.add(a, b);
    }
    fn sub_assign(&self, a: &mut Self::E, b: &Self::E) {
        *a = self.sub(a, b);
    }
    fn mul_add_assign(&self, acc: &mut Self::E, a: &Self::E, b: &Self::E) {
        let t = self.mul(a, b);
        self.add_assign(acc, &t);
    }
    fn from_int(&self, n: i64) -> Self::E {
        self.embed(&self.base().int(n))
    }
    fn pow(&self, a: &Self::E, mut e: u64) -> Self::E {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }
}

/// A ring element together with the precision to which it is known:
/// the true value lies in `raw + (uniformizer^prec)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elem<E> {
    pub raw: E,
    pub prec: u32,
}

impl<E> Elem<E> {
    pub fn new(raw: E, prec: u32) -> Self {
        Elem { raw, prec }
    }
}

/// Precision-aware operations on [`Elem`], available for every [`Ring`].
pub trait ElemOps: Ring {
    fn exact(&self, raw: Self::E) -> Elem<Self::E> {
        Elem { raw, prec: self.cap() }
    }
    fn el_int(&self, n: i64) -> Elem<Self::E> {
        self.exact(self.from_int(n))
    }
    /// Valuation of the known part, capped at the precision.
    fn vcap(&self, a: &Elem<Self::E>) -> u32 {
        self.val(&a.raw).min(a.prec)
    }
    fn el_val(&self, a: &Elem<Self::E>) -> Option<u32> {
        let v = self.val(&a.raw);
        if v >= a.prec {
            None
        } else {
            Some(v)
        }
    }
    fn el_add(&self, a: &Elem<Self::E>, b: &Elem<Self::E>) -> Elem<Self::E> {
        Elem { raw: self.add(&a.raw, &b.raw), prec: a.prec.min(b.prec) }
    }
    fn el_sub(&self, a: &Elem<Self::E>, b: &Elem<Self::E>) -> Elem<Self::E> {
        Elem { raw: self.sub(&a.raw, &b.raw), prec: a.prec.min(b.prec) }
    }
    fn el_neg(&self, a: &Elem<Self::E>) -> Elem<Self::E> {
        Elem { raw: self.neg(&a.raw), prec: a.prec }
    }
    fn el_mul(&self, a: &Elem<Self::E>, b: &Elem<Self::E>) -> Elem<Self::E> {
        let prec = (a.prec + self.vcap(b)).min(b.prec + self.vcap(a)).min(self.cap());
        Elem { raw: self.mul(&a.raw, &b.raw), prec }
    }
    fn el_scale(&self, a: &Elem<Self::E>, c: &Elem<Ok>) -> Elem<Self::E> {
        let base = self.base();
        let e = self.e();
        let vc = base.vcap(c) * e;
        let prec = (a.prec + vc).min(c.prec * e + self.vcap(a)).min(self.cap());
        Elem { raw: self.scale(&a.raw, &c.raw), prec }
    }
    fn el_is_zero(&self, a: &Elem<Self::E>) -> bool {
        self.val(&a.raw) >= a.prec
    }
    /// Equality at the lower of the two precisions.
    fn el_eq(&self, a: &Elem<Self::E>, b: &Elem<Self::E>) -> Result<bool> {
        let p = a.prec.min(b.prec);
        if p == 0 {
            return Err(ForgeError::exhausted("comparison at precision 0"));
        }
        Ok(self.val(&self.sub(&a.raw, &b.raw)) >= p)
    }
    /// Divide by the `k`-th power of the uniformizer, losing `k` units of
    /// precision.
    fn el_div_unif(&self, a: &Elem<Self::E>, k: u32) -> Result<Elem<Self::E>> {
        let v = self.vcap(a);
        if v < k {
            return Err(ForgeError::NotDivisible { val: v, need: k });
        }
        if a.prec <= k {
            return Err(ForgeError::exhausted(format!(
                "division by uniformizer^{k} at precision {}",
                a.prec
            )));
        }
        Ok(Elem { raw: self.div_unif(&a.raw, k), prec: a.prec - k })
    }
    fn el_inv(&self, a: &Elem<Self::E>) -> Result<Elem<Self::E>> {
        if a.prec == 0 || self.val(&a.raw) > 0 {
            return Err(ForgeError::NotAUnit);
        }
        let raw = self.inv_unit(&a.raw).ok_or(ForgeError::NotAUnit)?;
        Ok(Elem { raw, prec: a.prec })
    }
    /// Quotient `a / b` for `val(a) >= val(b)`.
    fn el_div(&self, a: &Elem<Self::E>, b: &Elem<Self::E>) -> Result<Elem<Self::E>> {
        let vb = self
            .el_val(b)
            .ok_or_else(|| ForgeError::exhausted("division by an element indistinguishable from zero"))?;
        let num = if vb == 0 { a.clone() } else { self.el_div_unif(a, vb)? };
        let unit = Elem { raw: self.div_unif(&b.raw, vb), prec: b.prec - vb };
        Ok(self.el_mul(&num, &self.el_inv(&unit)?))
    }
    fn el_pow(&self, a: &Elem<Self::E>, e: u64) -> Elem<Self::E> {
        let mut acc = self.el_int(1);
        let mut base = a.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.el_mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.el_mul(&base, &base);
            }
        }
        acc
    }
    fn el_to_json(&self, a: &Elem<Self::E>) -> Value {
        serde_json::json!({ "coords": self.to_json(&a.raw), "prec": a.prec })
    }
}

impl<R: Ring> ElemOps for R {}
