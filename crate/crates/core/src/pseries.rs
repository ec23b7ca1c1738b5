//! Truncated power series with per-coefficient precision.
//!
//! A series of length `N` stores coefficients of `x^0..x^{N-1}`, the precision
//! of each one, and `tail`: a lower bound for the valuation of every discarded
//! coefficient of degree `>= N`. An exact polynomial has `tail == cap`.

use serde_json::{json, Value};

use crate::error::{ForgeError, Result};
use crate::okring::{OKElem, Ok, OkRing};
use crate::ring::{Elem, ElemOps, Ring};

#[derive(Clone, Debug, PartialEq)]
pub struct PSeries<E> {
    pub c: Vec<E>,
    pub prec: Vec<u32>,
    pub tail: u32,
}

impl<E: Clone> PSeries<E> {
    pub fn len(&self) -> usize {
        self.c.len()
    }
    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
    pub fn coeff(&self, n: usize) -> Elem<E> {
        Elem::new(self.c[n].clone(), self.prec[n])
    }
    pub fn min_prec(&self) -> u32 {
        self.prec.iter().copied().min().unwrap_or(0)
    }
}

/// Outcome of comparing two series coefficient by coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesCheck {
    /// Number of leading coefficients compared at positive precision.
    pub eff_len: usize,
    /// Smallest comparison precision among those coefficients.
    pub min_prec: u32,
    /// First degree where the two sides differ at their common precision.
    pub mismatch: Option<usize>,
}

impl SeriesCheck {
    pub fn ok(&self) -> bool {
        self.mismatch.is_none() && self.eff_len > 0
    }
    pub fn into_result(self, what: &str) -> Result<SeriesCheck> {
        if self.eff_len == 0 {
            return Err(ForgeError::exhausted(format!("{what}: no coefficient survives")));
        }
        Ok(self)
    }
}

/// Declared contraction of an iteration for [`SeriesOps::converge_detect`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gain {
    /// Successive differences gain at least this many powers of x per step.
    XAdic(usize),
    /// Successive differences gain at least this many powers of the uniformizer.
    Adic(u32),
}

fn ceil_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b) + if a.rem_euclid(b) != 0 { 1 } else { 0 }
}

/// Bound `tail + max(0, n - b) * v0` on the error at degree `b` coming from
/// discarded terms of index `>= n` of an outer series composed with an inner
/// series whose constant term has valuation `v0`.
fn tail_bound(tail: u32, n: usize, b: usize, v0: u32, cap: u32) -> u32 {
    if n <= b {
        return tail.min(cap);
    }
    let extra = ((n - b) as u64).saturating_mul(v0 as u64);
    (tail as u64 + extra).min(cap as u64) as u32
}

pub trait SeriesOps: Ring {
    fn s_zero(&self, n: usize) -> PSeries<Self::E> {
        PSeries { c: vec![self.zero(); n], prec: vec![self.cap(); n], tail: self.cap() }
    }
    /// The exact polynomial with the given raw coefficients, truncated or
    /// padded to length `n`.
    fn s_poly(&self, coeffs: &[Self::E], n: usize) -> PSeries<Self::E> {
        let mut s = self.s_zero(n);
        let mut tail = self.cap();
        for (i, c) in coeffs.iter().enumerate() {
            if i < n {
                s.c[i] = c.clone();
            } else {
                tail = tail.min(self.val(c));
            }
        }
        s.tail = tail;
        s
    }
    fn s_const(&self, c: &Elem<Self::E>, n: usize) -> PSeries<Self::E> {
        let mut s = self.s_zero(n);
        if n > 0 {
            s.c[0] = c.raw.clone();
            s.prec[0] = c.prec;
        }
        s
    }
    fn s_one(&self, n: usize) -> PSeries<Self::E> {
        self.s_const(&self.exact(self.one()), n)
    }
    fn s_monomial(&self, k: usize, c: &Self::E, n: usize) -> PSeries<Self::E> {
        let mut s = self.s_zero(n);
        if k < n {
            s.c[k] = c.clone();
        } else {
            s.tail = self.val(c);
        }
        s
    }
    fn s_x(&self, n: usize) -> PSeries<Self::E> {
        self.s_monomial(1, &self.one(), n)
    }
    /// Lift a series over O_K into this ring.
    fn s_embed(&self, a: &PSeries<Ok>) -> PSeries<Self::E> {
        let e = self.e();
        PSeries {
            c: a.c.iter().map(|c| self.embed(c)).collect(),
            prec: a.prec.iter().map(|&p| (p * e).min(self.cap())).collect(),
            tail: (a.tail * e).min(self.cap()),
        }
    }

    fn vcaps(&self, a: &PSeries<Self::E>) -> Vec<u32> {
        a.c.iter().zip(&a.prec).map(|(c, &p)| self.val(c).min(p)).collect()
    }
    /// Lower bound for the valuation of every coefficient, known or not.
    fn s_val(&self, a: &PSeries<Self::E>) -> u32 {
        self.vcaps(a).into_iter().min().unwrap_or(self.cap()).min(a.tail)
    }
    /// Whether every coefficient is divisible by the uniformizer^k at its
    /// precision.
    fn s_divisible(&self, a: &PSeries<Self::E>, k: u32) -> bool {
        self.vcaps(a).iter().all(|&v| v >= k)
    }
    /// Index of the first coefficient not known to vanish.
    fn s_order(&self, a: &PSeries<Self::E>) -> usize {
        a.c.iter()
            .zip(&a.prec)
            .position(|(c, &p)| self.val(c) < p)
            .unwrap_or(a.len())
    }
    fn s_is_zero(&self, a: &PSeries<Self::E>) -> bool {
        self.s_order(a) == a.len()
    }
    fn s_is_exact_poly(&self, a: &PSeries<Self::E>) -> bool {
        a.tail >= self.cap() && a.prec.iter().all(|&p| p >= self.cap())
    }

    /// Change the length; new coefficients are unknown up to the tail bound.
    fn s_resize(&self, a: &PSeries<Self::E>, n: usize) -> PSeries<Self::E> {
        let mut s = a.clone();
        if n < a.len() {
            let dropped = self.vcaps(a)[n..].iter().copied().min().unwrap_or(self.cap());
            s.c.truncate(n);
            s.prec.truncate(n);
            s.tail = s.tail.min(dropped);
        } else {
            s.c.resize(n, self.zero());
            s.prec.resize(n, a.tail);
        }
        s
    }

    fn s_add(&self, a: &PSeries<Self::E>, b: &PSeries<Self::E>) -> PSeries<Self::E> {
        let n = a.len().min(b.len());
        let (a, b) = (self.s_resize(a, n), self.s_resize(b, n));
        PSeries {
            c: a.c.iter().zip(&b.c).map(|(x, y)| self.add(x, y)).collect(),
            prec: a.prec.iter().zip(&b.prec).map(|(x, y)| *x.min(y)).collect(),
            tail: a.tail.min(b.tail),
        }
    }
    fn s_sub(&self, a: &PSeries<Self::E>, b: &PSeries<Self::E>) -> PSeries<Self::E> {
        self.s_add(a, &self.s_neg(b))
    }
    fn s_neg(&self, a: &PSeries<Self::E>) -> PSeries<Self::E> {
        PSeries { c: a.c.iter().map(|x| self.neg(x)).collect(), prec: a.prec.clone(), tail: a.tail }
    }
    /// Multiply by a ring element.
    fn s_scale(&self, a: &PSeries<Self::E>, s: &Elem<Self::E>) -> PSeries<Self::E> {
        let cap = self.cap();
        let vs = self.vcap(s);
        let va = self.vcaps(a);
        PSeries {
            c: a.c.iter().map(|x| self.mul(x, &s.raw)).collect(),
            prec: a
                .prec
                .iter()
                .zip(&va)
                .map(|(&p, &v)| (p + vs).min(s.prec + v).min(cap))
                .collect(),
            tail: (a.tail + vs).min(cap),
        }
    }
    /// Multiply by an element of O_K.
    fn s_scale_ok(&self, a: &PSeries<Self::E>, s: &OKElem) -> PSeries<Self::E> {
        let cap = self.cap();
        let e = self.e();
        let vs = self.base().vcap(s) * e;
        let va = self.vcaps(a);
        PSeries {
            c: a.c.iter().map(|x| self.scale(x, &s.raw)).collect(),
            prec: a
                .prec
                .iter()
                .zip(&va)
                .map(|(&p, &v)| (p + vs).min(s.prec * e + v).min(cap))
                .collect(),
            tail: (a.tail + vs).min(cap),
        }
    }
    /// Divide every coefficient by the uniformizer^k.
    fn s_div_unif(&self, a: &PSeries<Self::E>, k: u32) -> Result<PSeries<Self::E>> {
        let va = self.vcaps(a);
        // A coefficient known to fewer than k digits becomes fully unknown.
        if let Some(i) = va.iter().zip(&a.prec).position(|(&v, &p)| v < k && v < p) {
            return Err(ForgeError::NotDivisible { val: va[i], need: k });
        }
        Ok(PSeries {
            c: a.c.iter().map(|x| self.div_unif(x, k)).collect(),
            prec: a.prec.iter().map(|&p| p.saturating_sub(k)).collect(),
            tail: a.tail.saturating_sub(k),
        })
    }
    /// Multiply by x^k keeping the length.
    fn s_shift_up(&self, a: &PSeries<Self::E>, k: usize) -> PSeries<Self::E> {
        let n = a.len();
        let mut s = self.s_zero(n);
        let va = self.vcaps(a);
        let mut tail = a.tail;
        for i in 0..n {
            if i + k < n {
                s.c[i + k] = a.c[i].clone();
                s.prec[i + k] = a.prec[i];
            } else {
                tail = tail.min(va[i]);
            }
        }
        s.tail = tail;
        s
    }
    /// Divide by x^k; the dropped low coefficients must vanish at their
    /// precision.
    fn s_shift_down(&self, a: &PSeries<Self::E>, k: usize) -> Result<PSeries<Self::E>> {
        let n = a.len();
        if self.s_order(a) < k.min(n) {
            return Err(ForgeError::DivisibilityViolation(format!("series is not divisible by x^{k}")));
        }
        let mut s = self.s_zero(n);
        for i in 0..n {
            if i + k < n {
                s.c[i] = a.c[i + k].clone();
                s.prec[i] = a.prec[i + k];
            } else {
                s.prec[i] = a.tail;
            }
        }
        s.tail = a.tail;
        Ok(s)
    }

    fn s_mul(&self, a: &PSeries<Self::E>, b: &PSeries<Self::E>) -> PSeries<Self::E> {
        let n = a.len().min(b.len());
        let (a, b) = (self.s_resize(a, n), self.s_resize(b, n));
        let cap = self.cap();
        let va = self.vcaps(&a);
        let vb = self.vcaps(&b);
        let supp = |s: &PSeries<Self::E>| -> Vec<usize> {
            (0..n).filter(|&i| s.prec[i] < cap || !self.is_zero(&s.c[i])).collect()
        };
        let sa = supp(&a);
        let sb = supp(&b);
        // Iterate over the sparser factor.
        let (x, y, sx, vx, vy) = if sa.len() <= sb.len() { (&a, &b, &sa, &va, &vb) } else { (&b, &a, &sb, &vb, &va) };
        let mut c = vec![self.zero(); n];
        let mut prec = vec![cap; n];
        let y_exact = y.prec.iter().all(|&p| p >= cap);
        let x_exact = sx.iter().all(|&i| x.prec[i] >= cap);
        for &i in sx {
            let xi = &x.c[i];
            let xi_zero = self.is_zero(xi);
            for j in 0..n - i {
                if !xi_zero && !self.is_zero(&y.c[j]) {
                    self.mul_add_assign(&mut c[i + j], xi, &y.c[j]);
                }
                if !(x_exact && y_exact) {
                    let p = (x.prec[i] + vy[j]).min(y.prec[j] + vx[i]);
                    if p < prec[i + j] {
                        prec[i + j] = p;
                    }
                }
            }
        }
        // Discarded products: degree >= n from known parts, plus the tails.
        let mut tail = cap;
        let all_a = va.iter().copied().min().unwrap_or(cap).min(a.tail);
        let all_b = vb.iter().copied().min().unwrap_or(cap).min(b.tail);
        tail = tail.min(a.tail.saturating_add(all_b)).min(b.tail.saturating_add(all_a));
        let mut suffix = vec![cap; n + 1];
        for j in (0..n).rev() {
            suffix[j] = suffix[j + 1].min(vb[j]);
        }
        for i in 0..n {
            if va[i] < cap {
                tail = tail.min(va[i].saturating_add(suffix[n - i]));
            }
        }
        PSeries { c, prec: prec.into_iter().map(|p| p.min(cap)).collect(), tail: tail.min(cap) }
    }

    fn s_pow(&self, a: &PSeries<Self::E>, e: u64) -> PSeries<Self::E> {
        let mut acc = self.s_one(a.len());
        let mut base = a.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.s_mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.s_mul(&base, &base);
            }
        }
        acc
    }

    /// Multiplicative inverse of a series with unit constant term.
    fn s_inv(&self, a: &PSeries<Self::E>) -> Result<PSeries<Self::E>> {
        let n = a.len();
        if n == 0 {
            return Ok(a.clone());
        }
        let a0 = a.coeff(0);
        let b0 = self.el_inv(&a0).map_err(|_| ForgeError::NotInvertible("constant term is not a unit".into()))?;
        // b_n = -b_0 * sum_{i>=1} a_i b_{n-i}
        let mut b: Vec<Elem<Self::E>> = Vec::with_capacity(n);
        b.push(b0.clone());
        let ac: Vec<Elem<Self::E>> = (0..n).map(|i| a.coeff(i)).collect();
        let nz: Vec<usize> = (1..n).filter(|&i| ac[i].prec < self.cap() || !self.is_zero(&ac[i].raw)).collect();
        for m in 1..n {
            let mut s = self.exact(self.zero());
            for &i in &nz {
                if i > m {
                    break;
                }
                s = self.el_add(&s, &self.el_mul(&ac[i], &b[m - i]));
            }
            b.push(self.el_neg(&self.el_mul(&b0, &s)));
        }
        Ok(PSeries { c: b.iter().map(|e| e.raw.clone()).collect(), prec: b.iter().map(|e| e.prec).collect(), tail: if self.s_is_exact_poly(a) && n == 1 { self.cap() } else { 0 } })
    }

    fn s_deriv(&self, a: &PSeries<Self::E>) -> PSeries<Self::E> {
        let n = a.len();
        let mut s = self.s_zero(n);
        for i in 1..n {
            let k = self.exact(self.from_int(i as i64));
            let e = self.el_mul(&a.coeff(i), &k);
            s.c[i - 1] = e.raw;
            s.prec[i - 1] = e.prec;
        }
        if n > 0 {
            s.prec[n - 1] = a.tail;
        }
        s.tail = a.tail;
        s
    }

    /// Evaluate at an element of positive valuation (or any element when the
    /// series is an exact polynomial).
    fn s_eval(&self, a: &PSeries<Self::E>, x: &Elem<Self::E>) -> Elem<Self::E> {
        let mut acc = self.exact(self.zero());
        for i in (0..a.len()).rev() {
            acc = self.el_add(&self.el_mul(&acc, x), &a.coeff(i));
        }
        let vx = self.vcap(x) as u64;
        let bound = (a.tail as u64 + vx * a.len() as u64).min(self.cap() as u64) as u32;
        acc.prec = acc.prec.min(bound);
        acc
    }

    /// Composition `g(h(x))`, truncated at the length of `h`.
    fn s_compose(&self, g: &PSeries<Self::E>, h: &PSeries<Self::E>) -> Result<PSeries<Self::E>> {
        let n = h.len();
        let cap = self.cap();
        let v0 = self.vcap(&h.coeff(0).clone());
        let h_const = n > 0 && v0 < cap && !(h.prec[0] >= cap && self.is_zero(&h.c[0]));
        if h_const && v0 == 0 && g.tail == 0 {
            return Err(ForgeError::ConstantTermNotTopologicallyNilpotent);
        }
        // Outer terms that can reach degree < n.
        let ng = if h_const { g.len() } else { g.len().min(n) };
        let gv = self.vcaps(g);
        let support: Vec<usize> = (0..ng).filter(|&i| g.prec[i] < cap || !self.is_zero(&g.c[i])).collect();
        let mut out = if support.is_empty() {
            self.s_zero(n)
        } else {
            let h_nnz = (0..n).filter(|&i| h.prec[i] < cap || !self.is_zero(&h.c[i])).count();
            if !h_const && h_nnz <= 4 {
                compose_horner(self, g, h, ng)
            } else {
                compose_bsgs(self, g, h, &support)
            }
        };
        // Error from the unknown part of g.
        let gl = g.len();
        let v0_eff = if h_const { v0 } else { cap };
        for b in 0..n {
            let tb = if h_const || gl <= b {
                tail_bound(g.tail, gl, b, v0_eff, cap)
            } else {
                cap
            };
            out.prec[b] = out.prec[b].min(tb);
        }
        let gmin = gv.iter().copied().min().unwrap_or(cap).min(g.tail);
        out.tail = if h.tail >= cap && self.s_is_exact_poly(g) && gl <= 1 { cap } else { gmin.min(out.tail.max(gmin)) };
        Ok(out)
    }

    /// Compositional inverse of `f` with `f(0) = 0` and unit linear term.
    fn s_comp_inverse(&self, f: &PSeries<Self::E>) -> Result<PSeries<Self::E>> {
        let n = f.len();
        if n < 2 {
            return Ok(self.s_zero(n));
        }
        if self.s_order(f) == 0 {
            return Err(ForgeError::Precondition("series has a nonzero constant term".into()));
        }
        let f1 = f.coeff(1);
        if self.el_val(&f1) != Some(0) {
            return Err(ForgeError::NotInvertible("linear coefficient is not a unit".into()));
        }
        let f1inv = self.el_inv(&f1)?;
        let x = self.s_x(n);
        // Newton iteration g <- g - (f(g) - x) / f'(g), doubling the x-adic
        // accuracy each round.
        let fd = self.s_deriv(f);
        let mut g = self.s_scale(&x, &f1inv);
        let mut good = 2usize;
        while good < n {
            let prev = good.min(g.len());
            good = (2 * good).min(n);
            // The previous approximate inverse is exact as a polynomial; its
            // x-adic error is what the Newton step removes.
            let mut gm = self.s_resize(&g, good);
            for i in prev..good {
                gm.prec[i] = self.cap();
            }
            gm.tail = self.cap();
            let fg = self.s_compose(f, &gm)?;
            let r = self.s_sub(&fg, &self.s_resize(&x, good));
            let d = self.s_compose(&fd, &gm)?;
            let corr = self.s_mul(&r, &self.s_inv(&d)?);
            g = self.s_sub(&gm, &corr);
        }
        let mut g = self.s_resize(&g, n);
        g.tail = 0;
        Ok(g)
    }

    /// Compare two series at the common precision of each coefficient.
    fn s_check_eq(&self, a: &PSeries<Self::E>, b: &PSeries<Self::E>) -> SeriesCheck {
        let n = a.len().min(b.len());
        let mut eff_len = 0;
        let mut min_prec = self.cap();
        let mut mismatch = None;
        for i in 0..n {
            let p = a.prec[i].min(b.prec[i]);
            if p == 0 {
                break;
            }
            eff_len = i + 1;
            min_prec = min_prec.min(p);
            if mismatch.is_none() && self.val(&self.sub(&a.c[i], &b.c[i])) < p {
                mismatch = Some(i);
            }
        }
        SeriesCheck { eff_len, min_prec: if eff_len == 0 { 0 } else { min_prec }, mismatch }
    }
    /// Compare on the first `n` coefficients only.
    fn s_check_eq_upto(&self, a: &PSeries<Self::E>, b: &PSeries<Self::E>, n: usize) -> SeriesCheck {
        self.s_check_eq(&self.s_resize(a, n.min(a.len())), &self.s_resize(b, n.min(b.len())))
    }

    /// Detect stabilization of a sequence with declared gain. Returns the
    /// limit and the 1-based index of the first term that equals every later
    /// term.
    fn converge_detect(&self, seq: &[PSeries<Self::E>], gain: Gain) -> Result<(PSeries<Self::E>, usize)> {
        if seq.is_empty() {
            return Err(ForgeError::NoConvergence("empty sequence".into()));
        }
        let mut last_measure: Option<u64> = None;
        for k in 0..seq.len() - 1 {
            let d = self.s_sub(&seq[k + 1], &seq[k]);
            if self.s_is_zero(&d) {
                // Every remaining difference must vanish as well.
                for j in k + 1..seq.len() - 1 {
                    let dj = self.s_sub(&seq[j + 1], &seq[j]);
                    if !self.s_is_zero(&dj) {
                        return Err(ForgeError::NoConvergence(format!("difference {j} reappears")));
                    }
                }
                return Ok((seq[k].clone(), k + 1));
            }
            let measure = match gain {
                Gain::XAdic(_) => self.s_order(&d) as u64,
                Gain::Adic(_) => self.vcaps(&d).into_iter().min().unwrap_or(self.cap()) as u64,
            };
            let step = match gain {
                Gain::XAdic(g) => g as u64,
                Gain::Adic(g) => g as u64,
            };
            if let Some(prev) = last_measure {
                if measure < prev + step {
                    return Err(ForgeError::NoConvergence(format!(
                        "step {k}: measure {measure} did not grow by {step} from {prev}"
                    )));
                }
            }
            last_measure = Some(measure);
        }
        Err(ForgeError::NoConvergence("sequence did not stabilize".into()))
    }

    fn s_to_json(&self, a: &PSeries<Self::E>) -> Value {
        json!({
            "ring": self.label(),
            "N": a.len(),
            "minprec": a.min_prec(),
            "coeffs": a.c.iter().map(|c| self.to_json(c)).collect::<Vec<_>>(),
            "prec": a.prec,
        })
    }
    fn s_from_json(&self, v: &Value) -> Result<PSeries<Self::E>> {
        let coeffs = v
            .get("coeffs")
            .and_then(Value::as_array)
            .ok_or_else(|| ForgeError::Precondition("series JSON needs coeffs".into()))?;
        let n = v.get("N").and_then(Value::as_u64).map(|n| n as usize).unwrap_or(coeffs.len());
        let raw: Vec<Self::E> = coeffs.iter().map(|c| self.from_json(c)).collect::<Result<_>>()?;
        let mut s = self.s_poly(&raw, n);
        if let Some(mp) = v.get("minprec").and_then(Value::as_u64) {
            let mp = (mp as u32).min(self.cap());
            if mp < self.cap() {
                s.prec.iter_mut().for_each(|p| *p = mp);
                s.tail = 0;
            }
        }
        if let Some(pr) = v.get("prec").and_then(Value::as_array) {
            for (i, p) in pr.iter().enumerate().take(n) {
                if let Some(p) = p.as_u64() {
                    s.prec[i] = (p as u32).min(self.cap());
                }
            }
        }
        Ok(s)
    }
}

impl<R: Ring> SeriesOps for R {}

fn compose_horner<R: Ring>(r: &R, g: &PSeries<R::E>, h: &PSeries<R::E>, ng: usize) -> PSeries<R::E> {
    let n = h.len();
    let mut acc = r.s_zero(n);
    for i in (0..ng).rev() {
        acc = r.s_mul(&acc, h);
        let p = acc.prec[0].min(g.prec[i]);
        acc.c[0] = r.add(&acc.c[0], &g.c[i]);
        acc.prec[0] = p;
    }
    acc
}

fn compose_bsgs<R: Ring>(r: &R, g: &PSeries<R::E>, h: &PSeries<R::E>, support: &[usize]) -> PSeries<R::E> {
    let n = h.len();
    let lo = support[0];
    let mut d = 0usize;
    for &i in support {
        d = gcd(d, i - lo);
    }
    if d == 0 {
        d = 1;
    }
    let hr = r.s_pow(h, lo as u64);
    let hd = r.s_pow(h, d as u64);
    let top = (support[support.len() - 1] - lo) / d;
    let m = top + 1;
    let s = ((m as f64).sqrt().ceil() as usize).max(1);
    let mut baby = Vec::with_capacity(s);
    baby.push(r.s_one(n));
    for i in 1..s {
        baby.push(r.s_mul(&baby[i - 1], &hd));
    }
    let giant = r.s_mul(&baby[s - 1], &hd);
    let blocks = m.div_ceil(s);
    let mut acc = r.s_zero(n);
    for bi in (0..blocks).rev() {
        let mut blk = r.s_zero(n);
        for i in 0..s {
            let k = bi * s + i;
            if k >= m {
                break;
            }
            let idx = lo + k * d;
            if g.prec[idx] >= r.cap() && r.is_zero(&g.c[idx]) {
                continue;
            }
            blk = r.s_add(&blk, &r.s_scale(&baby[i], &g.coeff(idx)));
        }
        acc = if bi == blocks - 1 { blk } else { r.s_add(&r.s_mul(&acc, &giant), &blk) };
    }
    r.s_mul(&acc, &hr)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Bivariate truncated series stored by homogeneous layers: layer `d` holds
/// the coefficients of `x^i y^{d-i}` for `i = 0..=d`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiSeries<E> {
    pub layers: Vec<Vec<E>>,
    pub prec: Vec<Vec<u32>>,
}

impl<E: Clone> BiSeries<E> {
    /// Total degree bound: terms of total degree `< n` are stored.
    pub fn n(&self) -> usize {
        self.layers.len()
    }
    /// Coefficient of x^i y^j.
    pub fn get(&self, i: usize, j: usize) -> &E {
        &self.layers[i + j][i]
    }
    pub fn get_prec(&self, i: usize, j: usize) -> u32 {
        self.prec[i + j][i]
    }
}

pub trait BiSeriesOps: SeriesOps {
    fn bi_zero(&self, n: usize) -> BiSeries<Self::E> {
        BiSeries {
            layers: (0..n).map(|d| vec![self.zero(); d + 1]).collect(),
            prec: (0..n).map(|d| vec![self.cap(); d + 1]).collect(),
        }
    }

    fn bi_is_symmetric(&self, f: &BiSeries<Self::E>) -> bool {
        (0..f.n()).all(|d| (0..=d).all(|i| {
            let p = f.prec[d][i].min(f.prec[d][d - i]);
            self.val(&self.sub(&f.layers[d][i], &f.layers[d][d - i])) >= p
        }))
    }

    /// `F(a(x), b(x))` truncated at the common length of `a` and `b`.
    fn bi_substitute(&self, f: &BiSeries<Self::E>, a: &PSeries<Self::E>, b: &PSeries<Self::E>) -> Result<PSeries<Self::E>> {
        let n = a.len().min(b.len());
        let (a, b) = (self.s_resize(a, n), self.s_resize(b, n));
        let cap = self.cap();
        let va0 = if n > 0 { self.vcap(&a.coeff(0)) } else { cap };
        let vb0 = if n > 0 { self.vcap(&b.coeff(0)) } else { cap };
        if va0 == 0 || vb0 == 0 {
            return Err(ForgeError::ConstantTermNotTopologicallyNilpotent);
        }
        let nf = f.n();
        // Powers needed: i, j < nf; with zero constants only i, j < n matter.
        let const_free = va0 >= cap && vb0 >= cap;
        let top = if const_free { nf.min(n) } else { nf };
        let mut apow = vec![self.s_one(n)];
        for i in 1..top {
            apow.push(self.s_mul(&apow[i - 1], &a));
        }
        let mut bpow = vec![self.s_one(n)];
        for j in 1..top {
            bpow.push(self.s_mul(&bpow[j - 1], &b));
        }
        let mut out = self.s_zero(n);
        for i in 0..top {
            let mut inner = self.s_zero(n);
            let mut any = false;
            for j in 0..top {
                if i + j >= nf {
                    break;
                }
                let c = &f.layers[i + j][i];
                let p = f.prec[i + j][i];
                if p >= cap && self.is_zero(c) {
                    continue;
                }
                any = true;
                inner = self.s_add(&inner, &self.s_scale(&bpow[j], &Elem::new(c.clone(), p)));
            }
            if any {
                out = self.s_add(&out, &self.s_mul(&apow[i], &inner));
            }
        }
        // Terms of total degree >= nf.
        let v0 = va0.min(vb0);
        for bdeg in 0..n {
            let bound = if bdeg >= nf {
                0
            } else if const_free {
                cap
            } else {
                ((nf - bdeg) as u64 * v0 as u64).min(cap as u64) as u32
            };
            out.prec[bdeg] = out.prec[bdeg].min(bound);
        }
        out.tail = 0;
        Ok(out)
    }

    /// Left fold of formal-group addition over the terms.
    fn lt_sum(&self, f: &BiSeries<Self::E>, terms: &[PSeries<Self::E>]) -> Result<PSeries<Self::E>> {
        let mut it = terms.iter();
        let first = it
            .next()
            .ok_or_else(|| ForgeError::Precondition("lt_sum of no terms".into()))?
            .clone();
        it.try_fold(first, |acc, t| self.bi_substitute(f, &acc, t))
    }
}

impl<R: Ring> BiSeriesOps for R {}

/// Series over K whose coefficients are `num_n / pi^{den_n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSeries {
    pub num: PSeries<Ok>,
    pub den: Vec<u32>,
}

impl KSeries {
    pub fn to_json(&self, r: &OkRing) -> Value {
        json!({
            "ring": "K",
            "N": self.num.len(),
            "minprec": self.num.min_prec(),
            "coeffs": self.num.c.iter().map(|c| r.to_json(c)).collect::<Vec<_>>(),
            "pi_denominators": self.den,
        })
    }
}

/// `ceil(a / b)` for signed numerators.
pub fn ceil_div_i(a: i64, b: i64) -> i64 {
    ceil_div(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::okring::OKConfig;
    use crate::Ext;
    use proptest::prelude::*;

    fn z3() -> OkRing {
        OkRing::new(OKConfig::qp(3, -1, 30)).unwrap()
    }

    fn ints(r: &OkRing, v: &[i64], n: usize) -> PSeries<Ok> {
        let c: Vec<Ok> = v.iter().map(|&x| r.int(x)).collect();
        r.s_poly(&c, n)
    }

    fn as_ints(r: &OkRing, s: &PSeries<Ok>) -> Vec<i64> {
        s.c.iter().map(|c| r.coords(c)[0]).collect()
    }

    #[test]
    fn compose_identity_and_gm_doubling() {
        let r = z3();
        let x2 = ints(&r, &[0, 0, 1], 6);
        let out = r.s_compose(&x2, &r.s_x(6)).unwrap();
        assert_eq!(as_ints(&r, &out), vec![0, 0, 1, 0, 0, 0]);

        let r2 = OkRing::new(OKConfig::qp(2, 1, 20)).unwrap();
        let sq = ints(&r2, &[0, 2, 1], 6);
        let out = r2.s_compose(&sq, &sq).unwrap();
        assert_eq!(as_ints(&r2, &out), vec![0, 4, 6, 4, 1, 0]);
    }

    #[test]
    fn inverse_of_x_plus_x2_has_catalan_coefficients() {
        let r = z3();
        let f = ints(&r, &[0, 1, 1], 8);
        let g = r.s_comp_inverse(&f).unwrap();
        assert_eq!(as_ints(&r, &g), vec![0, 1, -1, 2, -5, 14, -42, 132]);
        assert_eq!(as_ints(&r, &r.s_comp_inverse(&r.s_x(8)).unwrap()), vec![0, 1, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn inverse_of_log_is_exp_minus_one() {
        // p larger than the truncation so 1/n and 1/n! are units.
        let r = OkRing::new(OKConfig::qp(101, 1, 8)).unwrap();
        let n = 8;
        let mut log = r.s_zero(n);
        for k in 1..n {
            let s = if k % 2 == 1 { 1 } else { -1 };
            log.c[k] = r.inv_unit(&r.int(s * k as i64)).unwrap();
        }
        let e = r.s_comp_inverse(&log).unwrap();
        let mut fact = 1i64;
        for k in 1..n {
            fact *= k as i64;
            let expect = r.inv_unit(&r.int(fact)).unwrap();
            assert_eq!(e.c[k], expect, "degree {k}");
        }
    }

    #[test]
    fn converge_detect_cases() {
        let r = z3();
        let f = ints(&r, &[1, 2, 3], 4);
        let (lim, k) = r.converge_detect(&[f.clone(), f.clone(), f.clone()], Gain::XAdic(1)).unwrap();
        assert_eq!(lim, f);
        assert_eq!(k, 1);

        // Partial sums of sum pi^n x^n stabilize once pi^n vanishes mod p^M.
        let pi = r.el(r.pi());
        let mut seq = vec![];
        let mut acc = r.s_zero(3);
        for k in 0..40u64 {
            let term = r.s_const(&r.el_pow(&pi, k), 3);
            acc = r.s_add(&acc, &term);
            seq.push(acc.clone());
        }
        let (_, k) = r.converge_detect(&seq, Gain::Adic(1)).unwrap();
        assert_eq!(k, 30);

        let bad = vec![ints(&r, &[0, 1], 4), ints(&r, &[0, 2], 4), ints(&r, &[0, 3], 4)];
        assert!(matches!(r.converge_detect(&bad, Gain::XAdic(1)), Err(ForgeError::NoConvergence(_))));
    }

    #[test]
    fn composition_tracks_constant_term_precision() {
        let r = z3();
        // g(x) = 1 + x + x^2 + ... known to degree 6; h = 3 + x.
        let g = PSeries { c: vec![r.int(1); 6], prec: vec![30; 6], tail: 0 };
        let h = ints(&r, &[3, 1], 6);
        let out = r.s_compose(&g, &h).unwrap();
        // The discarded part sum_{n>=6} (3+x)^n is O(3^{6-b}) at degree b.
        for b in 0..6 {
            assert_eq!(out.prec[b], (6 - b) as u32);
        }
    }

    #[test]
    fn bi_substitute_simple_laws() {
        let r = z3();
        let n = 8;
        let mut gm = r.bi_zero(n);
        gm.layers[1][0] = r.one();
        gm.layers[1][1] = r.one();
        gm.layers[2][1] = r.one();
        let x = r.s_x(n);
        let two_x = r.bi_substitute(&gm, &x, &x).unwrap();
        assert_eq!(as_ints(&r, &two_x)[..3], [0, 2, 1]);
        let s = r.lt_sum(&gm, &[x.clone(), x.clone()]).unwrap();
        assert_eq!(s, two_x);
        let mut add = r.bi_zero(n);
        add.layers[1][0] = r.one();
        add.layers[1][1] = r.one();
        let f = ints(&r, &[0, 1, 5], n);
        let g = ints(&r, &[0, 3, 0, 7], n);
        assert_eq!(r.bi_substitute(&add, &f, &g).unwrap().c, r.s_add(&f, &g).c);
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let r = z3();
        let a = ints(&r, &[0, 3, 0, 0, 1], 10);
        let b = ints(&r, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], 10);
        let ab = r.s_mul(&a, &b);
        let ba = r.s_mul(&b, &a);
        assert_eq!(ab, ba);
        assert_eq!(as_ints(&r, &ab)[..5], [0, 3, 6, 9, 13]);
    }

    #[test]
    fn tower_valued_series() {
        let r = OkRing::new(OKConfig::qp(3, 1, 10)).unwrap();
        let k = Ext::new(r.clone(), vec![r.pi(), r.zero()], "K0").unwrap();
        let z = k.gen();
        let s = k.s_poly(&[z.clone(), k.one()], 4);
        let sq = k.s_mul(&s, &s);
        assert_eq!(sq.c[0], k.from_int(-3));
        assert_eq!(sq.c[1], k.add(&z, &z));
    }

    fn arb_series(n: usize) -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::vec(-50i64..50, n)
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in arb_series(8), b in arb_series(8), c in arb_series(8)) {
            let r = z3();
            let f = ints(&r, &a, 8);
            let mut gv = b.clone(); gv[0] = 0;
            let mut hv = c.clone(); hv[0] = 0;
            let g = ints(&r, &gv, 8);
            let h = ints(&r, &hv, 8);
            let lhs = r.s_compose(&r.s_compose(&f, &g).unwrap(), &h).unwrap();
            let rhs = r.s_compose(&f, &r.s_compose(&g, &h).unwrap()).unwrap();
            prop_assert!(r.s_check_eq(&lhs, &rhs).ok());
        }

        #[test]
        fn evaluation_is_a_homomorphism(a in arb_series(10), b in arb_series(10), m in 1i64..200) {
            let r = z3();
            let f = ints(&r, &a, 10);
            let g = ints(&r, &b, 10);
            let pt = r.el_int(3 * m);
            let lhs = r.s_eval(&r.s_mul(&f, &g), &pt);
            let rhs = r.el_mul(&r.s_eval(&f, &pt), &r.s_eval(&g, &pt));
            prop_assert!(lhs.prec >= 10);
            prop_assert!(r.el_eq(&lhs, &rhs).unwrap());
        }

        #[test]
        fn bi_substitute_symmetric_law(a in arb_series(6), b in arb_series(6)) {
            let r = z3();
            let n = 6;
            let mut gm = r.bi_zero(n);
            gm.layers[1][0] = r.one();
            gm.layers[1][1] = r.one();
            gm.layers[2][1] = r.one();
            let mut av = a.clone(); av[0] = 0;
            let mut bv = b.clone(); bv[0] = 0;
            let f = ints(&r, &av, n);
            let g = ints(&r, &bv, n);
            prop_assert_eq!(r.bi_substitute(&gm, &f, &g).unwrap().c, r.bi_substitute(&gm, &g, &f).unwrap().c);
        }
    }
}
