//! The fields K_0 = K(u_0) and K_1 = K(u_1) generated by torsion points, as
//! quotient rings over O_K, with traces, norms, conjugation and interpolation.

use std::sync::Arc;

use crate::error::{ForgeError, Result};
use crate::ext::Ext;
use crate::lubin_tate::FormalGroup;
use crate::okring::{OKElem, Ok, OkRing};
use crate::pseries::{PSeries, SeriesOps};
use crate::ring::{Elem, ElemOps, Ring};

pub type K0 = Ext<OkRing>;
pub type K1 = Ext<K0>;
pub type K0Elem = Elem<Vec<Ok>>;
pub type K1Elem = Elem<Vec<Vec<Ok>>>;

/// Power sums `p_0..p_{count-1}` of the roots of the monic polynomial with
/// low coefficients `low` (constant term first).
pub fn power_sums<R: Ring>(r: &R, low: &[R::E], count: usize) -> Vec<R::E> {
    let d = low.len();
    let coef = |i: usize| -> R::E {
        // coefficient of Y^i, with the leading one at i = d
        if i == d {
            r.one()
        } else {
            low[i].clone()
        }
    };
    let mut p: Vec<R::E> = Vec::with_capacity(count);
    for k in 0..count {
        if k == 0 {
            p.push(r.from_int(d as i64));
            continue;
        }
        let mut acc = r.zero();
        for i in 1..k.min(d + 1) {
            // Newton's identities; the k c_{d-k} term only appears for k <= d.
            let t = r.mul(&coef(d - i), &p[k - i]);
            acc = r.add(&acc, &t);
        }
        if k <= d {
            let t = r.mul(&r.from_int(k as i64), &coef(d - k));
            acc = r.add(&acc, &t);
        }
        p.push(r.neg(&acc));
    }
    p
}

/// Determinant by the division-free Berkowitz algorithm.
pub fn berkowitz_det<R: Ring>(r: &R, a: &[Vec<Elem<R::E>>]) -> Elem<R::E> {
    let n = a.len();
    if n == 0 {
        return r.el_int(1);
    }
    let mut c: Vec<Elem<R::E>> = vec![r.el_int(1), r.el_neg(&a[0][0])];
    for k in 1..n {
        // A_{k+1} = [[A_k, S], [R, a_kk]].
        let s: Vec<Elem<R::E>> = (0..k).map(|i| a[i][k].clone()).collect();
        let row: Vec<Elem<R::E>> = (0..k).map(|j| a[k][j].clone()).collect();
        let mut t: Vec<Elem<R::E>> = vec![r.el_int(1), r.el_neg(&a[k][k])];
        let mut v = s.clone();
        for _ in 0..k {
            let dot = row.iter().zip(&v).fold(r.el_int(0), |acc, (x, y)| r.el_add(&acc, &r.el_mul(x, y)));
            t.push(r.el_neg(&dot));
            v = (0..k)
                .map(|i| (0..k).fold(r.el_int(0), |acc, j| r.el_add(&acc, &r.el_mul(&a[i][j], &v[j]))))
                .collect();
        }
        let mut next = vec![r.el_int(0); k + 2];
        for (i, slot) in next.iter_mut().enumerate() {
            for j in 0..=i.min(k) {
                if i - j < t.len() {
                    *slot = r.el_add(slot, &r.el_mul(&t[i - j], &c[j]));
                }
            }
        }
        c = next;
    }
    if n % 2 == 0 {
        c[n].clone()
    } else {
        r.el_neg(&c[n])
    }
}

/// Multiplication-by-`x` matrix of an extension over its lower ring.
pub fn mult_matrix<R: Ring>(ext: &Ext<R>, x: &Elem<Vec<R::E>>) -> Vec<Vec<Elem<R::E>>> {
    let d = ext.degree();
    let low = ext.lower();
    let e = ext.e() / low.e();
    let mut cols: Vec<Vec<R::E>> = Vec::with_capacity(d);
    let mut cur = x.raw.clone();
    for _ in 0..d {
        cols.push(cur.clone());
        cur = ext.mul(&cur, &ext.gen());
    }
    // Precision of each lower coordinate of an element known to prec P.
    let lp = x.prec.div_ceil(e).min(low.cap());
    (0..d).map(|i| (0..d).map(|j| Elem::new(cols[j][i].clone(), lp)).collect()).collect()
}

/// Horner evaluation at the generator, using the cheap multiplication by it.
pub fn eval_at_gen<R: Ring>(ext: &Ext<R>, s: &PSeries<Ok>) -> Elem<Vec<R::E>> {
    let cap = ext.cap();
    let e = ext.e();
    let mut acc = ext.zero();
    let mut prec = cap as u64;
    for k in (0..s.len()).rev() {
        acc = ext.mul_gen(&acc);
        let c = ext.embed(&s.c[k]);
        ext.add_assign(&mut acc, &c);
        prec = prec.min(s.prec[k] as u64 * e as u64 + k as u64);
    }
    prec = prec.min(s.tail as u64 * e as u64 + s.len() as u64);
    Elem::new(acc, prec.min(cap as u64) as u32)
}

/// The tower `O_K -> O_{K_0} -> O_{K_1}` for a group with a monic seed of
/// degree q.
pub struct Tower {
    group: Arc<FormalGroup>,
    k0: K0,
    k1: Option<K1>,
    /// `Tr_{K_0/K}(u_0^i)` for `i < q - 1`.
    tr0: Vec<Ok>,
    /// `Tr_{K_1/K_0}(u_1^i)` for `i < q`.
    tr1: Vec<Vec<Ok>>,
}

impl std::fmt::Debug for Tower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tower").field("level", &self.level()).finish()
    }
}

impl Tower {
    pub fn new(group: Arc<FormalGroup>, level: usize) -> Result<Self> {
        let r = group.ring().clone();
        let q = r.q() as usize;
        let seed = group.seed();
        if seed.len() != q + 1 || seed[q] != r.one() {
            return Err(ForgeError::Precondition("tower needs a monic seed of degree q".into()));
        }
        if level > 1 {
            return Err(ForgeError::TowerDepth(level));
        }
        // f(z)/z = z^{q-1} + f_{q-1} z^{q-2} + ... + f_1.
        let low0: Vec<Ok> = seed[1..q].to_vec();
        let k0 = Ext::new(r.clone(), low0.clone(), "K0")?;
        let tr0 = power_sums(&r, &low0, q - 1);
        let (k1, tr1) = if level >= 1 {
            // f(Y) - u_0.
            let mut low1: Vec<Vec<Ok>> = seed[..q].iter().map(|c| k0.lift(c)).collect();
            low1[0] = k0.sub(&low1[0], &k0.gen());
            let k1 = Ext::new(k0.clone(), low1.clone(), "K1")?;
            let tr1 = power_sums(&k0, &low1, q);
            (Some(k1), tr1)
        } else {
            (None, vec![])
        };
        Ok(Tower { group, k0, k1, tr0, tr1 })
    }

    pub fn level(&self) -> usize {
        if self.k1.is_some() {
            1
        } else {
            0
        }
    }
    pub fn group(&self) -> &Arc<FormalGroup> {
        &self.group
    }
    pub fn ring(&self) -> &OkRing {
        self.group.ring()
    }
    pub fn k0(&self) -> &K0 {
        &self.k0
    }
    pub fn k1(&self) -> Result<&K1> {
        self.k1.as_ref().ok_or(ForgeError::TowerDepth(1))
    }
    pub fn u0(&self) -> K0Elem {
        self.k0.exact(self.k0.gen())
    }
    pub fn u1(&self) -> Result<K1Elem> {
        let k1 = self.k1()?;
        Ok(k1.exact(k1.gen()))
    }
    pub fn from_ok0(&self, a: &OKElem) -> K0Elem {
        Elem::new(self.k0.lift(&a.raw), (a.prec * self.k0.e()).min(self.k0.cap()))
    }
    pub fn lift01(&self, a: &K0Elem) -> Result<K1Elem> {
        let k1 = self.k1()?;
        Ok(Elem::new(k1.lift(&a.raw), (a.prec as u64 * self.ring().q()).min(k1.cap() as u64) as u32))
    }
    /// The element of O_K represented by a K_0 element lying in O_K.
    pub fn descend0(&self, a: &K0Elem) -> Result<OKElem> {
        descend(&self.k0, a)
    }
    pub fn descend10(&self, a: &K1Elem) -> Result<K0Elem> {
        descend(self.k1()?, a)
    }

    /// `s(u_0)`.
    pub fn eval0(&self, s: &PSeries<Ok>) -> K0Elem {
        eval_at_gen(&self.k0, s)
    }
    /// `s(u_1)`.
    pub fn eval1(&self, s: &PSeries<Ok>) -> Result<K1Elem> {
        Ok(eval_at_gen(self.k1()?, s))
    }
    /// `s(x)` for a point of positive valuation in any ring over O_K.
    pub fn eval_at<S: Ring>(&self, ring: &S, s: &PSeries<Ok>, x: &Elem<S::E>) -> Elem<S::E> {
        ring.s_eval(&ring.s_embed(s), x)
    }

    /// The q points `0` and `[c](u_0)` for the nonzero digit representatives.
    pub fn torsion_points(&self) -> Result<Vec<K0Elem>> {
        let r = self.ring();
        let mut pts = vec![self.k0.exact(self.k0.zero())];
        for c in r.digit_reps().into_iter().skip(1) {
            let e = self.group.endo(&c)?;
            pts.push(self.refine_root(self.eval0(&e)));
        }
        for i in 0..pts.len() {
            for j in 0..i {
                let d = self.k0.el_sub(&pts[i], &pts[j]);
                if self.k0.vcap(&d) >= d.prec {
                    return Err(ForgeError::DistinctnessFailure);
                }
            }
        }
        Ok(pts)
    }

    /// Newton iteration on the seed from an approximate nonzero root in K_0.
    /// The returned precision is `v(f(z)) - v(f'(z))`, valid once
    /// `v(f(z)) > 2 v(f'(z))`; otherwise the input is returned unchanged.
    fn refine_root(&self, z: K0Elem) -> K0Elem {
        let k0 = &self.k0;
        let seed = self.group.seed();
        let cap = k0.cap();
        let f: Vec<Vec<Ok>> = seed.iter().map(|c| k0.lift(c)).collect();
        let df: Vec<Vec<Ok>> = seed
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| k0.lift(&self.ring().mul(c, &self.ring().int(i as i64))))
            .collect();
        let horner = |poly: &[Vec<Ok>], x: &Vec<Ok>| {
            poly.iter().rev().fold(k0.zero(), |acc, c| k0.add(&k0.mul(&acc, x), c))
        };
        let mut x = z.raw.clone();
        let mut best = z.clone();
        for _ in 0..64 {
            let fx = horner(&f, &x);
            let dfx = horner(&df, &x);
            let (vf, vd) = (k0.val(&fx), k0.val(&dfx));
            if vf <= 2 * vd {
                break;
            }
            let prec = (vf.min(cap) - vd).min(cap);
            if prec > best.prec {
                best = Elem::new(x.clone(), prec);
            }
            if vf >= cap {
                break;
            }
            let step = k0.div_unif(&fx, vd);
            let unit = k0.inv_unit(&k0.div_unif(&dfx, vd));
            let Some(unit) = unit else { break };
            x = k0.sub(&x, &k0.mul(&step, &unit));
        }
        best
    }

    /// Formal-group sum of two tower values, using the law to its stored degree.
    pub fn lt_add<S: Ring>(&self, s: &S, a: &Elem<S::E>, b: &Elem<S::E>) -> Elem<S::E> {
        let law = self.group.law();
        let nf = law.n();
        let mut apow = vec![s.el_int(1)];
        let mut bpow = vec![s.el_int(1)];
        for i in 1..nf {
            apow.push(s.el_mul(&apow[i - 1], a));
            bpow.push(s.el_mul(&bpow[i - 1], b));
        }
        let e = s.e();
        let mut acc = s.el_int(0);
        for d in 1..nf {
            for i in 0..=d {
                let c = law.get(i, d - i);
                if self.ring().is_zero(c) && law.get_prec(i, d - i) >= self.ring().cap() {
                    continue;
                }
                let coef = Elem::new(s.embed(c), (law.get_prec(i, d - i) * e).min(s.cap()));
                acc = s.el_add(&acc, &s.el_mul(&coef, &s.el_mul(&apow[i], &bpow[d - i])));
            }
        }
        let v = s.vcap(a).min(s.vcap(b)) as u64;
        acc.prec = acc.prec.min((nf as u64 * v).min(s.cap() as u64) as u32);
        acc
    }

    /// `Tr_{K_0/K}`.
    pub fn trace0(&self, x: &K0Elem) -> OKElem {
        let r = self.ring();
        let mut acc = r.zero();
        for (xi, ti) in x.raw.iter().zip(&self.tr0) {
            r.mul_add_assign(&mut acc, xi, ti);
        }
        Elem::new(acc, x.prec.div_ceil(self.k0.e()).min(r.cap()))
    }
    /// `Tr_{K_1/K_0}`.
    pub fn trace1(&self, x: &K1Elem) -> Result<K0Elem> {
        let k1 = self.k1()?;
        let mut acc = self.k0.zero();
        for (xi, ti) in x.raw.iter().zip(&self.tr1) {
            self.k0.mul_add_assign(&mut acc, xi, ti);
        }
        let q = self.ring().q() as u32;
        let _ = k1;
        Ok(Elem::new(acc, x.prec.div_ceil(q).min(self.k0.cap())))
    }
    /// `Tr_{K_1/K_0}(s(u_1))` for a series over O_K, computed from the power
    /// sums `Tr(u_1^k)` without forming `s(u_1)`.
    pub fn trace1_of_series(&self, s: &PSeries<Ok>) -> Result<K0Elem> {
        let k1 = self.k1()?;
        let k0 = &self.k0;
        let q = self.ring().q() as usize;
        let low1 = k1.modulus_low();
        // Extend Tr(u_1^k) by the recurrence of the minimal polynomial.
        let mut tr: Vec<Vec<Ok>> = self.tr1.clone();
        let mut prec = k0.cap() as u64;
        let e0 = k0.e() as u64;
        let mut acc = k0.zero();
        for k in 0..s.len() {
            if k >= tr.len() {
                let mut t = k0.zero();
                for (i, c) in low1.iter().enumerate() {
                    if !k0.is_zero(c) {
                        k0.mul_add_assign(&mut t, c, &tr[k - q + i]);
                    }
                }
                tr.push(k0.neg(&t));
            }
            if !self.ring().is_zero(&s.c[k]) || s.prec[k] < self.ring().cap() {
                let c = k0.scale(&tr[k], &s.c[k]);
                k0.add_assign(&mut acc, &c);
                // v_{K_0}(Tr(u_1^k)) >= floor(k / q)
                prec = prec.min(s.prec[k] as u64 * e0 + (k / q) as u64);
            }
        }
        prec = prec.min(s.tail as u64 * e0 + (s.len() / q) as u64);
        Ok(Elem::new(acc, prec.min(k0.cap() as u64) as u32))
    }

    /// `N_{K_0/K}` as a determinant.
    pub fn norm0(&self, x: &K0Elem) -> OKElem {
        berkowitz_det(self.ring(), &mult_matrix(&self.k0, x))
    }
    /// `N_{K_1/K_0}` as a determinant.
    pub fn norm1(&self, x: &K1Elem) -> Result<K0Elem> {
        Ok(berkowitz_det(&self.k0, &mult_matrix(self.k1()?, x)))
    }

    /// Image of `u_0` under the automorphism attached to the unit `c`.
    pub fn conj0_image(&self, c: &OKElem) -> Result<K0Elem> {
        Ok(self.eval0(&self.group.endo(c)?))
    }
    /// Apply the automorphism of K_0/K sending `u_0` to `img`.
    pub fn apply_conj0(&self, img: &K0Elem, x: &K0Elem) -> K0Elem {
        let k0 = &self.k0;
        let mut acc = k0.el_int(0);
        for c in x.raw.iter().rev() {
            acc = k0.el_add(&k0.el_mul(&acc, img), &Elem::new(k0.lift(c), x.prec));
        }
        acc
    }
    /// Images of `u_1` under the automorphisms of K_1/K_0: `u_1 + z` in the
    /// group law for each torsion point `z = [c](u_0)`, computed as
    /// `[1 + c pi](u_1)`.
    pub fn conj1_images(&self) -> Result<Vec<K1Elem>> {
        let r = self.ring();
        let mut out = vec![];
        for c in r.digit_reps() {
            let a = r.el_add(&r.el_int(1), &r.el_mul(&c, &r.el(r.pi())));
            out.push(self.eval1(&self.group.endo(&a)?)?);
        }
        Ok(out)
    }
    /// Apply the automorphism of K_1/K_0 sending `u_1` to `img`.
    pub fn apply_conj1(&self, img: &K1Elem, x: &K1Elem) -> Result<K1Elem> {
        let k1 = self.k1()?;
        let mut acc = k1.el_int(0);
        for c in x.raw.iter().rev() {
            let lifted = Elem::new(k1.lift(c), x.prec);
            acc = k1.el_add(&k1.el_mul(&acc, img), &lifted);
        }
        Ok(acc)
    }

    /// Formal-group sum of the conjugates of `x` over K_0.
    pub fn lt_trace1(&self, x: &K1Elem) -> Result<K0Elem> {
        let k1 = self.k1()?;
        if k1.vcap(x) == 0 {
            return Err(ForgeError::Precondition("lt_trace needs positive valuation".into()));
        }
        let imgs = self.conj1_images()?;
        let mut acc: Option<K1Elem> = None;
        for img in &imgs {
            let c = self.apply_conj1(img, x)?;
            acc = Some(match acc {
                None => c,
                Some(a) => self.lt_add(k1, &a, &c),
            });
        }
        self.descend10(&acc.unwrap())
    }

    /// Formal-group sum of the conjugates of `x` over K.
    pub fn lt_trace0(&self, x: &K0Elem) -> Result<OKElem> {
        if self.k0.vcap(x) == 0 {
            return Err(ForgeError::Precondition("lt_trace needs positive valuation".into()));
        }
        let r = self.ring();
        let mut acc: Option<K0Elem> = None;
        for c in r.digit_reps().into_iter().skip(1) {
            let img = self.conj0_image(&c)?;
            let y = self.apply_conj0(&img, x);
            acc = Some(match acc {
                None => y,
                Some(a) => self.lt_add(&self.k0, &a, &y),
            });
        }
        self.descend0(&acc.unwrap())
    }

    /// Some `z` in O_{K_0} with `Tr_{K_0/K}(z) = target`.
    pub fn find_trace_preimage0(&self, target: &OKElem) -> Result<K0Elem> {
        let r = self.ring();
        let (i, t) = self
            .tr0
            .iter()
            .enumerate()
            .min_by_key(|(_, t)| r.val(t))
            .ok_or(ForgeError::NoSolutionAtPrecision)?;
        let xi = r.el_div(target, &r.el(*t)).map_err(|_| ForgeError::NoSolutionAtPrecision)?;
        let mut v = self.k0.zero();
        v[i] = xi.raw;
        Ok(Elem::new(v, (xi.prec * self.k0.e()).min(self.k0.cap())))
    }

    /// Some `z` in O_{K_1} with `Tr_{K_1/K_0}(z) = target`.
    pub fn find_trace_preimage1(&self, target: &K0Elem) -> Result<K1Elem> {
        let k1 = self.k1()?;
        let k0 = &self.k0;
        let (i, t) = self
            .tr1
            .iter()
            .enumerate()
            .min_by_key(|(_, t)| k0.val(t))
            .ok_or(ForgeError::NoSolutionAtPrecision)?;
        let xi = k0.el_div(target, &k0.exact(t.clone())).map_err(|_| ForgeError::NoSolutionAtPrecision)?;
        let mut v = k1.zero();
        v[i] = xi.raw;
        let q = self.ring().q() as u32;
        Ok(Elem::new(v, (xi.prec * q).min(k1.cap())))
    }

    /// A series `g` over O_K with `g(0) = 0` and `g(u_i) = alpha_i` for the
    /// given values at levels `0..=n` (`n <= 1`), where `alpha_i` lies in
    /// `pi^{n-i} p_0 O_{K_i}`.
    pub fn finite_interpolate(&self, alpha0: &K0Elem, alpha1: Option<&K1Elem>, len: usize) -> Result<PSeries<Ok>> {
        let r = self.ring();
        let k0 = &self.k0;
        let f = self.group.f_series(len);
        let n = if alpha1.is_some() { 1 } else { 0 };
        let pi0 = k0.exact(k0.embed(&r.pi()));
        let u0 = self.u0();
        // f_0(u_0) = alpha_0 / (pi^n u_0).
        let mut d0 = k0.el_mul(&u0, &k0.el_pow(&pi0, n as u64));
        let beta0 = k0.el_div(alpha0, &d0).map_err(|e| match e {
            ForgeError::NotDivisible { .. } => ForgeError::DivisibilityViolation("alpha_0 is not in the required ideal".into()),
            other => other,
        })?;
        d0.prec = d0.prec.min(k0.cap());
        let x = r.s_x(len);
        let f0 = self.poly_in_u0(&beta0, &x, len);
        if n == 0 {
            return Ok(r.s_mul(&f0, &x));
        }
        let k1 = self.k1()?;
        let a1 = alpha1.unwrap();
        let u0in1 = self.lift01(&u0)?;
        let beta1 = k1.el_div(a1, &u0in1).map_err(|e| match e {
            ForgeError::NotDivisible { .. } => ForgeError::DivisibilityViolation("alpha_1 is not in the required ideal".into()),
            other => other,
        })?;
        // beta_1 = sum_j b_j(u_0) u_1^j with u_0 = f(u_1).
        let mut f1 = r.s_zero(len);
        let mut xj = r.s_one(len);
        for bj in &beta1.raw {
            let bj0 = Elem::new(bj.clone(), beta1.prec.div_ceil(r.q() as u32).min(k0.cap()));
            let term = self.poly_in_u0(&bj0, &f, len);
            f1 = r.s_add(&f1, &r.s_mul(&term, &xj));
            xj = r.s_mul(&xj, &x);
        }
        // g_{1,0} = (f(f(x)) / f(x)) x and g_{1,1} = f(x).
        let fof = r.s_compose(&f, &f)?;
        let q10 = r.s_shift_down(&fof, 0)?;
        let ratio = series_div_by(&r.clone(), &q10, &f)?;
        let g10 = r.s_mul(&ratio, &x);
        let g11 = f.clone();
        Ok(r.s_add(&r.s_mul(&f0, &g10), &r.s_mul(&f1, &g11)))
    }

    /// The series `sum c_i h(x)^i` for `b = sum c_i u_0^i`. With `h = x` it
    /// takes the value `b` at `u_0`, and with `h = f` it takes it at `u_1`.
    fn poly_in_u0(&self, b: &K0Elem, h: &PSeries<Ok>, len: usize) -> PSeries<Ok> {
        let r = self.ring();
        let cprec = b.prec.div_ceil(self.k0.e()).min(r.cap());
        let mut out = r.s_zero(len);
        let mut hp = r.s_one(len);
        for c in &b.raw {
            out = r.s_add(&out, &r.s_scale(&hp, &Elem::new(*c, cprec)));
            hp = r.s_mul(&hp, h);
        }
        out
    }
}

/// `a / b` for series where `b` has order `k` with a unit-times-pi^j leading
/// coefficient and `a` is divisible by `b`; the quotient is computed by long
/// division from the bottom.
pub fn series_div_by(r: &OkRing, a: &PSeries<Ok>, b: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    let k = r.s_order(b);
    let n = a.len();
    if k >= b.len() {
        return Err(ForgeError::DivisibilityViolation("division by zero series".into()));
    }
    let lead = b.coeff(k);
    let mut rem: Vec<OKElem> = (0..n).map(|i| a.coeff(i)).collect();
    let mut out = r.s_zero(n);
    for i in 0..n {
        if i + k >= n {
            out.prec[i] = 0;
            continue;
        }
        let qi = r.el_div(&rem[i + k], &lead).map_err(|_| ForgeError::DivisibilityViolation("series quotient is not integral".into()))?;
        for j in k..b.len() {
            if i + j >= n {
                break;
            }
            rem[i + j] = r.el_sub(&rem[i + j], &r.el_mul(&qi, &b.coeff(j)));
        }
        out.c[i] = qi.raw;
        out.prec[i] = qi.prec;
    }
    for (i, e) in rem.iter().enumerate().take(k.min(n)) {
        if r.vcap(e) < e.prec {
            return Err(ForgeError::DivisibilityViolation(format!("nonzero remainder at degree {i}")));
        }
    }
    out.tail = 0;
    Ok(out)
}

fn descend<R: Ring>(ext: &Ext<R>, a: &Elem<Vec<R::E>>) -> Result<Elem<R::E>> {
    let low = ext.lower();
    let d = ext.degree() as u64;
    let e = (ext.e() / low.e()) as u64;
    let _ = d;
    for (i, c) in a.raw.iter().enumerate().skip(1) {
        let v = e * low.val(c) as u64 + i as u64;
        if v < a.prec as u64 {
            return Err(ForgeError::DescentFailure(format!("coordinate {i} does not vanish")));
        }
    }
    Ok(Elem::new(a.raw[0].clone(), (a.prec as u64).div_ceil(e).min(low.cap() as u64) as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::okring::OKConfig;

    fn tower(level: usize) -> Tower {
        let r = OkRing::new(OKConfig::qp(3, -1, 30)).unwrap();
        let g = FormalGroup::from_str(r, "-3*x + x^3", 30, 30).unwrap();
        Tower::new(Arc::new(g), level).unwrap()
    }

    #[test]
    fn torsion_points_are_roots() {
        let t = tower(0);
        let pts = t.torsion_points().unwrap();
        assert_eq!(pts.len(), 3);
        let f = t.group().f_series(4);
        for pt in &pts {
            let v = t.eval_at(t.k0(), &f, pt);
            assert!(t.k0().el_is_zero(&v));
        }
        // [2](u_0) = F(u_0, u_0).
        let s = t.lt_add(t.k0(), &pts[1], &pts[1]);
        assert!(t.k0().el_eq(&s, &pts[2]).unwrap());
        // The torsion points sum to zero in the group law.
        let tot = t.lt_add(t.k0(), &t.lt_add(t.k0(), &pts[0], &pts[1]), &pts[2]);
        assert!(t.k0().el_is_zero(&tot));
    }

    #[test]
    fn traces_and_norms_at_level_zero() {
        let t = tower(0);
        let r = t.ring();
        let u0 = t.u0();
        assert_eq!(r.coords(&t.trace0(&u0).raw), vec![0]);
        assert_eq!(r.coords(&t.trace0(&t.k0().el_int(1)).raw), vec![2]);
        let n = t.norm0(&u0);
        assert!(r.el_eq(&n, &r.el(r.pi())).unwrap());
        let z = t.find_trace_preimage0(&r.el(r.pi())).unwrap();
        assert!(r.el_eq(&t.trace0(&z), &r.el(r.pi())).unwrap());
    }

    #[test]
    fn level_one_relations() {
        let t = tower(1);
        let k1 = t.k1().unwrap();
        let u1 = t.u1().unwrap();
        let f = t.group().f_series(4);
        let fu1 = t.eval_at(k1, &f, &u1);
        let u0 = t.lift01(&t.u0()).unwrap();
        assert!(k1.el_eq(&fu1, &u0).unwrap());
        // Conjugates of u_1 are roots of f(Y) = u_0.
        for img in t.conj1_images().unwrap() {
            let v = t.eval_at(k1, &f, &img);
            assert!(k1.el_eq(&v, &u0).unwrap(), "conjugate is not a root");
        }
        // Tr_{K1/K} = Tr_{K0/K} o Tr_{K1/K0} on a sample.
        let x = k1.el_add(&u1, &k1.el_mul(&u1, &u1));
        let t1 = t.trace1(&x).unwrap();
        let via_conj = t
            .conj1_images()
            .unwrap()
            .iter()
            .map(|img| t.apply_conj1(img, &x).unwrap())
            .fold(k1.el_int(0), |a, b| k1.el_add(&a, &b));
        assert!(k1.el_eq(&via_conj, &t.lift01(&t1).unwrap()).unwrap());
        // Norm of u_1 over K_0 is (-1)^q times the constant term -u_0.
        let n1 = t.norm1(&u1).unwrap();
        assert!(t.k0().el_eq(&n1, &t.u0()).unwrap());
    }

    #[test]
    fn berkowitz_matches_cofactor_expansion() {
        let r = OkRing::new(OKConfig::qp(7, 1, 10)).unwrap();
        let m: Vec<Vec<i64>> = vec![vec![2, -1, 3], vec![0, 4, 5], vec![1, 1, -2]];
        let a: Vec<Vec<OKElem>> = m.iter().map(|row| row.iter().map(|&v| r.el_int(v)).collect()).collect();
        // Cofactor expansion along the first row: 2(-13) + 1(-5) + 3(-4).
        let det = -43;
        assert_eq!(r.coords(&berkowitz_det(&r, &a).raw)[0], det);
    }

    #[test]
    fn interpolation_at_levels_zero_and_one() {
        let t = tower(1);
        let k0 = t.k0();
        let k1 = t.k1().unwrap();
        let r = t.ring();
        let u0 = t.u0();
        let pi0 = k0.exact(k0.embed(&r.pi()));
        let a0 = k0.el_mul(&pi0, &k0.el_add(&u0, &k0.el_mul(&u0, &u0)));
        let s = t.finite_interpolate(&a0, None, 20).unwrap();
        assert!(k0.el_eq(&t.eval0(&s), &a0).unwrap());
        let u1 = t.u1().unwrap();
        let a1 = k1.el_mul(&t.lift01(&u0).unwrap(), &k1.el_add(&k1.el_int(2), &u1));
        let s = t.finite_interpolate(&a0, Some(&a1), 30).unwrap();
        assert!(k0.el_eq(&t.eval0(&s), &a0).unwrap());
        assert!(k1.el_eq(&t.eval1(&s).unwrap(), &a1).unwrap());
    }
}
