//! The multiplicative group with p-adic exponents, the map `phi_{G_m}`, and
//! the injection of norm-compatible unit series into the kernel of the
//! trace operator.

use serde::Serialize;

use crate::coleman::Coleman;
use crate::error::{ForgeError, Result};
use crate::lubin_tate::FormalGroup;
use crate::okring::{OKElem, Ok, OkRing};
use crate::pseries::{PSeries, SeriesCheck, SeriesOps};
use crate::ring::{ElemOps, Ring};

fn check_const(r: &OkRing, g: &PSeries<Ok>) -> Result<()> {
    if !g.is_empty() && r.vcap(&g.coeff(0)) < 1 {
        return Err(ForgeError::Precondition("constant term is not divisible by pi".into()));
    }
    Ok(())
}

fn pow_u128(r: &OkRing, a: &PSeries<Ok>, mut e: u128) -> PSeries<Ok> {
    let mut base = a.clone();
    let mut acc = r.s_one(a.len());
    while e > 0 {
        if e & 1 == 1 {
            acc = r.s_mul(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = r.s_mul(&base, &base);
        }
    }
    acc
}

/// `(1 + g)^a - 1` for an integer `a`.
pub fn gm_endo_int(r: &OkRing, a: i128, g: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    check_const(r, g)?;
    let n = g.len();
    let one_g = r.s_add(&r.s_one(n), g);
    let pw = pow_u128(r, &one_g, a.unsigned_abs());
    let pw = if a < 0 { r.s_inv(&pw)? } else { pw };
    Ok(r.s_sub(&pw, &r.s_one(n)))
}

/// `(1 + g)^alpha - 1` for `alpha` in Z_p. The representative of `alpha`
/// modulo `p^prec` is used, and the coefficient precision is lowered by the
/// size of `(1 + g)^{p^prec} - 1`.
pub fn gm_endo(r: &OkRing, alpha: &OKElem, g: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    check_const(r, g)?;
    let c = r.coords(&alpha.raw);
    if c.iter().skip(1).any(|&x| x != 0) {
        return Err(ForgeError::Precondition("exponent must lie in Z_p".into()));
    }
    let p = r.p() as u128;
    let prec = alpha.prec.min(r.cap());
    let modulus = p.checked_pow(prec).ok_or_else(|| ForgeError::Precondition("exponent precision too large".into()))?;
    let rep = (c[0] as i128).rem_euclid(modulus as i128);
    let mut out = gm_endo_int(r, rep, g)?;
    let err = gm_endo_int(r, modulus as i128, g)?;
    let mut run = r.cap();
    for (i, v) in r.vcaps(&err).into_iter().enumerate() {
        run = run.min(v);
        out.prec[i] = out.prec[i].min(run);
    }
    out.tail = out.tail.min(run);
    Ok(out)
}

/// `a + b` in the multiplicative group: `a + b + ab`.
pub fn gm_add(r: &OkRing, a: &PSeries<Ok>, b: &PSeries<Ok>) -> PSeries<Ok> {
    r.s_add(&r.s_add(a, b), &r.s_mul(a, b))
}

/// `a - b` in the multiplicative group: `(1 + a) / (1 + b) - 1`.
pub fn gm_sub(r: &OkRing, a: &PSeries<Ok>, b: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    let n = a.len().min(b.len());
    let inv = r.s_inv(&r.s_add(&r.s_one(n), &r.s_resize(b, n)))?;
    let q = r.s_mul(&r.s_add(&r.s_one(n), &r.s_resize(a, n)), &inv);
    Ok(r.s_sub(&q, &r.s_one(n)))
}

/// `phi(f) = [q](f) - f([pi](x))` in the multiplicative group.
pub fn phi_gm(grp: &FormalGroup, f: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    let r = grp.ring();
    check_const(r, f)?;
    let n = f.len();
    let qf = gm_endo_int(r, r.q() as i128, f)?;
    let fpi = r.s_compose(f, &grp.f_series(n.max(grp.seed().len())))?;
    let fpi = r.s_resize(&fpi, n);
    gm_sub(r, &qf, &fpi)
}

/// `log(1 + h)` of the multiplicative group for `h` divisible by p.
pub fn log_gm(r: &OkRing, h: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    if !r.s_divisible(h, 1) {
        return Err(ForgeError::DivisibilityViolation("log of the multiplicative group needs p | h".into()));
    }
    let n = h.len();
    let u = r.int(r.config().pi_unit);
    // h = p h1 with h1 = u (h / pi).
    let h1 = r.s_scale(&r.s_div_unif(h, 1)?, &r.el(u));
    let p = r.p();
    let cap = r.cap() as u64;
    let mut out = r.s_zero(n);
    let mut hk = r.s_one(n);
    let mut k = 1u64;
    loop {
        let (mut v, mut kk) = (0u32, k);
        while kk % p == 0 {
            kk /= p;
            v += 1;
        }
        if k - v as u64 >= cap {
            // Every later term has valuation at least k - v_p(k) >= cap.
            break;
        }
        hk = r.s_mul(&hk, &h1);
        // p^k h1^k / k = p^{k - v} h1^k / k'.
        let coef = r.mul(&r.pow(&r.int(p as i64), k - v as u64), &r.inv_unit(&r.int(kk as i64)).unwrap());
        let coef = if k.is_multiple_of(2) { r.neg(&coef) } else { coef };
        out = r.s_add(&out, &r.s_scale(&hk, &r.el(coef)));
        k += 1;
    }
    Ok(out)
}

/// `pi^D log(1 + g)` with `D = floor(log_p K)` for the number `K` of terms
/// kept, for `g` with `g(0)` divisible by pi; returns the series and `D`.
/// With `K = n + M + 1`, the degree-m coefficient of every dropped term has
/// valuation at least `K + 1 - m - log_p(K + 1) + D >= M`.
pub fn log_gm_scaled(r: &OkRing, g: &PSeries<Ok>) -> Result<(PSeries<Ok>, u32)> {
    check_const(r, g)?;
    let n = g.len();
    let p = r.p();
    let terms = (n as u64 + r.cap() as u64 + 1).max(2);
    let mut d = 0u32;
    let mut t = terms;
    while t >= p {
        t /= p;
        d += 1;
    }
    let u = r.int(r.config().pi_unit);
    let mut out = r.s_zero(n);
    let mut gk = r.s_one(n);
    for k in 1..=terms {
        gk = r.s_mul(&gk, g);
        let (mut v, mut kk) = (0u32, k);
        while kk % p == 0 {
            kk /= p;
            v += 1;
        }
        // pi^D / k = u^v pi^{D - v} / k'.
        let mut coef = r.mul(&r.pow(&u, v as u64), &r.pow(&r.pi(), (d - v) as u64));
        coef = r.mul(&coef, &r.inv_unit(&r.int(kk as i64)).unwrap());
        if k % 2 == 0 {
            coef = r.neg(&coef);
        }
        out = r.s_add(&out, &r.s_scale(&gk, &r.el(coef)));
    }
    Ok((out, d))
}

/// The exponent `r` with `[p^r](pi x)` divisible by p, found directly, the
/// sufficient bound `min { r >= 1 : p | pi^r }`, and whether `[p]` adds a
/// factor of pi on `pi^k x` for `k = 1, 2, 3`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinR {
    pub r_min: u32,
    pub sufficient: u32,
    pub extra_factor: bool,
}

pub fn min_r(r: &OkRing, n: usize) -> Result<MinR> {
    let pi_x = r.s_monomial(1, &r.pi(), n);
    let e = r.e();
    let mut r_min = None;
    for k in 0..=r.cap() {
        let s = gm_endo_int(r, (r.p() as i128).pow(k), &pi_x)?;
        if r.s_divisible(&s, e) {
            r_min = Some(k);
            break;
        }
    }
    let r_min = r_min.ok_or(ForgeError::NoSolutionAtPrecision)?;
    let mut sufficient = 1;
    while r.val(&r.pow(&r.pi(), sufficient as u64)) < e {
        sufficient += 1;
    }
    let mut extra_factor = true;
    for k in 1..=3u32 {
        let f = r.s_monomial(1, &r.pow(&r.pi(), k as u64), n);
        let s = gm_endo_int(r, r.p() as i128, &f)?;
        extra_factor &= r.s_divisible(&s, k + 1);
    }
    Ok(MinR { r_min, sufficient, extra_factor })
}

/// `N(1 + g)` against `1 + g`.
pub fn norm_fixed_point(ctx: &Coleman, g: &PSeries<Ok>) -> Result<SeriesCheck> {
    let r = ctx.ring();
    let one_g = r.s_add(&r.s_one(g.len()), g);
    let nn = ctx.norm_op(&one_g)?;
    Ok(r.s_check_eq(&nn, &one_g))
}

/// Result of [`inject_to_kernel`] with the checks performed on it.
#[derive(Clone, Debug)]
pub struct Injection {
    pub s: PSeries<Ok>,
    pub phi: PSeries<Ok>,
    pub r: u32,
    /// `L(s) = 0`.
    pub kernel: SeriesCheck,
    pub p_divisible: bool,
    /// `N(1 + phi(g)) = 1`.
    pub phi_norm: SeriesCheck,
    /// `pi^D s = pi^D p^r (q log(1 + g) - log(1 + g([pi])))`.
    pub log_identity: SeriesCheck,
}

impl Injection {
    pub fn ok(&self) -> bool {
        self.kernel.ok() && self.p_divisible && self.phi_norm.ok() && self.log_identity.ok()
    }
}

/// `log(1 + [p^r](phi(g)))` for `1 + g` fixed by the norm operator.
pub fn inject_to_kernel(ctx: &Coleman, g: &PSeries<Ok>, r_override: Option<u32>) -> Result<Injection> {
    let r = ctx.ring();
    let grp = ctx.group();
    check_const(r, g)?;
    let fixed = norm_fixed_point(ctx, g)?;
    if !fixed.ok() {
        return Err(ForgeError::NotNormCompatible(format!("{fixed:?}")));
    }
    let n = g.len();
    let rr = match r_override {
        Some(v) => v,
        None => min_r(r, n)?.r_min,
    };
    let phi = phi_gm(grp, g)?;
    if !r.s_divisible(&phi, 1) {
        return Err(ForgeError::IntegralityViolation("phi(g) is not divisible by pi".into()));
    }
    let pr = (r.p() as i128).pow(rr);
    let twisted = gm_endo_int(r, pr, &phi)?;
    let s = log_gm(r, &twisted)?;
    let kernel = r.s_check_eq(&ctx.trace_op(&s)?, &r.s_zero(n));
    let p_divisible = r.s_divisible(&s, r.e());
    let phi_norm = ctx.norm_op(&r.s_add(&r.s_one(n), &phi)).map(|nn| r.s_check_eq(&nn, &r.s_one(n)))?;
    // Both sides of the log identity, scaled to be integral.
    let (l1, d) = log_gm_scaled(r, g)?;
    let gpi = r.s_resize(&r.s_compose(g, &grp.f_series(n.max(grp.seed().len())))?, n);
    let (l2, d2) = log_gm_scaled(r, &gpi)?;
    debug_assert_eq!(d, d2);
    let rhs = r.s_scale(&r.s_sub(&r.s_scale(&l1, &r.el(r.q_elem())), &l2), &r.el_int(pr as i64));
    let lhs = r.s_scale(&s, &r.el(r.pow(&r.pi(), d as u64)));
    let log_identity = r.s_check_eq(&lhs, &rhs);
    Ok(Injection { s, phi, r: rr, kernel, p_divisible, phi_norm, log_identity })
}

/// `[pi]^k s`: with `k >= 2` an element of the kernel lands in the part
/// with vanishing linear term.
pub fn to_cprime(ctx: &Coleman, s: &PSeries<Ok>, k: usize) -> Result<PSeries<Ok>> {
    if k < 2 {
        return Err(ForgeError::Precondition("need k >= 2".into()));
    }
    let r = ctx.ring();
    Ok(r.s_mul(&r.s_pow(ctx.pi_series(), k as u64), s))
}

/// One step of the leading-term argument: for `f = a x^d`, the series
/// `phi(f)` is `a (q - pi^d) x^d` modulo degree `d + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeadingTerm {
    pub degree: usize,
    /// Valuation of `q - pi^d`, or `None` if it vanishes at precision.
    pub factor_val: Option<u32>,
    pub ok: bool,
}

/// The leading-term recursion for degrees `1..n`, using the sample
/// coefficient `a`; degree 0 checks `phi(a) = (1 + a)^{q-1} - 1` with `a`
/// replaced by `pi a`.
pub fn leading_term_recursion(grp: &FormalGroup, a: &OKElem, n: usize) -> Result<Vec<LeadingTerm>> {
    let r = grp.ring();
    let len = n + 1;
    let mut out = vec![];
    let c0 = r.el_mul(a, &r.el(r.pi()));
    let f0 = r.s_const(&c0, len);
    let phi0 = phi_gm(grp, &f0)?;
    let want0 = gm_endo_int(r, r.q() as i128 - 1, &f0)?;
    let v0 = r.el_val(&c0);
    out.push(LeadingTerm { degree: 0, factor_val: v0, ok: r.s_check_eq(&phi0, &want0).ok() && v0.is_some() });
    for d in 1..n {
        let f = r.s_monomial(d, &a.raw, len);
        let phi = phi_gm(grp, &f)?;
        let factor = r.el_sub(&r.el(r.q_elem()), &r.el(r.pow(&r.pi(), d as u64)));
        let want = r.el_mul(a, &factor);
        let mut ok = (0..d).all(|i| r.el_is_zero(&phi.coeff(i)));
        ok &= r.el_eq(&phi.coeff(d), &want).unwrap_or(false);
        out.push(LeadingTerm { degree: d, factor_val: r.el_val(&factor), ok });
    }
    Ok(out)
}
