//! Interpolating series: the map `phi`, its solver, the splitting by `lambda`,
//! and membership tests for the modules of interpolating, kernel and
//! trace-zero series.

use serde::{Deserialize, Serialize};

use crate::coleman::Coleman;
use crate::error::{ForgeError, Result};
use crate::lubin_tate::FormalGroup;
use crate::okring::{OKElem, Ok, OkRing};
use crate::pseries::{BiSeries, BiSeriesOps, PSeries, SeriesCheck, SeriesOps};
use crate::ring::{Elem, ElemOps, Ring};
use crate::tower::Tower;

/// The modules of series distinguished by their defining relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModuleTag {
    /// Series whose translates sum to `[q/pi] o f o [pi]` in the group law.
    A,
    /// pi-divisible series in the kernel of the trace operator.
    C,
    /// Members of `C` with zero linear term.
    CPrime,
    /// pi-divisible series whose translates sum to zero in the group law.
    D,
    /// Endomorphisms of the group.
    EndF,
}

/// Outcome of a membership test, with the residual of the defining relation.
#[derive(Clone, Debug)]
pub struct Membership {
    pub tag: ModuleTag,
    pub member: bool,
    pub residual: PSeries<Ok>,
    pub check: SeriesCheck,
    pub reason: Option<String>,
}

/// Embed a bivariate series over O_K into a ring over O_K.
pub fn embed_law<S: Ring>(s: &S, law: &BiSeries<Ok>) -> BiSeries<S::E> {
    BiSeries {
        layers: law.layers.iter().map(|l| l.iter().map(|c| s.embed(c)).collect()).collect(),
        prec: law.prec.iter().map(|l| l.iter().map(|&p| (p as u64 * s.e() as u64).min(s.cap() as u64) as u32).collect()).collect(),
    }
}

/// `[pi](f) - f([pi](x))` in the group law.
pub fn phi(g: &FormalGroup, f: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    let r = g.ring();
    if f.is_empty() || r.vcap(&f.coeff(0)) < 1 {
        return Err(ForgeError::Precondition("phi needs a constant term divisible by pi".into()));
    }
    let n = f.len();
    let fpi = g.f_series(n);
    let a = r.s_compose(&g.f_series(n.max(g.seed().len())), f)?;
    let b = r.s_compose(f, &fpi)?;
    let out = g.sub(&a, &b)?;
    if !r.s_divisible(&out, 1) {
        return Err(ForgeError::IntegralityViolation("phi(f) is not divisible by pi".into()));
    }
    Ok(out)
}

/// A series `f` with `phi(f) = g`, normalized by `f'(0) = 0`.
pub fn solve_phi(grp: &FormalGroup, g: &PSeries<Ok>) -> Result<PSeries<Ok>> {
    let r = grp.ring();
    let n = g.len();
    if !r.s_divisible(g, 1) {
        return Err(ForgeError::DivisibilityViolation("g is not divisible by pi".into()));
    }
    if n > 1 && !r.el_is_zero(&g.coeff(1)) {
        return Err(ForgeError::DivisibilityViolation("g has a nonzero linear term".into()));
    }
    let mut f = r.s_zero(n);
    // f(0) = [1/(pi - 1)](g(0)).
    let pim1 = r.el_sub(&r.el(r.pi()), &r.el_int(1));
    let c = r.el_inv(&pim1)?;
    let e = grp.endo(&c)?;
    let a0 = r.s_eval(&e, &g.coeff(0));
    f.c[0] = a0.raw;
    f.prec[0] = a0.prec;
    for m in 2..n {
        // Work modulo x^{m+1}: the degree-m coefficient of phi is affine in a_m.
        let fm = r.s_resize(&f, m + 1);
        let base = phi(grp, &fm)?;
        let mut bumped = fm.clone();
        bumped.c[m] = r.add(&bumped.c[m], &r.one());
        let lin = r.el_sub(&phi(grp, &bumped)?.coeff(m), &base.coeff(m));
        let resid = r.el_sub(&g.coeff(m), &base.coeff(m));
        let am = r.el_div(&resid, &lin).map_err(|err| match err {
            ForgeError::NotDivisible { .. } => {
                ForgeError::DivisibilityViolation(format!("residual at degree {m} is not divisible by pi"))
            }
            other => other,
        })?;
        f.c[m] = am.raw;
        f.prec[m] = am.prec;
    }
    f.tail = 0;
    Ok(f)
}

/// `lambda` with `(f - [lambda])'(0) = 0`.
pub fn lambda_of(grp: &FormalGroup, f: &PSeries<Ok>) -> Result<OKElem> {
    let lam = grp.lambda_of(f)?;
    let d = grp.sub(f, &grp.ring().s_resize(&grp.endo(&lam)?, f.len()))?;
    if d.len() > 1 && !grp.ring().el_is_zero(&d.coeff(1)) {
        return Err(ForgeError::exhausted("linear term of f - [lambda] does not vanish"));
    }
    Ok(lam)
}

/// Operations that need the trace operator.
pub struct Interp<'a> {
    pub ctx: &'a Coleman,
}

impl<'a> Interp<'a> {
    pub fn new(ctx: &'a Coleman) -> Self {
        Interp { ctx }
    }
    fn group(&self) -> &FormalGroup {
        self.ctx.group()
    }
    fn ring(&self) -> &OkRing {
        self.ctx.ring()
    }
    fn tower(&self) -> &Tower {
        self.ctx.tower()
    }

    /// The group-law sum of the translates `f(x + z)` over the torsion,
    /// descended to O_K.
    pub fn translate_sum(&self, f: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let t = self.tower();
        let k0 = t.k0();
        let r = self.ring();
        let n = f.len();
        let law = embed_law(k0, self.group().law());
        let fe = k0.s_embed(f);
        let x = k0.s_x(n);
        let mut terms = vec![];
        for z in t.torsion_points()? {
            let xz = k0.bi_substitute(&law, &x, &k0.s_const(&z, n))?;
            terms.push(k0.s_compose(&fe, &xz)?);
        }
        let s = k0.lt_sum(&law, &terms)?;
        let mut out = r.s_zero(n);
        for i in 0..n {
            let c = t.descend0(&s.coeff(i))?;
            out.c[i] = c.raw;
            out.prec[i] = c.prec;
        }
        out.tail = 0;
        Ok(out)
    }

    pub fn check_membership(&self, tag: ModuleTag, f: &PSeries<Ok>) -> Result<Membership> {
        let r = self.ring();
        let grp = self.group();
        let n = f.len();
        let zero = r.s_zero(n);
        let fail = |reason: &str, residual: PSeries<Ok>| {
            let check = r.s_check_eq(&residual, &r.s_zero(residual.len()));
            Membership { tag, member: false, residual, check, reason: Some(reason.into()) }
        };
        let done = |residual: PSeries<Ok>| {
            let check = r.s_check_eq(&residual, &r.s_zero(residual.len()));
            let member = check.ok();
            Membership { tag, member, residual, check, reason: None }
        };
        match tag {
            ModuleTag::A => {
                if r.vcap(&f.coeff(0)) < 1 {
                    return Ok(fail("constant term is a unit", zero));
                }
                let lhs = self.translate_sum(f)?;
                let qpi = r.el(r.exact_div_pi(&r.q_elem(), 1)?);
                let rhs = r.s_compose(&r.s_resize(&grp.endo(&qpi)?, n), &r.s_compose(f, &grp.f_series(n))?)?;
                Ok(done(r.s_sub(&lhs, &rhs)))
            }
            ModuleTag::D => {
                if !r.s_divisible(f, 1) {
                    return Ok(fail("not divisible by pi", zero));
                }
                Ok(done(self.translate_sum(f)?))
            }
            ModuleTag::C | ModuleTag::CPrime => {
                if !r.s_divisible(f, 1) {
                    return Ok(fail("not divisible by pi", zero));
                }
                let l = self.ctx.trace_op(f)?;
                let mut m = done(l);
                if m.member && tag == ModuleTag::CPrime && n > 1 && !r.el_is_zero(&f.coeff(1)) {
                    m.member = false;
                    m.reason = Some("nonzero linear term".into());
                }
                Ok(m)
            }
            ModuleTag::EndF => {
                let lam = grp.lambda_of(f)?;
                let e = r.s_resize(&grp.endo(&lam)?, n);
                Ok(done(r.s_sub(f, &e)))
            }
        }
    }

    /// `log_F(phi(f))` for `f` interpolating, which lies in `C'`.
    pub fn a_to_cprime(&self, f: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let grp = self.group();
        let c = grp.log_of(&phi(grp, f)?)?;
        let m = self.check_membership(ModuleTag::CPrime, &c)?;
        if !m.member {
            return Err(ForgeError::MembershipFailure(format!("log(phi(f)) is not in C': {:?}", m.reason)));
        }
        Ok(c)
    }

    /// An interpolating series `f` with `log_F(phi(f)) = c` and `f'(0) = 0`.
    pub fn cprime_to_a(&self, c: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let m = self.check_membership(ModuleTag::CPrime, c)?;
        if !m.member {
            return Err(ForgeError::MembershipFailure(format!("input is not in C': {:?}", m.reason)));
        }
        let grp = self.group();
        solve_phi(grp, &grp.exp_of(c)?)
    }

    /// `log_F o h` for `h` in `D`; the result lies in `C`.
    pub fn log_d_to_c(&self, h: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let grp = self.group();
        let c = grp.log_of(h)?;
        let m = self.check_membership(ModuleTag::C, &c)?;
        if !m.member {
            return Err(ForgeError::MembershipFailure(format!("log(h) is not in C: {:?}", m.reason)));
        }
        Ok(c)
    }

    /// Split `f` into `lambda_f` and `log_F(phi(f))`.
    pub fn split(&self, f: &PSeries<Ok>) -> Result<(OKElem, PSeries<Ok>)> {
        Ok((lambda_of(self.group(), f)?, self.a_to_cprime(f)?))
    }

    /// `[lambda] + cprime_to_a(c)` in the group law.
    pub fn rebuild(&self, lam: &OKElem, c: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let grp = self.group();
        let r = self.ring();
        let a = self.cprime_to_a(c)?;
        grp.add(&r.s_resize(&grp.endo(lam)?, a.len()), &a)
    }
}

/// Value of a series at a point, as a helper for tower checks.
pub fn eval_ok<S: Ring>(s: &S, f: &PSeries<Ok>, x: &Elem<S::E>) -> Elem<S::E> {
    s.s_eval(&s.s_embed(f), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::okring::OKConfig;
    use std::sync::Arc;

    fn ctx(n: usize) -> Coleman {
        let r = OkRing::new(OKConfig::qp(3, -1, 40)).unwrap();
        let g = FormalGroup::from_str(r, "-3*x + x^3", n, n + 40).unwrap();
        Coleman::new(Arc::new(g)).unwrap()
    }

    #[test]
    fn phi_kills_endomorphisms() {
        let c = ctx(16);
        let g = c.group();
        let r = c.ring();
        for a in [2i64, 5, -7] {
            let e = g.endo(&r.el_int(a)).unwrap();
            let p = phi(g, &e).unwrap();
            assert!(r.s_is_zero(&p), "phi([{a}]) nonzero");
        }
    }

    #[test]
    fn solve_phi_round_trip() {
        let c = ctx(14);
        let g = c.group();
        let r = c.ring();
        let target = r.s_poly(&[r.int(3), r.int(0), r.int(-6), r.int(9), r.int(3)], 14);
        let f = solve_phi(g, &target).unwrap();
        let back = phi(g, &f).unwrap();
        let chk = r.s_check_eq(&back, &target);
        assert!(chk.ok(), "{chk:?}");
        assert!(chk.eff_len >= 10);
    }

    #[test]
    fn membership_of_endomorphisms_and_kernel() {
        let c = ctx(16);
        let it = Interp::new(&c);
        let r = c.ring();
        let e = c.group().endo(&r.el_int(4)).unwrap();
        assert!(it.check_membership(ModuleTag::A, &e).unwrap().member);
        assert!(it.check_membership(ModuleTag::EndF, &e).unwrap().member);
        assert!(it.check_membership(ModuleTag::D, &r.s_zero(16)).unwrap().member);
        let ph1 = r.s_scale(&c.h_n(1).unwrap(), &r.el(r.pi()));
        assert!(it.check_membership(ModuleTag::C, &ph1).unwrap().member);
        assert!(!it.check_membership(ModuleTag::CPrime, &ph1).unwrap().member);
    }

    #[test]
    fn cprime_round_trip() {
        let c = ctx(24);
        let it = Interp::new(&c);
        let r = c.ring();
        let fpi = c.pi_series();
        let h = r.s_add(&c.h_n(1).unwrap(), &r.s_scale(&c.h_n(2).unwrap(), &r.el_int(2)));
        let cp = r.s_scale(&r.s_mul(&r.s_mul(fpi, fpi), &h), &r.el(r.pi()));
        let f = it.cprime_to_a(&cp).unwrap();
        let m = it.check_membership(ModuleTag::A, &f).unwrap();
        assert!(m.member, "{:?}", m.check);
        let back = it.a_to_cprime(&f).unwrap();
        assert!(r.s_check_eq(&back, &cp).ok());
    }
}
