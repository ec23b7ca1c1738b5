//! The operator `T = L - (q/pi)`, its eigenvectors, the map `rho_lambda`
//! and its inverse, and the constructions that need `pi^3 | q`.

use serde::Serialize;

use crate::coleman::Coleman;
use crate::error::{ForgeError, Result};
use crate::okring::{OKElem, Ok, OkRing};
use crate::pseries::{Gain, PSeries, SeriesCheck, SeriesOps};
use crate::ring::{Elem, ElemOps, Ring};
use crate::tower::{K0Elem, K1Elem, Tower};

/// Series with eigenvalue `lambda` for the trace operator.
pub struct Eigen<'a> {
    ctx: &'a Coleman,
    lambda: OKElem,
    pi3: bool,
}

/// An eigenvector together with the check `L(f) = (q/pi) f`.
#[derive(Clone, Debug)]
pub struct EigenVector {
    pub f: PSeries<Ok>,
    pub steps: usize,
    pub residual: SeriesCheck,
    /// Number of leading coefficients of the residual known to at least
    /// the requested precision.
    pub prefix_at: Vec<(u32, usize)>,
}

/// Output of [`Eigen::rho_inverse`].
#[derive(Clone, Debug)]
pub struct RhoInverse {
    pub g: PSeries<Ok>,
    pub partial_sums: Vec<PSeries<Ok>>,
    /// 1-based index of the first partial sum equal to all later ones.
    pub steps: usize,
}

/// Output of [`Eigen::solve_eigen_divisible`].
#[derive(Clone, Debug)]
pub struct DivisibleSolution {
    pub h: PSeries<Ok>,
    /// `h / [pi^{n+1}](x)`.
    pub quotient: PSeries<Ok>,
    pub steps: usize,
}

/// Output of the finite-level interpolation pipeline.
#[derive(Clone, Debug, Serialize)]
pub struct FinitePipeline {
    /// Minimal `l` with `pi^l log_F(z)` divisible by pi.
    pub l: u32,
    /// `l + 1`: the returned series takes the value `[pi^{l+1}](z)` at `u_0`.
    pub exponent: u32,
    #[serde(skip)]
    pub f1: PSeries<Ok>,
    #[serde(skip)]
    pub fstar: PSeries<Ok>,
    /// `T(f_1) = 0` on the meaningful prefix.
    pub eigen_residual: CheckSummary,
    /// `f*(u_0) = [pi^{l+1}](z)`.
    pub value: CheckSummary,
    /// `Tr_{K_1/K_0}(f_1(u_1)) = (q/pi) f_1(u_0)`.
    pub trace_level1: CheckSummary,
    /// The group-law trace of `f*(u_1)` against `[q/pi](f*(u_0))`, via
    /// `exp_F` applied to the additive relation.
    pub lt_level1: CheckSummary,
}

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckSummary {
    pub ok: bool,
    /// Precision of the comparison: in units of the ring involved, or the
    /// number of coefficients compared for series.
    pub prec: u32,
}

impl CheckSummary {
    pub fn from_series(c: &SeriesCheck) -> Self {
        CheckSummary { ok: c.ok(), prec: c.eff_len as u32 }
    }
    pub fn from_elems<R: Ring>(r: &R, a: &Elem<R::E>, b: &Elem<R::E>) -> Self {
        let prec = a.prec.min(b.prec);
        CheckSummary { ok: r.el_eq(a, b).unwrap_or(false), prec }
    }
}

/// The two-term sequence of a trace-compatible family decaying in valuation.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub a0: K0Elem,
    pub a1: K1Elem,
    pub z: K1Elem,
    pub trace: CheckSummary,
    /// Valuations as fractions of the valuation of p: `(numerator, denominator)`.
    pub val_a0: (u32, u32),
    pub val_a1: (u32, u32),
    pub decay_ok: bool,
}

impl<'a> Eigen<'a> {
    /// The context with eigenvalue `q/pi`.
    pub fn new(ctx: &'a Coleman) -> Result<Self> {
        let r = ctx.ring();
        let lambda = r.el_div_unif(&r.el(r.q_elem()), 1)?;
        Ok(Self::with_lambda(ctx, lambda))
    }

    pub fn with_lambda(ctx: &'a Coleman, lambda: OKElem) -> Self {
        let r = ctx.ring();
        let pi3 = r.val(&r.q_elem()) >= 3;
        Eigen { ctx, lambda, pi3 }
    }

    pub fn ctx(&self) -> &Coleman {
        self.ctx
    }
    pub fn lambda(&self) -> &OKElem {
        &self.lambda
    }
    pub fn pi3_divides_q(&self) -> bool {
        self.pi3
    }
    fn ring(&self) -> &OkRing {
        self.ctx.ring()
    }
    fn need_pi3(&self) -> Result<()> {
        if self.pi3 {
            Ok(())
        } else {
            Err(ForgeError::Pi3NotDividingQ)
        }
    }
    /// `q / pi^k`.
    fn q_over(&self, k: u32) -> Result<OKElem> {
        let r = self.ring();
        r.el_div_unif(&r.el(r.q_elem()), k)
    }

    /// `T(f) = L(f) - (q/pi) f`.
    pub fn t_op(&self, f: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let r = self.ring();
        let l = self.ctx.trace_op(f)?;
        Ok(r.s_sub(&l, &r.s_scale(&r.s_resize(f, l.len()), &self.q_over(1)?)))
    }

    /// `f = sum pi^i f_i` with `L(f_{i+1}) = (q/pi^2) f_i`, so that
    /// `L(f) = (q/pi) f` and `f = f_0 mod pi`.
    pub fn build_eigenvector(&self, f0: &PSeries<Ok>, max_steps: usize) -> Result<EigenVector> {
        self.need_pi3()?;
        let r = self.ring();
        if !r.s_is_zero(&self.ctx.trace_op(f0)?) {
            return Err(ForgeError::NotInKernel);
        }
        if r.s_divisible(f0, 1) {
            return Err(ForgeError::Precondition("seed is divisible by pi".into()));
        }
        let c = self.q_over(3)?;
        let pi = r.el(r.pi());
        let n = f0.len().min(self.ctx.n());
        let mut fi = r.s_resize(f0, n);
        let mut pik = r.el_int(1);
        let mut sum = fi.clone();
        let mut partial = vec![sum.clone()];
        for _ in 0..max_steps {
            fi = self.ctx.preimage(&r.s_scale(&fi, &c))?;
            pik = r.el_mul(&pik, &pi);
            let term = r.s_scale(&fi, &pik);
            sum = r.s_add(&r.s_resize(&sum, term.len()), &term);
            partial.push(sum.clone());
            if r.s_is_zero(&term) {
                break;
            }
        }
        let (f, steps) = r.converge_detect(&partial, Gain::Adic(1))?;
        let residual = self.eigen_check(&f)?;
        Ok(EigenVector { f, steps, prefix_at: residual.1, residual: residual.0 })
    }

    /// Compare `L(f)` with `(q/pi) f`; also report how many leading
    /// coefficients are compared at precision at least 10, 20 and 30.
    pub fn eigen_check(&self, f: &PSeries<Ok>) -> Result<(SeriesCheck, Vec<(u32, usize)>)> {
        let r = self.ring();
        let l = self.ctx.trace_op(f)?;
        let rhs = r.s_scale(&r.s_resize(f, l.len()), &self.q_over(1)?);
        let chk = r.s_check_eq(&l, &rhs);
        let mut prefix = vec![];
        for t in [10u32, 20, 30] {
            let k = (0..l.len()).take_while(|&i| l.prec[i].min(rhs.prec[i]) >= t).count();
            prefix.push((t, k));
        }
        Ok((chk, prefix))
    }

    /// The eigenvector attached to `g_{n,m} = [pi]^m h_n`.
    pub fn g_nm(&self, n: usize, m: usize, max_steps: usize) -> Result<EigenVector> {
        let r = self.ring();
        let seed = r.s_mul(&r.s_pow(self.ctx.pi_series(), m as u64), &self.ctx.h_n(n)?);
        self.build_eigenvector(&seed, max_steps)
    }

    /// `rho_lambda(f) = f - (lambda/pi) k f([pi]) / w([pi])`.
    pub fn rho(&self, f: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let r = self.ring();
        let lp = r.el_div_unif(&self.lambda, 1).map_err(|_| ForgeError::LambdaNotDivisible)?;
        let pre = self.ctx.preimage(f)?;
        Ok(r.s_sub(&r.s_resize(f, pre.len()), &r.s_scale(&pre, &lp)))
    }

    /// The series `g` with `rho_lambda(g) = h` and `L(g) = lambda g`, for `h`
    /// in the kernel of the trace operator.
    pub fn rho_inverse(&self, h: &PSeries<Ok>) -> Result<RhoInverse> {
        let r = self.ring();
        let lp = r.el_div_unif(&self.lambda, 1).map_err(|_| ForgeError::LambdaNotDivisible)?;
        if !r.s_is_zero(&self.ctx.trace_op(h)?) {
            return Err(ForgeError::NotInKernel);
        }
        let q = self.ctx.q() as usize;
        let n = h.len().min(self.ctx.n());
        let bound = n.div_ceil(q - 1) + 2;
        let mut gi = r.s_resize(h, n);
        let mut sum = gi.clone();
        let mut partial = vec![sum.clone()];
        for _ in 0..bound {
            gi = r.s_scale(&self.ctx.preimage(&gi)?, &lp);
            sum = r.s_add(&sum, &gi);
            partial.push(sum.clone());
        }
        let (g, steps) = r.converge_detect(&partial, Gain::XAdic(q - 1))?;
        Ok(RhoInverse { g, partial_sums: partial, steps })
    }

    /// `[pi^m](x)` as the m-fold composite of the seed.
    pub fn pi_power_endo(&self, m: usize, n: usize) -> Result<PSeries<Ok>> {
        let r = self.ring();
        let f = r.s_resize(self.ctx.pi_series(), n);
        let mut acc = r.s_x(n);
        for _ in 0..m {
            acc = r.s_compose(&f, &acc)?;
        }
        Ok(acc)
    }

    /// A series `h` divisible by `[pi^{n+1}](x)` with `T(h) = [pi^n](x) j`,
    /// for `j` divisible by pi.
    pub fn solve_eigen_divisible(&self, j: &PSeries<Ok>, n: usize) -> Result<DivisibleSolution> {
        self.need_pi3()?;
        let r = self.ring();
        let len = j.len().min(self.ctx.n());
        let j = r.s_resize(j, len);
        if !r.s_divisible(&j, 1) {
            return Err(ForgeError::DivisibilityViolation("j is not divisible by pi".into()));
        }
        if r.s_is_zero(&j) {
            return Ok(DivisibleSolution { h: r.s_zero(len), quotient: r.s_zero(len), steps: 0 });
        }
        let c = self.q_over(2)?;
        let f = r.s_resize(self.ctx.pi_series(), len);
        let base = self.pi_power_endo(n + 1, len)?;
        // [pi^{n+i}] = [pi^{i-1}] o [pi^{n+1}]; the quotient by [pi^{n+1}]
        // is ([pi^{i-1}](y) / y) at y = [pi^{n+1}](x).
        let mut hi = self.ctx.preimage(&r.s_div_unif(&j, 1)?)?;
        let mut endo_y = r.s_x(len);
        let mut h = r.s_zero(len);
        let mut quot = r.s_zero(len);
        let mut steps = 0;
        for i in 1..=(r.cap() as usize + 1) {
            if i > 1 {
                hi = self.ctx.preimage(&r.s_scale(&hi, &c))?;
                endo_y = r.s_compose(&f, &endo_y)?;
            }
            if r.s_is_zero(&hi) {
                break;
            }
            let ratio = r.s_compose(&r.s_shift_down(&endo_y, 1)?, &base)?;
            let qi = r.s_mul(&ratio, &hi);
            quot = r.s_add(&quot, &qi);
            h = r.s_add(&h, &r.s_mul(&qi, &base));
            steps = i;
        }
        Ok(DivisibleSolution { h, quotient: quot, steps })
    }

    /// For `z` in `O_{K_0}` of positive valuation: the minimal `l` with
    /// `pi^l log_F(z)` divisible by pi, and a series `f*` in `pi O_K[[x]]`
    /// with `f*(u_0) = [pi^{l+1}](z)` interpolating a trace-compatible
    /// sequence, checked at levels 0 and 1.
    pub fn finite_pipeline(&self, tower: &Tower, z: &K0Elem) -> Result<FinitePipeline> {
        self.need_pi3()?;
        let r = self.ring();
        let k0 = tower.k0();
        let e0 = k0.e();
        let n = self.ctx.n();
        if k0.vcap(z) == 0 {
            return Err(ForgeError::Precondition("z must have positive valuation".into()));
        }
        let (slog, d) = scaled_log(tower, z)?;
        // v(pi^l log z) = v(slog) + e0 (l - d) >= e0.
        let vs = k0.vcap(&slog);
        let l = minimal_l(vs, slog.prec, e0, d).unwrap_or(0);
        let alpha = if l >= d {
            k0.el_mul(&slog, &k0.el_pow(&k0.exact(k0.embed(&r.pi())), (l - d) as u64))
        } else {
            k0.el_div(&slog, &k0.el_pow(&k0.exact(k0.embed(&r.pi())), (d - l) as u64))?
        };
        let f = tower.finite_interpolate(&alpha, None, n)?;
        // Constant-term correction.
        let tr = tower.trace0(&alpha);
        let one_minus = r.el_sub(&r.el_int(1), &self.q_over(1)?);
        let c = r.el_mul(&tr, &r.el_inv(&one_minus)?);
        let f0 = tower.finite_interpolate(&tower.from_ok0(&c), None, n)?;
        let big_f = r.s_add(&r.s_sub(&f, &r.s_const(&c, n)), &f0);
        let tf = self.t_op(&big_f)?;
        let t0 = tf.coeff(0);
        if !r.el_is_zero(&t0) {
            return Err(ForgeError::DivisibilityViolation("T(F) has a nonzero constant term".into()));
        }
        let j = r.s_shift_down(&tf, 1)?;
        let sol = self.solve_eigen_divisible(&j, 0)?;
        let f1 = r.s_sub(&big_f, &r.s_resize(&sol.h, big_f.len()));
        let eigen_residual = CheckSummary::from_series(&r.s_check_eq(&self.t_op(&f1)?, &r.s_zero(f1.len())));
        let pf1 = r.s_scale(&f1, &r.el(r.pi()));
        let fstar = self.ctx.group().exp_of(&pf1)?;
        // Level 0: f*(u_0) against [pi^{l+1}](z).
        let lhs = tower.eval0(&fstar);
        let mut rhs = z.clone();
        for _ in 0..=l {
            rhs = apply_poly(k0, self.ctx.group().seed(), &rhs);
        }
        let value = CheckSummary::from_elems(k0, &lhs, &rhs);
        // Level 1 through the additive relation and exp_F.
        let (trace_level1, lt_level1) = if tower.level() >= 1 {
            let t1 = tower.trace1_of_series(&f1)?;
            let qp = tower.from_ok0(&self.q_over(1)?);
            let v0 = tower.eval0(&f1);
            let want = k0.el_mul(&qp, &v0);
            let tc = CheckSummary::from_elems(k0, &t1, &want);
            let pi0 = k0.exact(k0.embed(&r.pi()));
            let lt = self.ctx.group().exp_value(k0, &k0.el_mul(&pi0, &t1))?;
            let endo = self.ctx.group().endo(&self.q_over(1)?)?;
            let rq = tower.eval_at(k0, &endo, &lhs);
            (tc, CheckSummary::from_elems(k0, &lt, &rq))
        } else {
            let none = CheckSummary { ok: false, prec: 0 };
            (none.clone(), none)
        };
        Ok(FinitePipeline { l, exponent: l + 1, f1, fstar, eigen_residual, value, trace_level1, lt_level1 })
    }

    /// `a_0 = pi^eps u_0` and `a_1 = z (q/pi^2) a_0` with `Tr_{K_1/K_0}(z) = pi`.
    pub fn build_counterexample(&self, tower: &Tower, eps_valuation: u32) -> Result<Counterexample> {
        self.need_pi3()?;
        let r = self.ring();
        let k0 = tower.k0();
        let k1 = tower.k1()?;
        let pi0 = k0.exact(k0.embed(&r.pi()));
        let a0 = k0.el_mul(&k0.el_pow(&pi0, eps_valuation as u64), &tower.u0());
        let z = tower.find_trace_preimage1(&pi0)?;
        let c = tower.from_ok0(&self.q_over(2)?);
        let a1 = k1.el_mul(&z, &tower.lift01(&k0.el_mul(&c, &a0))?);
        let lhs = tower.trace1(&a1)?;
        let rhs = k0.el_mul(&tower.from_ok0(&self.q_over(1)?), &a0);
        let trace = CheckSummary::from_elems(k0, &lhs, &rhs);
        let (e0, e1) = (k0.e(), k1.e());
        let val_a0 = (k0.vcap(&a0), e0);
        let val_a1 = (k1.vcap(&a1), e1);
        let vq = r.val(&r.q_elem());
        // v(a_1) >= v(a_0) + v(q) - 2, compared over the common denominator.
        let decay_ok = (val_a1.0 as u64) * (e0 as u64) >= (val_a0.0 as u64 + (vq as u64 - 2) * e0 as u64) * e1 as u64;
        Ok(Counterexample { a0, a1, z, trace, val_a0, val_a1, decay_ok })
    }
}

/// `pi^d log_F(z)` for the smallest `d` making the sum integral, together
/// with `d`.
pub fn scaled_log(tower: &Tower, z: &K0Elem) -> Result<(K0Elem, u32)> {
    let g = tower.group();
    let r = g.ring();
    let k0 = tower.k0();
    let e0 = k0.e();
    let ks = g.log_kseries();
    let d = ks.den.iter().copied().max().unwrap_or(0);
    let pi0 = k0.exact(k0.embed(&r.pi()));
    let mut acc = k0.el_int(0);
    let mut zp = z.clone();
    for m in 1..ks.num.len() {
        let coef = Elem::new(k0.embed(&ks.num.c[m]), (ks.num.prec[m] * e0).min(k0.cap()));
        let scaled = k0.el_mul(&coef, &k0.el_pow(&pi0, (d - ks.den[m]) as u64));
        acc = k0.el_add(&acc, &k0.el_mul(&scaled, &zp));
        zp = k0.el_mul(&zp, z);
    }
    // Omitted terms m >= N have valuation >= m v(z) - e0 floor(log_p m) + e0 d.
    let vz = k0.vcap(z) as u64;
    let p = r.p();
    let cap = k0.cap() as u64;
    let mut bound = cap;
    let mut m = ks.num.len() as u64;
    loop {
        let mut lg = 0u64;
        let mut t = m;
        while t >= p {
            t /= p;
            lg += 1;
        }
        let v = (m * vz + e0 as u64 * d as u64).saturating_sub(e0 as u64 * lg);
        bound = bound.min(v);
        if m * vz > cap + e0 as u64 * (lg + 2) {
            break;
        }
        m += 1;
    }
    acc.prec = acc.prec.min(bound as u32);
    Ok((acc, d))
}

/// Smallest `l >= 0` with `v + e0 (l - d) >= e0` for a value of valuation `v`
/// known to precision `prec`; `None` if the value is indistinguishable from
/// zero.
fn minimal_l(v: u32, prec: u32, e0: u32, d: u32) -> Option<u32> {
    if v >= prec {
        return None;
    }
    let need = e0 as i64 * (d as i64 + 1) - v as i64;
    Some(if need <= 0 { 0 } else { (need as u64).div_ceil(e0 as u64) as u32 })
}

fn apply_poly<S: Ring>(s: &S, coeffs: &[Ok], x: &Elem<S::E>) -> Elem<S::E> {
    let mut acc = s.el_int(0);
    for c in coeffs.iter().rev() {
        acc = s.el_add(&s.el_mul(&acc, x), &s.exact(s.embed(c)));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lubin_tate::FormalGroup;
    use crate::okring::OKConfig;
    use std::sync::{Arc, OnceLock};

    struct Q27 {
        ctx: Coleman,
        tower: Tower,
    }

    fn q27() -> &'static Q27 {
        static CELL: OnceLock<Q27> = OnceLock::new();
        CELL.get_or_init(|| {
            let r = OkRing::new(OKConfig::new(3, 3, vec![1, 2, 0, 1], -1, 40)).unwrap();
            let g = Arc::new(FormalGroup::from_str(r, "pi*x + x^q", 832, 54).unwrap());
            let tower = Tower::new(g.clone(), 1).unwrap();
            Q27 { ctx: Coleman::new(g).unwrap(), tower }
        })
    }

    #[test]
    fn t_on_kernel_is_scalar() {
        let c = &q27().ctx;
        let e = Eigen::new(c).unwrap();
        let r = c.ring();
        assert!(r.s_is_zero(&e.t_op(&r.s_zero(c.n())).unwrap()));
        let h = c.h_n(2).unwrap();
        let want = r.s_scale(&h, &r.el_neg(&e.q_over(1).unwrap()));
        assert!(r.s_check_eq(&e.t_op(&h).unwrap(), &want).ok());
    }

    #[test]
    fn eigenvector_from_h1() {
        let c = &q27().ctx;
        let e = Eigen::new(c).unwrap();
        let r = c.ring();
        let h1 = c.h_n(1).unwrap();
        let ev = e.build_eigenvector(&h1, 60).unwrap();
        assert!(ev.residual.ok(), "{:?}", ev.residual);
        let at20 = ev.prefix_at.iter().find(|p| p.0 == 20).unwrap().1;
        assert!(at20 >= 10, "{:?}", ev.prefix_at);
        let d = r.s_sub(&ev.f, &h1);
        assert!(r.s_divisible(&d, 1));
        assert!(matches!(e.build_eigenvector(&r.s_scale(&h1, &r.el(r.pi())), 10), Err(ForgeError::Precondition(_))));
        assert!(matches!(e.build_eigenvector(&r.s_monomial(26, &r.one(), c.n()), 10), Err(ForgeError::NotInKernel)));
    }

    #[test]
    fn g_nm_is_congruent_to_its_seed() {
        let c = &q27().ctx;
        let e = Eigen::new(c).unwrap();
        let r = c.ring();
        let ev = e.g_nm(2, 1, 60).unwrap();
        assert!(ev.residual.ok());
        let seed = r.s_mul(c.pi_series(), &c.h_n(2).unwrap());
        assert!(r.s_divisible(&r.s_sub(&ev.f, &seed), 1));
    }

    #[test]
    fn rho_round_trips() {
        let c = &q27().ctx;
        let e = Eigen::new(c).unwrap();
        let r = c.ring();
        assert!(r.s_is_zero(&e.rho(&r.s_zero(c.n())).unwrap()));
        for n in [1, 2, 5] {
            let h = c.h_n(n).unwrap();
            let inv = e.rho_inverse(&h).unwrap();
            assert!(r.s_check_eq(&e.rho(&inv.g).unwrap(), &h).ok());
            assert!(e.eigen_check(&inv.g).unwrap().0.ok());
            let again = e.rho_inverse(&e.rho(&inv.g).unwrap()).unwrap();
            assert!(r.s_check_eq(&again.g, &inv.g).ok());
        }
        assert!(matches!(e.rho_inverse(&r.s_monomial(26, &r.one(), c.n())), Err(ForgeError::NotInKernel)));
    }

    #[test]
    fn rho_needs_divisible_lambda() {
        let c = &q27().ctx;
        let r = c.ring();
        let e = Eigen::with_lambda(c, r.el_int(1));
        assert!(matches!(e.rho(&c.h_n(1).unwrap()), Err(ForgeError::LambdaNotDivisible)));
    }

    #[test]
    fn divisible_solution() {
        let c = &q27().ctx;
        let e = Eigen::new(c).unwrap();
        let r = c.ring();
        let n = c.n();
        let j = r.s_scale(&r.s_poly(&[r.int(1), r.int(2), r.int(0), r.int(1)], n), &r.el(r.pi()));
        for lvl in [0usize, 1] {
            let sol = e.solve_eigen_divisible(&j, lvl).unwrap();
            let want = r.s_mul(&e.pi_power_endo(lvl, n).unwrap(), &j);
            let chk = r.s_check_eq(&e.t_op(&sol.h).unwrap(), &want);
            assert!(chk.ok(), "{chk:?}");
            let base = e.pi_power_endo(lvl + 1, n).unwrap();
            assert!(r.s_check_eq(&r.s_mul(&base, &sol.quotient), &sol.h).ok());
        }
        let z = e.solve_eigen_divisible(&r.s_zero(n), 0).unwrap();
        assert!(r.s_is_zero(&z.h));
        assert!(e.solve_eigen_divisible(&r.s_one(n), 0).is_err());
    }

    #[test]
    fn finite_pipeline_at_level_one() {
        let q = q27();
        let e = Eigen::new(&q.ctx).unwrap();
        let k0 = q.tower.k0();
        let z = k0.el_mul(&q.tower.u0(), &q.tower.u0());
        let p = e.finite_pipeline(&q.tower, &z).unwrap();
        assert_eq!(p.exponent, p.l + 1);
        assert!(p.eigen_residual.ok && p.value.ok && p.trace_level1.ok && p.lt_level1.ok, "{p:?}");
        // The logarithm of the result lies in the eigenspace.
        let r = q.ctx.ring();
        let lg = q.ctx.group().log_of(&p.fstar).unwrap();
        assert!(e.eigen_check(&lg).unwrap().0.ok());
        assert!(r.s_divisible(&p.fstar, 1));
        let zero = e.finite_pipeline(&q.tower, &k0.el_int(0)).unwrap();
        assert_eq!(zero.l, 0);
        assert!(r.s_is_zero(&zero.fstar));
    }

    #[test]
    fn decaying_sequence() {
        let q = q27();
        let e = Eigen::new(&q.ctx).unwrap();
        let ce = e.build_counterexample(&q.tower, 2).unwrap();
        assert!(ce.trace.ok && ce.decay_ok);
        let k1 = q.tower.k1().unwrap();
        let tz = q.tower.trace1(&ce.z).unwrap();
        let k0 = q.tower.k0();
        assert!(k0.el_eq(&tz, &k0.exact(k0.embed(&q.ctx.ring().pi()))).unwrap());
        assert!(k1.vcap(&ce.a1) > 0);
    }

    #[test]
    fn needs_pi_cubed() {
        let r = OkRing::new(OKConfig::qp(3, -1, 30)).unwrap();
        let g = Arc::new(FormalGroup::from_str(r.clone(), "-3*x + x^3", 16, 40).unwrap());
        let c = Coleman::new(g).unwrap();
        let e = Eigen::new(&c).unwrap();
        assert!(!e.pi3_divides_q());
        assert!(matches!(e.build_eigenvector(&c.h_n(1).unwrap(), 5), Err(ForgeError::Pi3NotDividingQ)));
        assert!(matches!(e.rho(&c.h_n(1).unwrap()), Err(ForgeError::LambdaNotDivisible)));
    }
}
