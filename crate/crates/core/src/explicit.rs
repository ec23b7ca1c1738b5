//! Norm-compatible systems from isomorphisms of formal groups, and the
//! character idempotents of the group ring Z_p[Delta] with Delta cyclic of
//! order p - 1.

use std::sync::Arc;

use serde::Serialize;

use crate::coleman::Coleman;
use crate::eigen::CheckSummary;
use crate::error::{ForgeError, Result};
use crate::gm_bridge;
use crate::interp::{embed_law, Interp, Membership, ModuleTag};
use crate::lubin_tate::FormalGroup;
use crate::okring::{OKConfig, OKElem, Ok, OkRing};
use crate::pseries::{BiSeriesOps, PSeries, SeriesOps};
use crate::ring::{ElemOps, Ring};
use crate::tower::{K0Elem, Tower};

/// `(-1)^{p-1}` as an integer.
pub fn sign(p: u64) -> i64 {
    if (p - 1).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// The `p - 1` solutions of `x^{p-1} = 1` in Z_p modulo `p^m`, in the order
/// of their residues `1, ..., p - 1`.
pub fn roots_of_unity(p: u64, m: u32) -> Result<Vec<OKElem>> {
    if p == 2 {
        return Err(ForgeError::Precondition("p must be odd".into()));
    }
    let r = OkRing::new(OKConfig::qp(p, 1, m))?;
    Ok(teichmuller_lifts(&r))
}

fn teichmuller_lifts(r: &OkRing) -> Vec<OKElem> {
    (1..r.p() as i64).map(|a| r.el(r.teichmuller(&r.int(a)))).collect()
}

fn primitive_root(p: u64) -> u64 {
    let m = p - 1;
    let mut primes = vec![];
    let mut t = m;
    let mut d = 2;
    while d * d <= t {
        if t.is_multiple_of(d) {
            primes.push(d);
            while t.is_multiple_of(d) {
                t /= d;
            }
        }
        d += 1;
    }
    if t > 1 {
        primes.push(t);
    }
    let pow = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        acc
    };
    (2..p).find(|&g| primes.iter().all(|&q| pow(g, m / q) != 1)).unwrap_or(1)
}

/// A character of Delta, determined by `psi(delta) = gen^index`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Character {
    pub index: usize,
    #[serde(skip)]
    pub image: Ok,
}

/// An element `sum_k c_k delta^k` of Z_p[Delta].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupRingElem {
    pub coeffs: Vec<Ok>,
}

/// Z_p[Delta] for the group Delta of (p-1)-st roots of unity, generated by
/// the Teichmuller lift `gen` of a primitive root modulo p.
#[derive(Clone, Debug)]
pub struct GroupRing {
    ring: OkRing,
    gen: Ok,
    order: usize,
}

impl GroupRing {
    pub fn new(p: u64, m: u32) -> Result<Self> {
        if p == 2 {
            return Err(ForgeError::Precondition("p must be odd".into()));
        }
        let ring = OkRing::new(OKConfig::qp(p, 1, m))?;
        Self::over(ring)
    }

    /// The group ring over an existing Z_p.
    pub fn over(ring: OkRing) -> Result<Self> {
        if ring.f() != 1 || ring.p() == 2 {
            return Err(ForgeError::Precondition("need Z_p with p odd".into()));
        }
        let p = ring.p();
        let gen = ring.teichmuller(&ring.int(primitive_root(p) as i64));
        Ok(GroupRing { ring, gen, order: (p - 1) as usize })
    }

    pub fn ring(&self) -> &OkRing {
        &self.ring
    }
    pub fn order(&self) -> usize {
        self.order
    }
    /// The root of unity `gen^k` that `delta^k` stands for.
    pub fn root(&self, k: usize) -> Ok {
        self.ring.pow(&self.gen, (k % self.order) as u64)
    }

    pub fn zero(&self) -> GroupRingElem {
        GroupRingElem { coeffs: vec![self.ring.zero(); self.order] }
    }
    pub fn one(&self) -> GroupRingElem {
        self.delta(0)
    }
    pub fn delta(&self, k: usize) -> GroupRingElem {
        let mut e = self.zero();
        e.coeffs[k % self.order] = self.ring.one();
        e
    }
    pub fn add(&self, a: &GroupRingElem, b: &GroupRingElem) -> GroupRingElem {
        GroupRingElem { coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| self.ring.add(x, y)).collect() }
    }
    pub fn sub(&self, a: &GroupRingElem, b: &GroupRingElem) -> GroupRingElem {
        GroupRingElem { coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| self.ring.sub(x, y)).collect() }
    }
    pub fn mul(&self, a: &GroupRingElem, b: &GroupRingElem) -> GroupRingElem {
        let mut out = self.zero();
        for (i, x) in a.coeffs.iter().enumerate() {
            for (j, y) in b.coeffs.iter().enumerate() {
                let k = (i + j) % self.order;
                self.ring.mul_add_assign(&mut out.coeffs[k], x, y);
            }
        }
        out
    }
    pub fn scale(&self, a: &GroupRingElem, c: &Ok) -> GroupRingElem {
        GroupRingElem { coeffs: a.coeffs.iter().map(|x| self.ring.mul(x, c)).collect() }
    }
    /// The augmentation `sum_k c_k`.
    pub fn augmentation(&self, a: &GroupRingElem) -> Ok {
        a.coeffs.iter().fold(self.ring.zero(), |acc, x| self.ring.add(&acc, x))
    }

    pub fn characters(&self) -> Vec<Character> {
        (0..self.order).map(|index| Character { index, image: self.root(index) }).collect()
    }
    /// `psi(delta^k)`.
    pub fn eval(&self, psi: &Character, k: usize) -> Ok {
        self.ring.pow(&psi.image, (k % self.order) as u64)
    }

    /// `e_psi = (1/(p-1)) sum_g psi(g^{-1}) g`.
    pub fn idempotent(&self, psi: &Character) -> GroupRingElem {
        let r = &self.ring;
        let inv = r.inv_unit(&r.int(self.order as i64)).expect("p - 1 is a unit");
        let coeffs = (0..self.order).map(|k| r.mul(&inv, &self.eval(psi, self.order - k))).collect();
        GroupRingElem { coeffs }
    }
}

/// Identities of the idempotents, each exact modulo `p^M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdempotentReport {
    pub p: u64,
    pub m: u32,
    pub roots_ok: bool,
    pub sum_is_one: bool,
    pub idempotent: bool,
    pub orthogonal: bool,
    /// `psi(g) e_psi = g e_psi` for the generator.
    pub eigen: bool,
}

impl IdempotentReport {
    pub fn ok(&self) -> bool {
        self.roots_ok && self.sum_is_one && self.idempotent && self.orthogonal && self.eigen
    }
}

pub fn idempotent_report(p: u64, m: u32) -> Result<IdempotentReport> {
    let gr = GroupRing::new(p, m)?;
    let r = gr.ring();
    let roots = roots_of_unity(p, m)?;
    let mut roots_ok = roots.len() == gr.order();
    for (i, z) in roots.iter().enumerate() {
        roots_ok &= r.el_eq(&r.el_pow(z, p - 1), &r.el_int(1))?;
        roots_ok &= r.coords(&r.sub(&z.raw, &r.int(i as i64 + 1)))[0].rem_euclid(p as i64) == 0;
    }
    let prod = roots.iter().fold(r.el_int(1), |a, z| r.el_mul(&a, z));
    roots_ok &= r.el_eq(&prod, &r.el_int(-1))?;
    let chars = gr.characters();
    let es: Vec<GroupRingElem> = chars.iter().map(|c| gr.idempotent(c)).collect();
    let sum = es.iter().fold(gr.zero(), |a, e| gr.add(&a, e));
    let sum_is_one = sum == gr.one();
    let idempotent = es.iter().all(|e| gr.mul(e, e) == *e);
    let mut orthogonal = true;
    for i in 0..es.len() {
        for j in 0..es.len() {
            if i != j {
                orthogonal &= gr.mul(&es[i], &es[j]) == gr.zero();
            }
        }
    }
    let eigen = chars.iter().zip(&es).all(|(c, e)| gr.mul(&gr.delta(1), e) == gr.scale(e, &c.image));
    Ok(IdempotentReport { p, m, roots_ok, sum_is_one, idempotent, orthogonal, eigen })
}

/// `prod_z outer(a(x) + z)` over the q torsion points `z` of the tower's
/// group, sum taken in the group law, descended to O_K. Without `outer`
/// the identity series is used.
pub fn torsion_product(tower: &Tower, a: &PSeries<Ok>, outer: Option<&PSeries<Ok>>) -> Result<PSeries<Ok>> {
    let k0 = tower.k0();
    let r = tower.ring();
    let n = a.len();
    let law = embed_law(k0, tower.group().law());
    let ea = k0.s_embed(a);
    let mut prod = k0.s_one(n);
    for z in tower.torsion_points()? {
        let zs = k0.s_const(&z, n);
        let mut term = k0.bi_substitute(&law, &ea, &zs)?;
        if let Some(o) = outer {
            term = k0.s_compose(&k0.s_embed(o), &term)?;
        }
        prod = k0.s_mul(&prod, &term);
    }
    let mut out = r.s_zero(n);
    for i in 0..n {
        let c = tower.descend0(&prod.coeff(i))?;
        out.c[i] = c.raw;
        out.prec[i] = c.prec;
    }
    out.tail = 0;
    Ok(out)
}

/// Both sides of a product identity and their comparison.
#[derive(Clone, Debug)]
pub struct ProductCheck {
    pub lhs: PSeries<Ok>,
    pub rhs: PSeries<Ok>,
    pub check: CheckSummary,
}

/// `prod_{z in G_0} (r(x) + z) = (-1)^{p-1} g(r(x))` for the group of `g`.
pub fn torsion_product_check(grp_g: Arc<FormalGroup>, r_series: &PSeries<Ok>) -> Result<ProductCheck> {
    let r = grp_g.ring().clone();
    if !r.el_is_zero(&r_series.coeff(0)) {
        return Err(ForgeError::Precondition("r(0) must vanish".into()));
    }
    let n = r_series.len();
    let g_poly = r.s_poly(grp_g.seed(), n.max(grp_g.seed().len()));
    let rhs = r.s_scale(&r.s_compose(&g_poly, r_series)?, &r.el_int(sign(r.p())));
    let tower = Tower::new(grp_g, 0)?;
    let lhs = torsion_product(&tower, r_series, None)?;
    let check = CheckSummary::from_series(&r.s_check_eq(&lhs, &rhs));
    Ok(ProductCheck { lhs, rhs, check })
}

/// The isomorphism `i` from the group of `f` to the group with seed `g`:
/// `i = x + ...` with `g(i) = i(f)`.
pub fn iso(grp_f: &FormalGroup, g: &[Ok], n: usize) -> Result<PSeries<Ok>> {
    crate::lubin_tate::validate_rpiq(grp_f.ring(), g)?;
    grp_f.intertwine(g, &grp_f.ring().el_int(1), n)
}

/// Checks that `(-1)^{p-1} i` is a norm-compatible series.
#[derive(Clone, Debug, Serialize)]
pub struct NormSystem {
    /// `prod_v i(x + v) = (-1)^{p-1} i(f(x))`.
    pub product: CheckSummary,
    /// `N((-1)^{p-1} i) = (-1)^{p-1} i`, when the norm operator is available.
    pub norm_fixed: Option<CheckSummary>,
    /// `N_{K_1/K_0}` of the level-1 value against the level-0 value.
    pub tower: Option<CheckSummary>,
}

impl NormSystem {
    pub fn ok(&self) -> bool {
        self.product.ok && self.norm_fixed.as_ref().is_none_or(|c| c.ok) && self.tower.as_ref().is_none_or(|c| c.ok)
    }
}

/// Verify the norm-compatibility of `(-1)^{p-1} i` for `i = iso(f, g)` to
/// `n` terms. The tower witness uses `tower_len` terms of `i` when given.
pub fn norm_system_check(ctx: &Coleman, g: &[Ok], n: usize, tower_len: Option<usize>) -> Result<NormSystem> {
    let grp = ctx.group();
    let r = ctx.ring();
    let sgn = r.el_int(sign(r.p()));
    let i = iso(grp, g, n)?;
    let s = r.s_scale(&i, &sgn);
    let tower0 = Tower::new(grp.clone(), 0)?;
    let lhs = torsion_product(&tower0, &r.s_x(n), Some(&i))?;
    let rhs = r.s_scale(&r.s_compose(&i, &grp.f_series(n))?, &sgn);
    let product = CheckSummary::from_series(&r.s_check_eq(&lhs, &rhs));
    let norm_fixed = if r.q() <= 9 && n <= ctx.n() {
        Some(CheckSummary::from_series(&r.s_check_eq(&ctx.norm_op(&s)?, &s)))
    } else {
        None
    };
    let tower = match tower_len {
        Some(len) => {
            let t = Tower::new(grp.clone(), 1)?;
            let long = r.s_scale(&iso(grp, g, len)?, &sgn);
            let v1 = t.eval1(&long)?;
            let v0 = t.eval0(&long);
            Some(CheckSummary::from_elems(t.k0(), &t.norm1(&v1)?, &v0))
        }
        None => None,
    };
    Ok(NormSystem { product, norm_fixed, tower })
}

/// `N_{K_0/K}(u_0)` against `pi`, for q odd.
pub fn norm_witness(tower: &Tower) -> Result<CheckSummary> {
    let r = tower.ring();
    if r.q().is_multiple_of(2) {
        return Err(ForgeError::Precondition("q must be odd".into()));
    }
    let n = tower.norm0(&tower.u0());
    Ok(CheckSummary::from_elems(r, &n, &r.el(r.pi())))
}

/// A principal unit of K_0 raised to an exponent in Z_p, with the precision
/// lowered by the size of `u^{p^M} - 1`.
fn zp_pow(tower: &Tower, u: &K0Elem, a: &Ok) -> K0Elem {
    let k0 = tower.k0();
    let r = tower.ring();
    let m = r.cap();
    let p = r.p();
    let rep = r.coords(a)[0].rem_euclid(p.pow(m) as i64) as u64;
    let mut out = k0.el_pow(u, rep);
    let err = k0.el_sub(&k0.el_pow(u, p.pow(m)), &k0.el_int(1));
    out.prec = out.prec.min(k0.vcap(&err));
    out
}

/// `e_psi` applied to a principal unit of K_0, with its norm to K.
#[derive(Clone, Debug)]
pub struct Decomposed {
    pub value: K0Elem,
    pub norm: OKElem,
    /// For nontrivial `psi`, whether the norm is 1 at precision.
    pub norm_is_one: Option<bool>,
}

/// `prod_k sigma_k(u)^{c_k}` for `e_psi = sum_k c_k delta^k`, where
/// `delta^k` acts on K_0 by `u_0 -> [gen^k](u_0)`.
pub fn eigen_decompose(tower: &Tower, gr: &GroupRing, psi: &Character, u: &K0Elem) -> Result<Decomposed> {
    let k0 = tower.k0();
    let r = tower.ring();
    if r.f() != 1 || gr.ring().p() != r.p() {
        return Err(ForgeError::Precondition("the group ring must be over the base Z_p".into()));
    }
    let d = k0.el_sub(u, &k0.el_int(1));
    if k0.vcap(&d) < 1 {
        return Err(ForgeError::Precondition("not a principal unit".into()));
    }
    let e = gr.idempotent(psi);
    let mut value = k0.el_int(1);
    for (k, c) in e.coeffs.iter().enumerate() {
        let img = tower.conj0_image(&r.el(gr.root(k)))?;
        let su = tower.apply_conj0(&img, u);
        value = k0.el_mul(&value, &zp_pow(tower, &su, c));
    }
    let norm = tower.norm0(&value);
    let norm_is_one = if psi.index == 0 { None } else { Some(r.el_eq(&norm, &r.el_int(1))?) };
    Ok(Decomposed { value, norm, norm_is_one })
}

/// Stages of the composite construction starting from an explicit unit.
#[derive(Clone, Debug)]
pub struct Composite {
    pub kernel_element: PSeries<Ok>,
    pub cprime: PSeries<Ok>,
    pub interpolating: PSeries<Ok>,
    pub membership: Membership,
}

/// Explicit unit series `i/x - 1` to the kernel of the trace operator, then
/// to `C'` via `[pi]^2`, then to an interpolating series checked against
/// the defining relation of `A`.
pub fn composite_recipe(ctx: &Coleman, g: &[Ok]) -> Result<Composite> {
    let unit = unit_from_iso(ctx.group(), g, ctx.n())?;
    let inj = gm_bridge::inject_to_kernel(ctx, &unit, None)?;
    if !inj.ok() {
        return Err(ForgeError::MembershipFailure("injection checks failed".into()));
    }
    let cprime = gm_bridge::to_cprime(ctx, &inj.s, 2)?;
    let interp = Interp::new(ctx);
    let interpolating = interp.cprime_to_a(&cprime)?;
    let membership = interp.check_membership(ModuleTag::A, &interpolating)?;
    Ok(Composite { kernel_element: inj.s, cprime, interpolating, membership })
}

/// The unit `i(x)/x - 1` attached to the isomorphism onto the group of `g`.
pub fn unit_from_iso(grp_f: &FormalGroup, g: &[Ok], n: usize) -> Result<PSeries<Ok>> {
    let r = grp_f.ring();
    let i = iso(grp_f, g, n + 1)?;
    Ok(r.s_sub(&r.s_resize(&r.s_shift_down(&i, 1)?, n), &r.s_one(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lubin_tate::parse_seed;

    const G2: &str = "-3*x + 3*x^2 + x^3";

    fn q3(n: usize, nf: usize) -> (OkRing, Arc<FormalGroup>) {
        let r = OkRing::new(OKConfig::qp(3, -1, 40)).unwrap();
        let g = FormalGroup::from_str(r.clone(), "-3*x + x^3", n, nf).unwrap();
        (r, Arc::new(g))
    }

    /// Determinant of multiplication by `F(r(X), Y)` modulo `g(Y)`, over
    /// (Z / 3^30)[[X]] / X^n, with plain integer arithmetic.
    fn resultant_oracle(grp: &FormalGroup, rs: &[i128], n: usize) -> Vec<i128> {
        const MOD: i128 = 205891132094649; // 3^30
        let red = |v: i128| v.rem_euclid(MOD);
        let r = grp.ring();
        let to_i = |c: &Ok| r.coords(c)[0] as i128;
        let law = grp.law();
        let q = grp.seed().len() - 1;
        let g: Vec<i128> = grp.seed().iter().map(to_i).collect();
        let mul = |a: &[i128], b: &[i128]| {
            let mut o = vec![0i128; n];
            for i in 0..n {
                for j in 0..n - i {
                    o[i + j] = red(o[i + j] + red(a[i] * b[j]));
                }
            }
            o
        };
        // Powers of r(X).
        let mut rp = vec![{
            let mut one = vec![0i128; n];
            one[0] = 1;
            one
        }];
        for k in 1..law.n() {
            let nxt = mul(&rp[k - 1], rs);
            rp.push(nxt);
        }
        // Y^j modulo g(Y) as integer vectors of length q.
        let mut ypow: Vec<Vec<i128>> = vec![];
        let mut cur = vec![0i128; q];
        cur[0] = 1;
        for _ in 0..law.n() + q {
            ypow.push(cur.clone());
            let top = cur[q - 1];
            let mut nxt = vec![0i128; q];
            for i in (1..q).rev() {
                nxt[i] = cur[i - 1];
            }
            for i in 0..q {
                nxt[i] = red(nxt[i] - top * g[i]);
            }
            cur = nxt;
        }
        // elem[k] = coefficient of Y^k of F(r(X), Y) mod g(Y), a series in X.
        let mut elem = vec![vec![0i128; n]; q];
        for d in 0..law.n() {
            for i in 0..=d {
                let c = to_i(law.get(i, d - i));
                if c == 0 {
                    continue;
                }
                for k in 0..q {
                    let w = red(c * ypow[d - i][k]);
                    if w == 0 {
                        continue;
                    }
                    for t in 0..n {
                        elem[k][t] = red(elem[k][t] + w * rp[i][t]);
                    }
                }
            }
        }
        // Column j of the matrix: elem * Y^j.
        let mut m = vec![vec![vec![0i128; n]; q]; q];
        for j in 0..q {
            for k in 0..q {
                for row in 0..q {
                    let w = ypow[k + j][row];
                    if w == 0 {
                        continue;
                    }
                    for t in 0..n {
                        m[row][j][t] = red(m[row][j][t] + w * elem[k][t]);
                    }
                }
            }
        }
        assert_eq!(q, 3);
        let det3 = |a: &Vec<Vec<Vec<i128>>>| {
            let t = |i: usize, j: usize, k: usize, l: usize, x: usize, y: usize| mul(&mul(&a[i][j], &a[k][l]), &a[x][y]);
            let terms = [
                (t(0, 0, 1, 1, 2, 2), 1),
                (t(0, 1, 1, 2, 2, 0), 1),
                (t(0, 2, 1, 0, 2, 1), 1),
                (t(0, 2, 1, 1, 2, 0), -1),
                (t(0, 0, 1, 2, 2, 1), -1),
                (t(0, 1, 1, 0, 2, 2), -1),
            ];
            let mut o = vec![0i128; n];
            for (v, s) in terms {
                for i in 0..n {
                    o[i] = red(o[i] + s * v[i]);
                }
            }
            o
        };
        det3(&m)
    }

    #[test]
    fn roots_of_unity_small_cases() {
        let z = roots_of_unity(3, 40).unwrap();
        let r = OkRing::new(OKConfig::qp(3, 1, 40)).unwrap();
        assert!(r.el_eq(&z[0], &r.el_int(1)).unwrap() && r.el_eq(&z[1], &r.el_int(-1)).unwrap());
        let z5 = roots_of_unity(5, 4).unwrap();
        let r5 = OkRing::new(OKConfig::qp(5, 1, 4)).unwrap();
        for w in &z5 {
            let c = r5.coords(&r5.pow(&w.raw, 4))[0].rem_euclid(625);
            assert_eq!(c, 1);
        }
        assert!(roots_of_unity(2, 10).is_err());
    }

    #[test]
    fn idempotents() {
        let gr = GroupRing::new(3, 40).unwrap();
        let r = gr.ring();
        let half = r.inv_unit(&r.int(2)).unwrap();
        let chars = gr.characters();
        let triv = gr.idempotent(&chars[0]);
        let sgn = gr.idempotent(&chars[1]);
        assert_eq!(triv, gr.scale(&gr.add(&gr.one(), &gr.delta(1)), &half));
        assert_eq!(sgn, gr.scale(&gr.sub(&gr.one(), &gr.delta(1)), &half));
        assert_eq!(r.coords(&gr.augmentation(&triv))[0], 1);
        for (p, m) in [(3, 40), (5, 20), (7, 15)] {
            let rep = idempotent_report(p, m).unwrap();
            assert!(rep.ok(), "{rep:?}");
        }
    }

    #[test]
    fn torsion_products_match_the_resultant() {
        let n = 10;
        let (r, _) = q3(n, 80);
        let gg = Arc::new(FormalGroup::from_str(r.clone(), G2, n, 80).unwrap());
        for rs in [vec![0i128, 1], vec![0, 0, 1], vec![0, 2, -1, 5]] {
            let mut full = rs.clone();
            full.resize(n, 0);
            let ser = r.s_poly(&full.iter().map(|&v| r.int(v as i64)).collect::<Vec<_>>(), n);
            let chk = torsion_product_check(gg.clone(), &ser).unwrap();
            assert!(chk.check.ok && chk.check.prec as usize == n, "{:?}", chk.check);
            assert!(chk.lhs.prec.iter().all(|&p| p >= 30), "{:?}", chk.lhs.prec);
            let oracle = resultant_oracle(&gg, &full, n);
            for i in 0..n {
                let got = r.coords(&chk.lhs.c[i])[0] as i128;
                assert_eq!(got.rem_euclid(205891132094649), oracle[i], "degree {i}");
            }
        }
        let zero = r.s_zero(n);
        let chk = torsion_product_check(gg, &zero).unwrap();
        assert!(chk.check.ok && r.s_is_zero(&chk.lhs));
    }

    #[test]
    fn iso_product_system() {
        let n = 10;
        let (r, grp) = q3(n, 80);
        let ctx = Coleman::new(grp.clone()).unwrap();
        let g = parse_seed(&r, G2).unwrap();
        let sys = norm_system_check(&ctx, &g, n, Some(60)).unwrap();
        assert!(sys.ok(), "{sys:?}");
        assert_eq!(sys.product.prec, n as u32);
        assert!(sys.tower.as_ref().unwrap().prec >= 20);
        // g = f gives i = x.
        let same = norm_system_check(&ctx, grp.seed(), n, None).unwrap();
        assert!(same.ok());
        assert!(r.s_check_eq(&iso(&grp, grp.seed(), n).unwrap(), &r.s_x(n)).ok());
        assert!(iso(&grp, &parse_seed(&r, "3*x + x^3").unwrap(), n).is_err());
    }

    #[test]
    fn norm_of_generator_is_pi() {
        let (_, grp) = q3(10, 10);
        assert!(norm_witness(&Tower::new(grp, 0).unwrap()).unwrap().ok);
        let r5 = OkRing::new(OKConfig::qp(5, -1, 20)).unwrap();
        let g5 = FormalGroup::from_str(r5, "-5*x + x^5", 8, 8).unwrap();
        assert!(norm_witness(&Tower::new(Arc::new(g5), 0).unwrap()).unwrap().ok);
    }

    #[test]
    fn character_parts_have_norm_one() {
        let r5 = OkRing::new(OKConfig::qp(5, -1, 20)).unwrap();
        let g5 = Arc::new(FormalGroup::from_str(r5.clone(), "-5*x + x^5", 8, 8).unwrap());
        let t = Tower::new(g5, 0).unwrap();
        let gr = GroupRing::over(r5.clone()).unwrap();
        let k0 = t.k0();
        let u0 = t.u0();
        let samples = [
            k0.el_add(&k0.el_int(1), &u0),
            k0.el_sub(&k0.el_int(1), &k0.el_mul(&u0, &u0)),
            k0.el_add(&k0.el_int(6), &k0.el_mul(&k0.el_int(2), &u0)),
        ];
        for u in &samples {
            for psi in gr.characters() {
                let d = eigen_decompose(&t, &gr, &psi, u).unwrap();
                if psi.index == 0 {
                    assert!(d.norm_is_one.is_none());
                } else {
                    assert_eq!(d.norm_is_one, Some(true), "psi {}", psi.index);
                    assert!(d.value.prec > 0);
                }
            }
            // The parts multiply back to u.
            let prod = gr
                .characters()
                .iter()
                .map(|psi| eigen_decompose(&t, &gr, psi, u).unwrap().value)
                .fold(k0.el_int(1), |a, b| k0.el_mul(&a, &b));
            assert!(k0.el_eq(&prod, u).unwrap());
        }
        let one = eigen_decompose(&t, &gr, &gr.characters()[1], &k0.el_int(1)).unwrap();
        assert!(k0.el_eq(&one.value, &k0.el_int(1)).unwrap());
        assert!(eigen_decompose(&t, &gr, &gr.characters()[1], &u0).is_err());
    }

    #[test]
    fn composite_reaches_a() {
        let n = 10;
        let (r, grp) = q3(n, n + 20);
        let ctx = Coleman::new(grp).unwrap();
        let g = parse_seed(&r, G2).unwrap();
        let c = composite_recipe(&ctx, &g).unwrap();
        assert!(c.membership.member, "{:?}", c.membership.check);
        assert!(!r.s_is_zero(&c.cprime));
    }
}
