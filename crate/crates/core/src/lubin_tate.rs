//! Lubin-Tate formal group laws attached to polynomial seeds, their
//! endomorphisms, logarithm and exponential.

use std::collections::HashMap;
use std::sync::Mutex;

use serde_json::{json, Value};

use crate::error::{ForgeError, Result};
use crate::okring::{OKElem, Ok, OkRing};
use crate::pseries::{BiSeries, BiSeriesOps, KSeries, PSeries, SeriesOps};
use crate::ring::{Elem, ElemOps, Ring};

/// Parse a seed polynomial such as `pi*x + x^q`, `-3*x + 3*x^2 + x^3` or
/// `(1+x)^p - 1`. Coefficient factors may be integers, `pi`, `p` or `q`;
/// exponents may be integers, `p` or `q`.
pub fn parse_seed(r: &OkRing, s: &str) -> Result<Vec<Ok>> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = |m: &str| ForgeError::SeedInvalid(format!("cannot parse `{s}`: {m}"));
    if compact == "(1+x)^p-1" {
        let p = r.p() as usize;
        let mut c = vec![r.zero(); p + 1];
        let mut binom: i64 = 1;
        for (k, ck) in c.iter_mut().enumerate().skip(1) {
            binom = binom * (p as i64 - k as i64 + 1) / k as i64;
            *ck = r.int(binom);
        }
        return Ok(c);
    }
    let mut terms: Vec<(bool, String)> = vec![];
    let mut cur = String::new();
    let mut neg = false;
    for ch in compact.chars() {
        if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with('^') && !cur.ends_with('*') {
            terms.push((neg, std::mem::take(&mut cur)));
            neg = ch == '-';
        } else if (ch == '+' || ch == '-') && cur.is_empty() {
            neg ^= ch == '-';
        } else {
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        terms.push((neg, cur));
    }
    if terms.is_empty() {
        return Err(bad("empty"));
    }
    let atom = |t: &str| -> Result<i64> {
        match t {
            "p" => Ok(r.p() as i64),
            "q" => Ok(r.q() as i64),
            _ => t.parse::<i64>().map_err(|_| bad(t)),
        }
    };
    let mut coeffs: Vec<Ok> = vec![];
    for (neg, t) in terms {
        let mut c = r.int(if neg { -1 } else { 1 });
        let mut deg = 0usize;
        for f in t.split('*') {
            if f == "x" {
                deg += 1;
            } else if let Some(e) = f.strip_prefix("x^") {
                deg += atom(e)? as usize;
            } else if f == "pi" {
                c = r.mul(&c, &r.pi());
            } else {
                c = r.mul(&c, &r.int(atom(f)?));
            }
        }
        if coeffs.len() <= deg {
            coeffs.resize(deg + 1, r.zero());
        }
        coeffs[deg] = r.add(&coeffs[deg], &c);
    }
    Ok(coeffs)
}

/// Check the Lubin-Tate conditions `f = pi x mod deg 2`, `f = x^q mod pi`.
pub fn validate_seed(r: &OkRing, f: &[Ok]) -> Result<()> {
    let q = r.q() as usize;
    let get = |i: usize| f.get(i).copied().unwrap_or_else(|| r.zero());
    if !r.is_zero(&get(0)) {
        return Err(ForgeError::SeedInvalid("constant term is not zero".into()));
    }
    if get(1) != r.pi() {
        return Err(ForgeError::SeedInvalid("linear term is not pi".into()));
    }
    for (i, c) in f.iter().enumerate() {
        let want = if i == q { r.one() } else { r.zero() };
        if r.val(&r.sub(c, &want)) < 1 {
            return Err(ForgeError::SeedInvalid(format!("coefficient of x^{i} is not congruent to that of x^q mod pi")));
        }
    }
    if f.len() <= q {
        return Err(ForgeError::SeedInvalid("degree is below q".into()));
    }
    Ok(())
}

/// Membership in R(pi, q): monic of degree q, `= x^q mod pi`, `= pi x mod x^2`.
pub fn validate_rpiq(r: &OkRing, g: &[Ok]) -> Result<()> {
    let q = r.q() as usize;
    let mut deg = g.len();
    while deg > 0 && r.is_zero(&g[deg - 1]) {
        deg -= 1;
    }
    if deg != q + 1 || g[q] != r.one() {
        return Err(ForgeError::SeedInvalid("not monic of degree q".into()));
    }
    if g[..q].iter().any(|c| r.val(c) < 1) {
        return Err(ForgeError::SeedInvalid("not congruent to x^q mod pi".into()));
    }
    if !r.is_zero(&g[0]) || g[1] != r.pi() {
        return Err(ForgeError::SeedInvalid("linear term is not pi".into()));
    }
    Ok(())
}

/// A formal group law `F` with `[pi] = f`, known to total degree `nf`, with
/// univariate companions truncated at degree `n`.
pub struct FormalGroup {
    ring: OkRing,
    n: usize,
    nf: usize,
    seed: Vec<Ok>,
    symmetric: bool,
    law: BiSeries<Ok>,
    /// Rows `[f^k]_m` for `m` in `k..n`.
    fpow: Vec<Vec<Ok>>,
    dser: PSeries<Ok>,
    log_deriv: PSeries<Ok>,
    ltilde: PSeries<Ok>,
    etilde: PSeries<Ok>,
    endo_cache: Mutex<HashMap<(Vec<u64>, u32), PSeries<Ok>>>,
}

impl std::fmt::Debug for FormalGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormalGroup").field("n", &self.n).field("nf", &self.nf).field("seed", &self.seed).finish()
    }
}

fn is_symmetric(r: &OkRing, seed: &[Ok]) -> bool {
    let m = r.q() as usize - 1;
    seed.iter().enumerate().all(|(i, c)| r.is_zero(c) || i % m == 1 % m)
}

/// Rows of powers of a polynomial truncated at degree `n`.
fn power_rows(r: &OkRing, seed: &[Ok], n: usize) -> Vec<Vec<Ok>> {
    let mut rows: Vec<Vec<Ok>> = Vec::with_capacity(n);
    let sparse: Vec<(usize, Ok)> = seed.iter().enumerate().filter(|(_, c)| !r.is_zero(c)).map(|(i, c)| (i, *c)).collect();
    let mut prev = vec![r.zero(); n];
    if n > 0 {
        prev[0] = r.one();
    }
    for k in 0..n {
        if k > 0 {
            let mut next = vec![r.zero(); n];
            for (m, c) in prev.iter().enumerate() {
                if r.is_zero(c) {
                    continue;
                }
                for (i, s) in &sparse {
                    if m + i < n {
                        r.mul_add_assign(&mut next[m + i], c, s);
                    }
                }
            }
            prev = next;
        }
        rows.push(prev[k..].to_vec());
    }
    rows
}

impl FormalGroup {
    /// Build the group of a seed satisfying the Lubin-Tate conditions.
    pub fn new(ring: OkRing, seed: Vec<Ok>, n: usize, nf: usize) -> Result<Self> {
        validate_seed(&ring, &seed)?;
        if n < 2 || nf < 2 {
            return Err(ForgeError::Precondition("truncation degrees must be at least 2".into()));
        }
        let symmetric = is_symmetric(&ring, &seed);
        let fpow = power_rows(&ring, &seed, n.max(nf));
        let mut g = FormalGroup {
            ring,
            n,
            nf,
            seed,
            symmetric,
            law: BiSeries { layers: vec![], prec: vec![] },
            fpow,
            dser: PSeries { c: vec![], prec: vec![], tail: 0 },
            log_deriv: PSeries { c: vec![], prec: vec![], tail: 0 },
            ltilde: PSeries { c: vec![], prec: vec![], tail: 0 },
            etilde: PSeries { c: vec![], prec: vec![], tail: 0 },
            endo_cache: Mutex::new(HashMap::new()),
        };
        g.law = g.build_law()?;
        g.build_log()?;
        Ok(g)
    }

    pub fn from_str(ring: OkRing, seed: &str, n: usize, nf: usize) -> Result<Self> {
        let s = parse_seed(&ring, seed)?;
        Self::new(ring, s, n, nf)
    }

    pub fn ring(&self) -> &OkRing {
        &self.ring
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nf(&self) -> usize {
        self.nf
    }
    pub fn q(&self) -> u64 {
        self.ring.q()
    }
    pub fn seed(&self) -> &[Ok] {
        &self.seed
    }
    /// Whether all seed degrees are congruent to 1 mod q-1, so every series
    /// commuting with `[zeta] = zeta x` lives in those degrees.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
    pub fn law(&self) -> &BiSeries<Ok> {
        &self.law
    }
    /// `[f^k]_m`.
    pub fn fpow_coeff(&self, k: usize, m: usize) -> Ok {
        if m < k || k >= self.fpow.len() || m - k >= self.fpow[k].len() {
            return self.ring.zero();
        }
        self.fpow[k][m - k]
    }
    /// The seed as a series of length `n`.
    pub fn f_series(&self, n: usize) -> PSeries<Ok> {
        self.ring.s_poly(&self.seed, n)
    }

    fn degree_allowed(&self, d: usize) -> bool {
        let m = self.q() as usize - 1;
        !self.symmetric || d % m == 1 % m
    }

    fn build_law(&self) -> Result<BiSeries<Ok>> {
        let r = &self.ring;
        let nf = self.nf;
        let cap = r.cap();
        let ex0 = r.exact(r.zero());
        let mut lay: Vec<Vec<OKElem>> = vec![vec![ex0.clone()]];
        let mut one = vec![ex0.clone(); 2];
        one[0] = r.el_int(1);
        one[1] = r.el_int(1);
        lay.push(one);
        let maxk = self.seed.len() - 1;
        // pw[k] holds layers of F^k, filled online.
        let mut pw: Vec<Vec<Vec<OKElem>>> = vec![vec![]; maxk + 1];
        let layer_zero = |l: &Vec<OKElem>| l.iter().all(|e| e.prec >= cap && r.is_zero(&e.raw));
        let power_layer = |fl: &Vec<Vec<OKElem>>, prev: &Vec<Vec<OKElem>>, d: usize, k: usize| -> Vec<OKElem> {
            // Layer d of F * (F^{k-1}); F^{k-1} has order k-1.
            let mut out = vec![r.exact(r.zero()); d + 1];
            for e in 1..=d.saturating_sub(k - 1) {
                let a = &fl[e];
                let b = &prev[d - e];
                if layer_zero(a) || layer_zero(b) {
                    continue;
                }
                for (i, x) in a.iter().enumerate() {
                    if x.prec >= cap && r.is_zero(&x.raw) {
                        continue;
                    }
                    for (j, y) in b.iter().enumerate() {
                        if y.prec >= cap && r.is_zero(&y.raw) {
                            continue;
                        }
                        out[i + j] = r.el_add(&out[i + j], &r.el_mul(x, y));
                    }
                }
            }
            out
        };
        for d in 2..nf {
            // Update power layers d - 1 for all k >= 2 so that F^k is known
            // below degree d; layer d of F^k only needs F below degree d.
            for k in 2..=maxk {
                while pw[k].len() < d + 1 {
                    let dd = pw[k].len();
                    let layer = if dd < k {
                        vec![r.exact(r.zero()); dd + 1]
                    } else {
                        let prev = if k == 2 { lay.clone() } else { pw[k - 1].clone() };
                        power_layer(&lay, &prev, dd, k)
                    };
                    pw[k].push(layer);
                }
            }
            if !self.degree_allowed(d) {
                lay.push(vec![r.exact(r.zero()); d + 1]);
                continue;
            }
            // [F_{<d}(f(x), f(y))]_d
            let mut rhs = vec![r.exact(r.zero()); d + 1];
            for (e, l) in lay.iter().enumerate().skip(1) {
                for (i, a) in l.iter().enumerate() {
                    if a.prec >= cap && r.is_zero(&a.raw) {
                        continue;
                    }
                    let j = e - i;
                    for s in i..=d - j {
                        let fi = self.fpow_coeff(i, s);
                        let fj = self.fpow_coeff(j, d - s);
                        if r.is_zero(&fi) || r.is_zero(&fj) {
                            continue;
                        }
                        let t = r.el_mul(a, &r.exact(r.mul(&fi, &fj)));
                        rhs[s] = r.el_add(&rhs[s], &t);
                    }
                }
            }
            for (k, fk) in self.seed.iter().enumerate().skip(2) {
                if r.is_zero(fk) {
                    continue;
                }
                for (s, c) in pw[k][d].iter().enumerate() {
                    rhs[s] = r.el_sub(&rhs[s], &r.el_mul(c, &r.exact(*fk)));
                }
            }
            let unit = r.el_inv(&r.exact(r.sub(&r.one(), &r.pow(&r.pi(), d as u64 - 1))))?;
            let mut layer = Vec::with_capacity(d + 1);
            for (s, c) in rhs.iter().enumerate() {
                if s == 0 || s == d {
                    // F(x, 0) = x and F(0, y) = y.
                    layer.push(r.exact(r.zero()));
                    continue;
                }
                if s > d - s {
                    let mirror: OKElem = layer[d - s].clone();
                    layer.push(mirror);
                    continue;
                }
                let v = r.el_div_unif(c, 1).map_err(|e| match e {
                    ForgeError::NotDivisible { .. } => {
                        ForgeError::DivisibilityViolation(format!("law coefficient at degree {d} is not divisible by pi"))
                    }
                    other => other,
                })?;
                layer.push(r.el_mul(&v, &unit));
            }
            lay.push(layer);
        }
        Ok(BiSeries {
            prec: lay.iter().map(|l| l.iter().map(|e| e.prec).collect()).collect(),
            layers: lay.into_iter().map(|l| l.into_iter().map(|e| e.raw).collect()).collect(),
        })
    }

    fn build_log(&mut self) -> Result<()> {
        let r = self.ring.clone();
        let n = self.n;
        let cap = r.cap();
        // pi D(f(x)) = f'(x) D(x) with D(0) = 1 determines D = dF/dy(x, 0).
        let mut fdp: Vec<(usize, Ok)> = vec![];
        for (i, c) in self.seed.iter().enumerate().skip(2) {
            let t = r.mul(&r.int(i as i64), c);
            if !r.is_zero(&t) {
                fdp.push((i - 1, r.exact_div_pi(&t, 1)?));
            }
        }
        let mut d: Vec<Ok> = vec![r.zero(); n];
        d[0] = r.one();
        for m in 1..n {
            if !self.degree_allowed(m + 1) {
                continue;
            }
            let mut acc = r.zero();
            for (k, dk) in d.iter().enumerate().take(m) {
                if !r.is_zero(dk) {
                    r.mul_add_assign(&mut acc, dk, &self.fpow_coeff(k, m));
                }
            }
            for (i, c) in &fdp {
                if *i <= m {
                    let t = r.mul(c, &d[m - i]);
                    acc = r.sub(&acc, &t);
                }
            }
            let unit = r.inv_unit(&r.sub(&r.one(), &r.pow(&r.pi(), m as u64))).unwrap();
            d[m] = r.mul(&acc, &unit);
        }
        let dser = PSeries { c: d, prec: vec![cap; n], tail: 0 };
        let log_deriv = r.s_inv(&dser)?;
        // L(x) = log(pi x) / pi has coefficients (log')_{n-1} pi^{n-1} / n.
        let p = r.p();
        let mut lt = r.s_zero(n);
        for m in 1..n {
            let (mut v, mut np) = (0u32, m as u64);
            while np % p == 0 {
                np /= p;
                v += 1;
            }
            let e = (m - 1) as u32 - v;
            let ninv = r.inv_unit(&r.int(np as i64)).unwrap();
            let mut c = r.mul(&log_deriv.c[m - 1], &ninv);
            // 1/n = u^v / (pi^v n').
            c = r.mul(&c, &r.pow(&r.int(r.config().pi_unit), v as u64));
            c = r.mul(&c, &r.pow(&r.pi(), e as u64));
            lt.c[m] = c;
            lt.prec[m] = (log_deriv.prec[m - 1] + e).min(cap);
        }
        // Discarded coefficients have valuation >= m - 1 - floor(log_p m).
        lt.tail = ltilde_bound(n, p).min(cap);
        let mut et = r.s_comp_inverse(&lt)?;
        et.tail = etilde_bound(n, r.q()).min(cap);
        self.dser = dser;
        self.log_deriv = log_deriv;
        self.ltilde = lt;
        self.etilde = et;
        Ok(())
    }

    /// `D(x) = dF/dy(x, 0)`; its inverse is the derivative of the logarithm.
    pub fn d_series(&self) -> &PSeries<Ok> {
        &self.dser
    }
    pub fn log_deriv(&self) -> &PSeries<Ok> {
        &self.log_deriv
    }
    /// The integral series `log(pi x) / pi`.
    pub fn ltilde(&self) -> &PSeries<Ok> {
        &self.ltilde
    }
    /// Compositional inverse of [`Self::ltilde`]: `exp(pi x) = pi E(x)`.
    pub fn etilde(&self) -> &PSeries<Ok> {
        &self.etilde
    }

    /// `log_F` with coefficients `num_n / pi^{den_n}`.
    pub fn log_kseries(&self) -> KSeries {
        let r = &self.ring;
        let p = r.p();
        let mut num = r.s_zero(self.n);
        let mut den = vec![0u32; self.n];
        for m in 1..self.n {
            let (mut v, mut np) = (0u32, m as u64);
            while np % p == 0 {
                np /= p;
                v += 1;
            }
            let ninv = r.inv_unit(&r.int(np as i64)).unwrap();
            let c = r.mul(&self.log_deriv.c[m - 1], &ninv);
            num.c[m] = r.mul(&c, &r.pow(&r.int(r.config().pi_unit), v as u64));
            num.prec[m] = self.log_deriv.prec[m - 1];
            den[m] = v;
        }
        num.tail = 0;
        KSeries { num, den }
    }

    /// `exp_F` with coefficients `E_n / pi^{n-1}`, reduced where possible.
    pub fn exp_kseries(&self) -> KSeries {
        let r = &self.ring;
        let mut num = r.s_zero(self.n);
        let mut den = vec![0u32; self.n];
        for m in 1..self.n {
            let c = self.etilde.coeff(m);
            let k = r.vcap(&c).min((m - 1) as u32);
            num.c[m] = r.div_unif(&c.raw, k);
            num.prec[m] = c.prec - k;
            den[m] = (m - 1) as u32 - k;
        }
        num.tail = 0;
        KSeries { num, den }
    }

    /// `log_F(h)` for `h` divisible by pi.
    pub fn log_of(&self, h: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let r = &self.ring;
        let g = r.s_div_unif(h, 1)?;
        let l = self.ltilde_for(h.len());
        let out = r.s_compose(&l, &g)?;
        Ok(r.s_scale(&out, &r.el(r.pi())))
    }

    /// `exp_F(h)` for `h` divisible by pi.
    pub fn exp_of(&self, h: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let r = &self.ring;
        let g = r.s_div_unif(h, 1)?;
        let e = self.etilde_for(h.len());
        let out = r.s_compose(&e, &g)?;
        Ok(r.s_scale(&out, &r.el(r.pi())))
    }

    fn ltilde_for(&self, n: usize) -> PSeries<Ok> {
        if n <= self.n {
            self.ring.s_resize(&self.ltilde, n)
        } else {
            self.ltilde.clone()
        }
    }
    fn etilde_for(&self, n: usize) -> PSeries<Ok> {
        if n <= self.n {
            self.ring.s_resize(&self.etilde, n)
        } else {
            self.etilde.clone()
        }
    }

    /// `log_F` evaluated at an element divisible by pi of a ring over O_K.
    pub fn log_value<S: Ring>(&self, s: &S, x: &Elem<S::E>) -> Result<Elem<S::E>> {
        let pi = s.embed(&self.ring.pi());
        let y = s.el_div(x, &s.exact(pi.clone()))?;
        let l = s.s_embed(&self.ltilde);
        Ok(s.el_mul(&s.s_eval(&l, &y), &s.exact(pi)))
    }

    /// `exp_F` evaluated at an element divisible by pi.
    pub fn exp_value<S: Ring>(&self, s: &S, x: &Elem<S::E>) -> Result<Elem<S::E>> {
        let pi = s.embed(&self.ring.pi());
        let y = s.el_div(x, &s.exact(pi.clone()))?;
        let e = s.s_embed(&self.etilde);
        let mut v = s.s_eval(&e, &y);
        if s.vcap(&y) == 0 {
            v.prec = v.prec.min(e.tail);
        }
        Ok(s.el_mul(&v, &s.exact(pi)))
    }

    /// The endomorphism `[a]`, truncated at degree `n`.
    pub fn endo(&self, a: &OKElem) -> Result<PSeries<Ok>> {
        let r = &self.ring;
        let key = (r.canonical(&a.raw), a.prec);
        if let Some(s) = self.endo_cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = self.endo_uncached(a)?;
        self.endo_cache.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    fn endo_uncached(&self, a: &OKElem) -> Result<PSeries<Ok>> {
        let r = &self.ring;
        let n = self.n;
        if a.prec >= r.cap() && self.symmetric {
            // a = zeta pi^k with zeta a root of unity gives
            // [a] = zeta f o ... o f.
            let k = r.val(&a.raw);
            if k >= r.cap() {
                return Ok(r.s_zero(n));
            }
            if let Ok(zeta) = r.exact_div_pi(&a.raw, k) {
                if r.pow(&zeta, r.q()) == zeta {
                    let f = self.f_series(n);
                    let mut acc = r.s_x(n);
                    for _ in 0..k {
                        acc = r.s_compose(&acc, &f)?;
                    }
                    return Ok(r.s_scale(&acc, &r.el(zeta)));
                }
            }
        }
        self.intertwine(&self.seed, a, n)
    }

    /// The unique series `b = a x + ...` with `g(b) = b(f)`, where `f` is this
    /// group's seed. For `g = f` this is `[a]`.
    pub fn intertwine(&self, g: &[Ok], a: &OKElem, n: usize) -> Result<PSeries<Ok>> {
        let r = &self.ring;
        let cap = r.cap();
        if n > self.fpow.len() {
            return Err(ForgeError::Precondition("truncation exceeds the group's power table".into()));
        }
        let sym = self.symmetric && is_symmetric(r, g);
        let m = self.q() as usize - 1;
        let maxk = g.len() - 1;
        let zero = r.exact(r.zero());
        let mut b: Vec<OKElem> = vec![zero.clone(); n];
        if n > 1 {
            b[1] = a.clone();
        }
        // pw[k][j] = [b^k]_j, filled online.
        let mut pw: Vec<Vec<OKElem>> = vec![vec![zero.clone(); n]; maxk + 1];
        let mut nz_b: Vec<usize> = vec![];
        let mut nz_pw: Vec<Vec<usize>> = vec![vec![]; maxk + 1];
        let is_nz = |e: &OKElem| e.prec < cap || !r.is_zero(&e.raw);
        if n > 1 && is_nz(&b[1]) {
            nz_b.push(1);
        }
        for t in 2..n {
            // Powers at degree t need b below degree t.
            for k in 2..=maxk {
                let mut acc = zero.clone();
                let prev_nz: &Vec<usize> = if k == 2 { &nz_b } else { &nz_pw[k - 1] };
                for &j in prev_nz {
                    if j >= t {
                        break;
                    }
                    let bj = &b[t - j];
                    if !is_nz(bj) {
                        continue;
                    }
                    let pj = if k == 2 { &b[j] } else { &pw[k - 1][j] };
                    acc = r.el_add(&acc, &r.el_mul(pj, bj));
                }
                if is_nz(&acc) {
                    nz_pw[k].push(t);
                }
                pw[k][t] = acc;
            }
            if sym && t % m != 1 % m {
                continue;
            }
            let mut rhs = zero.clone();
            for &k in &nz_b {
                let c = self.fpow_coeff(k, t);
                if !r.is_zero(&c) {
                    rhs = r.el_add(&rhs, &r.el_mul(&b[k], &r.exact(c)));
                }
            }
            for (k, gk) in g.iter().enumerate().skip(2) {
                if !r.is_zero(gk) {
                    rhs = r.el_sub(&rhs, &r.el_mul(&pw[k][t], &r.exact(*gk)));
                }
            }
            let unit = r.el_inv(&r.exact(r.sub(&r.one(), &r.pow(&r.pi(), t as u64 - 1))))?;
            let v = r.el_div_unif(&rhs, 1).map_err(|e| match e {
                ForgeError::NotDivisible { .. } => {
                    ForgeError::DivisibilityViolation(format!("endomorphism coefficient {t} is not divisible by pi"))
                }
                other => other,
            })?;
            b[t] = r.el_mul(&v, &unit);
            if is_nz(&b[t]) {
                nz_b.push(t);
            }
        }
        Ok(PSeries { c: b.iter().map(|e| e.raw).collect(), prec: b.iter().map(|e| e.prec).collect(), tail: 0 })
    }

    /// Formal-group sum of two series.
    pub fn add(&self, a: &PSeries<Ok>, b: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        self.ring.bi_substitute(&self.law, a, b)
    }
    /// Formal-group difference `a - b`.
    pub fn sub(&self, a: &PSeries<Ok>, b: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let neg = self.endo(&self.ring.el_int(-1))?;
        let nb = self.ring.s_compose(&self.ring.s_resize(&neg, b.len()), b)?;
        self.add(a, &nb)
    }
    /// `[a](h)`.
    pub fn apply_endo(&self, a: &OKElem, h: &PSeries<Ok>) -> Result<PSeries<Ok>> {
        let e = self.endo(a)?;
        self.ring.s_compose(&self.ring.s_resize(&e, h.len().max(2)), h)
    }

    /// `lambda` with `(f - [lambda])'(0) = 0`: the linear coefficient of `log_F o f`.
    pub fn lambda_of(&self, f: &PSeries<Ok>) -> Result<OKElem> {
        let r = &self.ring;
        if f.len() < 2 {
            return Err(ForgeError::exhausted("series too short for a linear term"));
        }
        let f0 = f.coeff(0);
        if r.vcap(&f0) < 1 {
            return Err(ForgeError::Precondition("constant term is not divisible by pi".into()));
        }
        let dval = r.s_eval(&self.dser, &f0);
        let inv = r.el_inv(&dval)?;
        Ok(r.el_mul(&f.coeff(1), &inv))
    }

    pub fn to_json(&self) -> Value {
        let r = &self.ring;
        json!({
            "seed": self.seed.iter().map(|c| r.to_json(c)).collect::<Vec<_>>(),
            "N": self.n,
            "law_degree": self.nf,
            "law": self.law.layers.iter().enumerate().map(|(d, l)| json!({
                "degree": d,
                "coeffs": l.iter().map(|c| r.to_json(c)).collect::<Vec<_>>(),
                "prec": self.law.prec[d],
            })).collect::<Vec<_>>(),
            "log": self.log_kseries().to_json(r),
            "exp": self.exp_kseries().to_json(r),
        })
    }
}

/// Lower bound for the valuation of coefficient `m >= n` of `log(pi x)/pi`.
pub fn ltilde_bound(n: usize, p: u64) -> u32 {
    // m - 1 - floor(log_p m) is nondecreasing in m.
    let mut lg = 0u32;
    let mut t = n as u64;
    while t >= p {
        t /= p;
        lg += 1;
    }
    (n as u32 - 1).saturating_sub(lg)
}

/// Lower bound for the valuation of coefficient `m >= n` of `exp(pi x)/pi`:
/// `(m - 1)(q - 2)/(q - 1)`.
pub fn etilde_bound(n: usize, q: u64) -> u32 {
    if q <= 2 {
        return 0;
    }
    (((n as u64 - 1) * (q - 2)) / (q - 1)) as u32
}
