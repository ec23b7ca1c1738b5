use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};
use forge_core::eigen::{CheckSummary, Eigen};
use forge_core::explicit;
use forge_core::gm_bridge;
use forge_core::interp::{self, Interp, ModuleTag};
use forge_core::lubin_tate::{parse_seed, FormalGroup};
use forge_core::pseries::{PSeries, SeriesCheck, SeriesOps};
use forge_core::suite::{self, Fixtures};
use forge_core::tower::{K0Elem, Tower};
use forge_core::{Elem, Ok, OkRing, Ring};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{bad_input, Env, Report};

/// A series given inline as a polynomial or as a JSON file.
#[derive(Args, Debug)]
pub struct SeriesInput {
    /// Polynomial such as "x + 3*x^2".
    #[arg(long, conflicts_with = "input", allow_hyphen_values = true)]
    pub poly: Option<String>,
    /// JSON series file with `coeffs` and optional `prec`/`minprec`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ColemanCmd {
    /// Apply the trace operator and check divisibility by pi.
    Trace(SeriesInput),
    /// The kernel generator h_n.
    Hn {
        #[arg(long)]
        n: usize,
    },
    /// Test membership in the kernel and expand in the generators h_n.
    CheckKernel(SeriesInput),
}

#[derive(Subcommand, Debug)]
pub enum InterpCmd {
    /// Solve phi(f) = g for g divisible by pi and by x^2.
    SolvePhi(SeriesInput),
    /// Random elements of C' through the interpolating series and back.
    Roundtrip {
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum EigenCmd {
    /// Eigenvector for q/pi starting from h_n.
    Build {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        max_steps: usize,
    },
    /// A trace-compatible pair whose valuations grow.
    Counterexample {
        #[arg(long, default_value_t = 2)]
        eps: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum GmCmd {
    /// Inject the unit attached to the isomorphism onto the group of `g`
    /// into the kernel of the trace operator.
    Inject {
        /// Polynomial congruent to x^q mod pi and to pi*x mod x^2.
        #[arg(long, allow_hyphen_values = true)]
        g: String,
        /// Override the exponent r of p^r.
        #[arg(long)]
        r: Option<u32>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ExplicitCmd {
    /// Product of i(x + v) over torsion v of the seed, against i(f(x)).
    CheckIsoProduct {
        /// Second seed polynomial, or a JSON file holding {"seed": "..."}.
        #[arg(long, allow_hyphen_values = true)]
        g: String,
        /// Length of series evaluated on the level-1 tower.
        #[arg(long)]
        tower_len: Option<usize>,
    },
    /// Product of r(x) + z over torsion z of `g`, against g(r(x)).
    TorsionProduct {
        #[arg(long, allow_hyphen_values = true)]
        g: String,
        #[arg(long, default_value = "x", allow_hyphen_values = true)]
        r: String,
    },
    /// Character idempotents of Z_p[(Z/p)^*].
    Idempotents {
        #[arg(long)]
        p: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum TowerCmd {
    /// Field trace and group-law trace of s(u_1) down to level 0.
    Trace(SeriesInput),
}

#[derive(Subcommand, Debug)]
pub enum SuiteCmd {
    /// Run the criteria attached to the selected profile.
    Acceptance {
        /// Run every criterion regardless of profile.
        #[arg(long)]
        all: bool,
    },
}

pub fn dispatch(env: &mut Env, cmd: &crate::Command) -> anyhow::Result<Report> {
    use crate::Command as C;
    match cmd {
        C::Coleman(c) => coleman(env, c),
        C::Interp(c) => interp_cmd(env, c),
        C::Eigen(c) => eigen(env, c),
        C::Gm(c) => gm(env, c),
        C::Explicit(c) => explicit_cmd(env, c),
        C::Tower(c) => tower(env, c),
        C::Suite(c) => suite_cmd(env, c),
    }
}

fn series_input(env: &mut Env, r: &OkRing, n: usize, inp: &SeriesInput) -> anyhow::Result<PSeries<Ok>> {
    match (&inp.poly, &inp.input) {
        (Some(p), None) => Ok(r.s_poly(&parse_seed(r, p)?, n)),
        (None, Some(path)) => {
            let v = env.read_json(path)?;
            let s = r.s_from_json(&v).map_err(|e| bad_input(e.to_string()))?;
            Ok(r.s_resize(&s, n))
        }
        _ => Err(bad_input("give exactly one of --poly or --input")),
    }
}

fn seed_arg(env: &mut Env, r: &OkRing, s: &str) -> anyhow::Result<Vec<Ok>> {
    if s.ends_with(".json") {
        let v = env.read_json(&PathBuf::from(s))?;
        let text = v.get("seed").and_then(Value::as_str).ok_or_else(|| bad_input(format!("{s}: missing \"seed\"")))?;
        return Ok(parse_seed(r, text)?);
    }
    Ok(parse_seed(r, s)?)
}

fn check_json(c: &SeriesCheck) -> Value {
    json!({ "ok": c.ok(), "compared": c.eff_len, "min_prec": c.min_prec, "mismatch": c.mismatch })
}

fn summary_json(c: &CheckSummary) -> Value {
    json!({ "ok": c.ok, "prec": c.prec })
}

fn elem_json<R: Ring>(r: &R, e: &Elem<R::E>) -> Value {
    json!({ "coords": r.to_json(&e.raw), "prec": e.prec })
}

fn coleman(env: &mut Env, cmd: &ColemanCmd) -> anyhow::Result<Report> {
    let ctx = env.profile.coleman()?;
    let r = ctx.ring().clone();
    let n = ctx.n();
    Ok(match cmd {
        ColemanCmd::Trace(inp) => {
            let g = series_input(env, &r, n, inp)?;
            let t = ctx.trace_op(&g)?;
            let div = r.s_divisible(&t, 1);
            Report {
                verified: div,
                min_prec: Some(t.min_prec()),
                result: json!({ "trace": r.s_to_json(&t), "divisible_by_pi": div }),
            }
        }
        ColemanCmd::Hn { n: k } => {
            let h = ctx.h_n(*k)?;
            let chk = r.s_check_eq(&ctx.trace_op(&h)?, &r.s_zero(n));
            Report {
                verified: chk.ok(),
                min_prec: Some(h.min_prec()),
                result: json!({ "n": k, "h": r.s_to_json(&h), "kernel": check_json(&chk) }),
            }
        }
        ColemanCmd::CheckKernel(inp) => {
            let f = series_input(env, &r, n, inp)?;
            let chk = r.s_check_eq(&ctx.trace_op(&f)?, &r.s_zero(n));
            let coeffs = if chk.ok() {
                let a = ctx.kernel_expand(&f)?;
                Value::Array(a.iter().map(|e| elem_json(&r, e)).collect())
            } else {
                Value::Null
            };
            Report { verified: chk.ok(), min_prec: Some(chk.min_prec), result: json!({ "kernel": check_json(&chk), "coefficients": coeffs }) }
        }
    })
}

fn interp_cmd(env: &mut Env, cmd: &InterpCmd) -> anyhow::Result<Report> {
    let ctx = env.profile.coleman()?;
    let r = ctx.ring().clone();
    let n = ctx.n();
    Ok(match cmd {
        InterpCmd::SolvePhi(inp) => {
            let g = series_input(env, &r, n, inp)?;
            let f = interp::solve_phi(ctx.group(), &g)?;
            let chk = r.s_check_eq(&interp::phi(ctx.group(), &f)?, &g);
            Report {
                verified: chk.ok(),
                min_prec: Some(f.min_prec()),
                result: json!({ "f": r.s_to_json(&f), "phi_f_equals_g": check_json(&chk) }),
            }
        }
        InterpCmd::Roundtrip { samples } => {
            let it = Interp::new(&ctx);
            let mut rng = ChaCha8Rng::seed_from_u64(env.global.seed);
            let mut rows = vec![];
            let mut all = true;
            let mut minp = u32::MAX;
            for _ in 0..*samples {
                let c = suite::random_cprime(&ctx, &mut rng, 4)?;
                let f = it.cprime_to_a(&c)?;
                let m = it.check_membership(ModuleTag::A, &f)?;
                let back = r.s_check_eq(&it.a_to_cprime(&f)?, &c);
                all &= m.member && back.ok();
                minp = minp.min(m.check.min_prec).min(back.min_prec);
                rows.push(json!({
                    "member_of_A": m.member,
                    "residual": check_json(&m.check),
                    "round_trip": check_json(&back),
                }));
            }
            Report { verified: all, min_prec: Some(minp), result: json!({ "samples": rows, "all_zero": all }) }
        }
    })
}

fn eigen(env: &mut Env, cmd: &EigenCmd) -> anyhow::Result<Report> {
    let ctx = env.profile.coleman()?;
    let r = ctx.ring().clone();
    let e = Eigen::new(&ctx)?;
    if !e.pi3_divides_q() {
        return Err(forge_core::ForgeError::Pi3NotDividingQ.into());
    }
    Ok(match cmd {
        EigenCmd::Build { n, max_steps } => {
            let ev = e.build_eigenvector(&ctx.h_n(*n)?, *max_steps)?;
            Report {
                verified: ev.residual.ok(),
                min_prec: Some(ev.residual.min_prec),
                result: json!({
                    "f": r.s_to_json(&ev.f),
                    "steps": ev.steps,
                    "residual": check_json(&ev.residual),
                    "prefix_at": ev.prefix_at,
                }),
            }
        }
        EigenCmd::Counterexample { eps } => {
            let tower = Tower::new(ctx.group().clone(), 1)?;
            let ce = e.build_counterexample(&tower, *eps)?;
            let k1 = tower.k1()?;
            Report {
                verified: ce.trace.ok && ce.decay_ok,
                min_prec: Some(ce.trace.prec),
                result: json!({
                    "a0": elem_json(tower.k0(), &ce.a0),
                    "a1": elem_json(k1, &ce.a1),
                    "trace": summary_json(&ce.trace),
                    "valuation_a0": [ce.val_a0.0, ce.val_a0.1],
                    "valuation_a1": [ce.val_a1.0, ce.val_a1.1],
                    "decay": ce.decay_ok,
                }),
            }
        }
    })
}

fn gm(env: &mut Env, cmd: &GmCmd) -> anyhow::Result<Report> {
    let ctx = env.profile.coleman()?;
    let r = ctx.ring().clone();
    let GmCmd::Inject { g, r: rr } = cmd;
    let g = seed_arg(env, &r, g)?;
    let unit = explicit::unit_from_iso(ctx.group(), &g, ctx.n())?;
    let inj = gm_bridge::inject_to_kernel(&ctx, &unit, *rr)?;
    Ok(Report {
        verified: inj.ok(),
        min_prec: Some(inj.s.min_prec()),
        result: json!({
            "unit_minus_one": r.s_to_json(&unit),
            "s": r.s_to_json(&inj.s),
            "r": inj.r,
            "kernel": check_json(&inj.kernel),
            "p_divides_s": inj.p_divisible,
            "phi_norm_one": check_json(&inj.phi_norm),
            "log_identity": check_json(&inj.log_identity),
        }),
    })
}

fn explicit_cmd(env: &mut Env, cmd: &ExplicitCmd) -> anyhow::Result<Report> {
    Ok(match cmd {
        ExplicitCmd::CheckIsoProduct { g, tower_len } => {
            let ctx = env.profile.coleman()?;
            let r = ctx.ring().clone();
            let g = seed_arg(env, &r, g)?;
            let sys = explicit::norm_system_check(&ctx, &g, ctx.n(), *tower_len)?;
            Report { verified: sys.ok(), min_prec: Some(sys.product.prec), result: serde_json::to_value(&sys)? }
        }
        ExplicitCmd::TorsionProduct { g, r: rs } => {
            let ring = env.profile.ring()?;
            let n = env.profile.n;
            let g = seed_arg(env, &ring, g)?;
            let grp = Arc::new(FormalGroup::new(ring.clone(), g, n, env.profile.nf)?);
            let rser = ring.s_poly(&parse_seed(&ring, rs)?, n);
            let chk = explicit::torsion_product_check(grp, &rser)?;
            Report {
                verified: chk.check.ok,
                min_prec: Some(chk.lhs.min_prec()),
                result: json!({ "product": ring.s_to_json(&chk.lhs), "expected": ring.s_to_json(&chk.rhs), "check": summary_json(&chk.check) }),
            }
        }
        ExplicitCmd::Idempotents { p } => {
            let rep = explicit::idempotent_report(*p, env.profile.config.prec)?;
            Report { verified: rep.ok(), min_prec: Some(env.profile.config.prec), result: serde_json::to_value(&rep)? }
        }
    })
}

fn tower(env: &mut Env, cmd: &TowerCmd) -> anyhow::Result<Report> {
    let grp = env.profile.group()?;
    let r = grp.ring().clone();
    let TowerCmd::Trace(inp) = cmd;
    let s = series_input(env, &r, grp.n(), inp)?;
    let t = Tower::new(grp, 1)?;
    let k0 = t.k0();
    let tr: K0Elem = t.trace1_of_series(&s)?;
    let lt = t.lt_trace1(&t.eval1(&s)?)?;
    Ok(Report {
        verified: true,
        min_prec: Some(tr.prec.min(lt.prec)),
        result: json!({ "trace": elem_json(k0, &tr), "lt_trace": elem_json(k0, &lt), "value_at_u0": elem_json(k0, &t.eval0(&s)) }),
    })
}

fn suite_cmd(env: &mut Env, cmd: &SuiteCmd) -> anyhow::Result<Report> {
    let SuiteCmd::Acceptance { all } = cmd;
    let ids = suite::ids_for(if *all { "all" } else { &env.profile.name });
    if ids.is_empty() {
        return Err(bad_input(format!("no criteria for profile {}", env.profile.name)));
    }
    let fx = Fixtures::new();
    let outcomes: Vec<suite::Outcome> = ids.iter().map(|&id| suite::run(&fx, id)).collect();
    for o in &outcomes {
        eprintln!("{}", o.line());
    }
    Ok(Report { verified: outcomes.iter().all(|o| o.pass), min_prec: None, result: serde_json::to_value(&outcomes)? })
}
