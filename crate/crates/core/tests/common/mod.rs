//! Independent oracles: plain high-precision `Float` arithmetic, no interval
//! or ball code from the crate.
#![allow(dead_code)]

use feigen_core::{Disc, FunctionBall, Interval, Rectangle, RoundingContext};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rug::Float;

pub const ORACLE: u32 = 1024;
pub const CTX_BITS: u32 = 64;

pub fn of(x: f64) -> Float {
    Float::with_val(ORACLE, x)
}

/// `a + s (b - a)` for `s` in `[0, 1]`, exact at oracle precision.
pub fn lerp(a: &Float, b: &Float, s: f64) -> Float {
    let d = Float::with_val(ORACLE, b - a);
    let r = Float::with_val(ORACLE, a + Float::with_val(ORACLE, &d * s));
    // guard against rounding past an endpoint
    if r < *a {
        a.clone()
    } else if r > *b {
        b.clone()
    } else {
        r
    }
}

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(Float::with_val(CTX_BITS, lo), Float::with_val(CTX_BITS, hi))
}

fn endpoint() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1.0e3..1.0e3f64,
        4 => -2.0..2.0f64,
        1 => Just(0.0),
        1 => -1.0e-8..1.0e-8f64,
    ]
}

pub fn interval_strategy() -> impl Strategy<Value = (f64, f64)> {
    (endpoint(), endpoint()).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

pub fn fractions() -> impl Strategy<Value = [f64; 4]> {
    [0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64]
}

fn contains(i: &Interval, x: &Float) -> bool {
    i.lo() <= x && x <= i.hi()
}

fn sub_interval(lo: f64, hi: f64, s: f64, t: f64) -> Interval {
    let (a, b) = if s <= t { (s, t) } else { (t, s) };
    let l = lo + a * (hi - lo);
    let h = lo + b * (hi - lo);
    let l = l.clamp(lo, hi);
    let h = h.clamp(l, hi);
    iv(l, h)
}

macro_rules! check {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($fmt)*)));
        }
    };
}

/// Containment of sampled members and isotonicity for the interval and
/// rectangle operations.
pub fn interval_case(a: (f64, f64), b: (f64, f64), s: [f64; 4]) -> Result<(), TestCaseError> {
    let x_iv = iv(a.0, a.1);
    let y_iv = iv(b.0, b.1);
    let x = lerp(&of(a.0), &of(a.1), s[0]);
    let y = lerp(&of(b.0), &of(b.1), s[1]);
    let p = ORACLE;

    check!(contains(&x_iv.add(&y_iv), &Float::with_val(p, &x + &y)), "add");
    check!(contains(&x_iv.sub(&y_iv), &Float::with_val(p, &x - &y)), "sub");
    check!(contains(&x_iv.mul(&y_iv), &Float::with_val(p, &x * &y)), "mul");
    check!(contains(&x_iv.sqr(), &Float::with_val(p, x.square_ref())), "sqr");
    check!(contains(&x_iv.abs(), &Float::with_val(p, x.abs_ref())), "abs");
    check!(contains(&x_iv.powi(3), &Float::with_val(p, rug::ops::Pow::pow(&x, 3u32))), "powi");
    match y_iv.div(&x_iv) {
        Ok(q) => {
            check!(!x_iv.contains_zero(), "division accepted a zero denominator");
            check!(contains(&q, &Float::with_val(p, &y / &x)), "div");
        }
        Err(_) => check!(x_iv.contains_zero(), "division refused a nonzero denominator"),
    }
    if let Ok(r) = x_iv.sqrt() {
        check!(contains(&r, &Float::with_val(p, x.sqrt_ref())), "sqrt");
    }

    // isotonicity
    let xs = sub_interval(a.0, a.1, s[2], s[3]);
    let ys = sub_interval(b.0, b.1, s[3], s[0]);
    let inc = |small: &Interval, big: &Interval| big.contains_interval(small);
    check!(inc(&xs.add(&ys), &x_iv.add(&y_iv)), "add isotone");
    check!(inc(&xs.sub(&ys), &x_iv.sub(&y_iv)), "sub isotone");
    check!(inc(&xs.mul(&ys), &x_iv.mul(&y_iv)), "mul isotone");
    check!(inc(&xs.sqr(), &x_iv.sqr()), "sqr isotone");
    if let (Ok(q), Ok(qs)) = (y_iv.div(&x_iv), ys.div(&xs)) {
        check!(inc(&qs, &q), "div isotone");
    }

    // rectangles z = x + i y, w = y - i x
    let z = Rectangle::new(x_iv.clone(), y_iv.clone());
    let w = Rectangle::new(y_iv.clone(), x_iv.neg());
    let (zr, zi) = (x.clone(), y.clone());
    let (wr, wi) = (y.clone(), Float::with_val(p, -&x));
    let pr = Float::with_val(p, &zr * &wr) - Float::with_val(p, &zi * &wi);
    let pi = Float::with_val(p, &zr * &wi) + Float::with_val(p, &zi * &wr);
    let prod = z.mul(&w);
    check!(contains(&prod.re, &pr) && contains(&prod.im, &pi), "rectangle mul");
    let sq = z.sqr();
    let sr = Float::with_val(p, zr.square_ref()) - Float::with_val(p, zi.square_ref());
    let si = Float::with_val(p, &zr * &zi) * 2u32;
    check!(contains(&sq.re, &sr) && contains(&sq.im, &si), "rectangle sqr");
    let shifted = w.add(&Rectangle::real(iv(3.0, 3.5)));
    if let Ok(q) = z.div(&shifted) {
        let (cr, ci) = (Float::with_val(p, &wr + lerp(&of(3.0), &of(3.5), s[2])), wi.clone());
        let _ = &ci;
        let den = Float::with_val(p, cr.square_ref()) + Float::with_val(p, ci.square_ref());
        let nr = Float::with_val(p, &zr * &cr) + Float::with_val(p, &zi * &ci);
        let ni = Float::with_val(p, &zi * &cr) - Float::with_val(p, &zr * &ci);
        check!(
            contains(&q.re, &Float::with_val(p, &nr / &den)) && contains(&q.im, &Float::with_val(p, &ni / &den)),
            "rectangle div"
        );
    }
    Ok(())
}

pub fn run_interval_suite(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(interval_strategy(), interval_strategy(), fractions()), |(a, b, s)| {
            interval_case(a, b, s)
        })
        .map_err(|e| e.to_string())
}

/// Random ball plus the random numbers needed to pick one member.
#[derive(Debug, Clone)]
pub struct BallSpec {
    pub mids: Vec<f64>,
    pub width: f64,
    pub tail: f64,
    pub error: f64,
    pub pick: Vec<f64>,
    pub tail_pick: Vec<f64>,
    pub err_pick: Vec<f64>,
}

pub fn ball_spec(n: usize, scale: f64) -> impl Strategy<Value = BallSpec> {
    (
        proptest::collection::vec(-1.0..1.0f64, n + 1),
        prop_oneof![Just(0.0), 0.0..1e-3f64],
        prop_oneof![Just(0.0), 0.0..1e-2f64],
        prop_oneof![Just(0.0), 0.0..1e-2f64],
        proptest::collection::vec(0.0..=1.0f64, n + 1),
        proptest::collection::vec(-1.0..=1.0f64, 4),
        proptest::collection::vec(-1.0..=1.0f64, n + 5),
    )
        .prop_map(move |(mids, width, tail, error, pick, tail_pick, err_pick)| BallSpec {
            mids: mids.iter().map(|m| m * scale).collect(),
            width,
            tail: tail * scale,
            error: error * scale,
            pick,
            tail_pick,
            err_pick,
        })
}

pub fn setup() -> (Disc, RoundingContext) {
    (Disc::standard(CTX_BITS), RoundingContext::new(CTX_BITS))
}

impl BallSpec {
    pub fn ball(&self, disc: &Disc, ctx: RoundingContext) -> FunctionBall {
        let n = self.mids.len() - 1;
        let coeffs = self
            .mids
            .iter()
            .map(|m| Rectangle::real(iv(m - self.width, m + self.width)))
            .collect();
        FunctionBall::from_coeffs(disc, n, ctx, coeffs)
            .with_tail_error(Float::with_val(CTX_BITS, self.tail), Float::with_val(CTX_BITS, self.error))
    }

    /// Coefficients (in the scaled basis) of one member, degrees `0..=N+4`.
    pub fn member(&self) -> Vec<Float> {
        let n = self.mids.len() - 1;
        let mut c: Vec<Float> = (0..n + 5).map(|_| Float::new(ORACLE)).collect();
        for k in 0..=n {
            let lo = of(self.mids[k] - self.width);
            let hi = of(self.mids[k] + self.width);
            // recompute endpoints as the crate stores them: the f64 sums are exact inputs
            c[k] = lerp(&lo, &hi, self.pick[k]);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
        let tn = norm(&self.tail_pick);
        for (j, t) in self.tail_pick.iter().enumerate() {
            c[n + 1 + j] += of(*t) * of(self.tail * 0.999 / tn);
        }
        let en = norm(&self.err_pick);
        for (j, e) in self.err_pick.iter().enumerate() {
            c[j] += of(*e) * of(self.error * 0.999 / en);
        }
        c
    }
}

/// `sum c_k ((z - c) / r)^k` at oracle precision.
pub fn eval_member(disc: &Disc, c: &[Float], z: &Float) -> Float {
    let t = Float::with_val(ORACLE, z - disc.center()) / disc.radius();
    let mut acc = Float::new(ORACLE);
    for ck in c.iter().rev() {
        acc = Float::with_val(ORACLE, &acc * &t) + ck;
    }
    acc
}

pub fn eval_member_derivative(disc: &Disc, c: &[Float], z: &Float) -> Float {
    let t = Float::with_val(ORACLE, z - disc.center()) / disc.radius();
    let mut acc = Float::new(ORACLE);
    for (k, ck) in c.iter().enumerate().skip(1).rev() {
        acc = Float::with_val(ORACLE, &acc * &t) + Float::with_val(ORACLE, ck * k as u32);
    }
    acc / disc.radius()
}

fn ball_contains_at(f: &FunctionBall, z: &Float, v: &Float) -> Result<bool, String> {
    let zr = Rectangle::real(Interval::point(Float::with_val(CTX_BITS.max(z.prec()), z)));
    let e = f.eval(&zr).map_err(|e| e.to_string())?;
    Ok(contains(&e.re, v) && e.im.contains_zero())
}

/// Sampling oracle for `mul`, `compose`, `compose_derivative` and `eval`:
/// one member of each input ball, evaluated directly at points of the real slice.
pub fn ball_case(n: usize, f: BallSpec, g: BallSpec, pts: [f64; 4]) -> Result<(), TestCaseError> {
    let (disc, ctx) = setup();
    let fb = f.ball(&disc, ctx);
    let gb = g.ball(&disc, ctx);
    let fm = f.member();
    let gm = g.member();
    let _ = n;
    // inner function h = c + r q with ||q|| < 1 built from g's member
    let hb = {
        let q = gb.scale_real(&ctx.f64(0.9 / (1.0 + gb.norm_upper().to_f64())));
        q.scale_real(&ctx.float(disc.radius())).add_constant(&ctx.float(disc.center()))
    };
    let hscale = 0.9 / (1.0 + gb.norm_upper().to_f64());
    let hm: Vec<Float> = gm
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let mut v = Float::with_val(ORACLE, c * of(hscale)) * disc.radius();
            if k == 0 {
                v += disc.center();
            }
            v
        })
        .collect();
    let prod = fb.mul(&gb).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let comp = fb.compose(&hb).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let dcomp = fb.compose_derivative(&hb).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let table = feigen_core::ball::PowerTable::new(&hb, "h").map_err(|e| TestCaseError::fail(e.to_string()))?;
    let tcomp = table.compose(&fb).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let tdcomp = table.compose_derivative(&fb).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for s in pts {
        let z = of(-1.5 + 5.0 * (0.02 + 0.96 * s));
        let fz = eval_member(&disc, &fm, &z);
        let gz = eval_member(&disc, &gm, &z);
        let hz = eval_member(&disc, &hm, &z);
        let fhz = eval_member(&disc, &fm, &hz);
        let dfhz = eval_member_derivative(&disc, &fm, &hz);
        let ok = |b: &FunctionBall, v: &Float, what: &str| -> Result<(), TestCaseError> {
            match ball_contains_at(b, &z, v) {
                Ok(true) => Ok(()),
                Ok(false) => Err(TestCaseError::fail(format!("{what} misses member at z = {z}"))),
                Err(e) => Err(TestCaseError::fail(format!("{what}: {e}"))),
            }
        };
        ok(&fb, &fz, "eval")?;
        ok(&prod, &Float::with_val(ORACLE, &fz * &gz), "mul")?;
        ok(&comp, &fhz, "compose")?;
        ok(&tcomp, &fhz, "power-table compose")?;
        ok(&dcomp, &dfhz, "compose_derivative")?;
        ok(&tdcomp, &dfhz, "power-table compose_derivative")?;
    }
    Ok(())
}

pub fn run_ball_suite(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let strat = (2usize..=6).prop_flat_map(|n| {
        (
            Just(n),
            ball_spec(n, 1.0),
            ball_spec(n, 1.0),
            [0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64],
        )
    });
    runner
        .run(&strat, |(n, f, g, pts)| ball_case(n, f, g, pts))
        .map_err(|e| e.to_string())
}

fn mid_l1(f: &FunctionBall) -> f64 {
    f.midpoints().iter().map(|m| m.to_f64().abs()).sum()
}

/// `||(T(G + t dG) - T(G)) / t - DT(G) dG|| / ||DT(G) dG||` for
/// `t = 1e-3 .. 1e-6`, on midpoints of point balls at the shipped seed.
pub fn fd_relative_errors() -> Vec<f64> {
    use feigen_core::approx;
    use feigen_core::ops::{apply_dt, apply_t, precompute_shared};
    let p = 256;
    let disc = Disc::standard(p);
    let ctx = RoundingContext::new(p);
    let g0 = approx::default_seed(p);
    let n = g0.len() - 1;
    let g = FunctionBall::from_floats(&disc, n, ctx, &g0);
    let dir: Vec<Float> = (0..=n)
        .map(|k| Float::with_val(p, 0.3 * (-0.6f64).powi(k as i32) + if k == 0 { 0.2 } else { 0.0 }))
        .collect();
    let dg = FunctionBall::from_floats(&disc, n, ctx, &dir);
    let s = precompute_shared(&g).unwrap();
    let lin = apply_dt(&s, &dg).unwrap();
    let t0 = apply_t(&g).unwrap();
    let scale = mid_l1(&lin);
    (3..=6)
        .map(|e| {
            let t = 10f64.powi(-e);
            let shifted: Vec<Float> = g0
                .iter()
                .zip(&dir)
                .map(|(a, b)| Float::with_val(p, a + Float::with_val(p, b * t)))
                .collect();
            let t1 = apply_t(&FunctionBall::from_floats(&disc, n, ctx, &shifted)).unwrap();
            t1.midpoints()
                .iter()
                .zip(t0.midpoints())
                .zip(lin.midpoints())
                .map(|((a, b), l)| {
                    let fd = Float::with_val(p, a - &b) / t;
                    Float::with_val(p, fd - l).to_f64().abs()
                })
                .sum::<f64>()
                / scale
        })
        .collect()
}
