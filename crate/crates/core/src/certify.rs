//! Newton-like operators `Phi(x) = x - Lambda F(x)` and their contraction
//! certificates.
//!
//! A certificate for radius `rho` bounds `epsilon >= ||Phi(x0) - x0||` and
//! `kappa >= ||DPhi(x)||` for every `x` in the closed ball of radius `rho`
//! about `x0`; `epsilon < rho (1 - kappa)` proves a unique zero of `F` there.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use rug::float::Round;
use rug::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approx::DenseMatrix;
use crate::ball::FunctionBall;
use crate::error::{Error, Result};
use crate::ops::{apply_dt, apply_l, precompute_shared, t_from_shared, SharedEvaluations};
use crate::rounded::{down, float_to_hex, up, Interval, Rectangle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    FixedPoint,
    DeltaEigen,
    GammaEigen,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::FixedPoint => "fixed_point",
            ProblemKind::DeltaEigen => "delta_eigen",
            ProblemKind::GammaEigen => "gamma_eigen",
        }
    }
}

/// Exact matrix acting on coefficients `0..=N` plus a scalar acting on
/// everything above degree `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    n: usize,
    entries: Vec<Float>,
    tail: Float,
}

impl LinearMap {
    pub fn new(n: usize, entries: Vec<Float>, tail: Float) -> Self {
        assert_eq!(entries.len(), n * n);
        LinearMap { n, entries, tail }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut entries = vec![Float::new(prec); n * n];
        for i in 0..n {
            entries[i * n + i] = Float::with_val(prec, 1);
        }
        LinearMap::new(n, entries, Float::with_val(prec, 1))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Float {
        &self.entries[i * self.n + j]
    }

    pub fn tail_scalar(&self) -> &Float {
        &self.tail
    }

    fn prec(&self) -> u32 {
        self.tail.prec()
    }

    /// Upper bound of the operator norm: max of column sums and `|tail|`.
    pub fn opnorm_upper(&self) -> Float {
        let p = self.prec();
        let mut best = Float::with_val(p, self.tail.abs_ref());
        for j in 0..self.n {
            let mut s = Float::new(p);
            for i in 0..self.n {
                s = up(p, &s + &*self.entry(i, j).as_abs());
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    /// SHA-256 of the exact entries.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for e in self.entries.iter().chain(std::iter::once(&self.tail)) {
            h.update(float_to_hex(e).as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// SHA-256 of a ball's checkpoint text.
pub fn ball_checksum(f: &FunctionBall) -> String {
    hex::encode(Sha256::digest(f.to_text().as_bytes()))
}

/// `Lambda f`: the matrix on the coefficients, the tail scalar on the
/// high-order part and the full operator norm on the error part.
pub fn apply_lambda(l: &LinearMap, f: &FunctionBall) -> Result<FunctionBall> {
    let n1 = f.degree() + 1;
    if l.n != n1 {
        return Err(Error::DimensionMismatch {
            expected: l.n,
            got: n1,
        });
    }
    let ctx = f.ctx();
    let src = f.coeffs();
    let out: Vec<Rectangle> = (0..n1)
        .map(|i| {
            let mut acc = ctx.rect_zero();
            for (j, c) in src.iter().enumerate() {
                let e = l.entry(i, j);
                if e.is_zero() || c.is_zero() {
                    continue;
                }
                acc = acc.add(&c.mul_interval(&ctx.float(e)));
            }
            acc
        })
        .collect();
    let p = ctx.prec();
    let tail = up(p, f.tail() * &*l.tail.as_abs());
    let error = if f.error().is_zero() {
        Float::new(p)
    } else {
        up(p, f.error() * l.opnorm_upper())
    };
    Ok(FunctionBall::from_coeffs(f.disc(), f.degree(), ctx, out).with_tail_error(tail, error))
}

/// Certifies `||I - B M|| < 1` for a floating approximate inverse `B` of the
/// matrix block; returns that bound.
pub fn verify_lambda_invertible(l: &LinearMap) -> Result<Float> {
    let p = l.prec();
    if l.tail.is_zero() {
        return Err(Error::InversionUncertified {
            bound: "tail scalar is zero".into(),
        });
    }
    let n = l.n;
    let mut m = DenseMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, l.entry(i, j).clone());
        }
    }
    let b = m.inverse().map_err(|_| Error::InversionUncertified {
        bound: "inf".into(),
    })?;
    let cols: Vec<Float> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut s = Float::new(p);
            for i in 0..n {
                let mut lo = Float::with_val(p, if i == j { 1 } else { 0 });
                let mut hi = lo.clone();
                for k in 0..n {
                    let prod_lo = down(p, b.get(i, k) * l.entry(k, j));
                    let prod_hi = up(p, b.get(i, k) * l.entry(k, j));
                    lo = down(p, &lo - &prod_hi);
                    hi = up(p, &hi - &prod_lo);
                }
                let mag = if lo.clone().abs() > hi.clone().abs() { lo.abs() } else { hi.abs() };
                s = up(p, &s + &mag);
            }
            s
        })
        .collect();
    let bound = cols.into_iter().fold(Float::new(p), |a, b| if b > a { b } else { a });
    if bound < 1 {
        Ok(bound)
    } else {
        Err(Error::InversionUncertified {
            bound: bound.to_f64().to_string(),
        })
    }
}

/// One of the three zero-finding problems.
#[derive(Debug, Clone)]
pub enum Problem {
    /// `F(G) = T(G) - G`
    FixedPoint,
    /// `F(V) = DT(G) V - phi(V) V` with `G` over the parameter ball
    DeltaEigen(Box<SharedEvaluations>),
    /// `F(W) = L W - phi(W)^2 W` with `G` over the parameter ball
    GammaEigen(Box<SharedEvaluations>),
}

impl Problem {
    pub fn fixed_point() -> Self {
        Problem::FixedPoint
    }

    pub fn delta(parameter_ball: &FunctionBall) -> Result<Self> {
        Ok(Problem::DeltaEigen(Box::new(precompute_shared(parameter_ball)?)))
    }

    pub fn gamma(parameter_ball: &FunctionBall) -> Result<Self> {
        Ok(Problem::GammaEigen(Box::new(precompute_shared(parameter_ball)?)))
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            Problem::FixedPoint => ProblemKind::FixedPoint,
            Problem::DeltaEigen(_) => ProblemKind::DeltaEigen,
            Problem::GammaEigen(_) => ProblemKind::GammaEigen,
        }
    }

    /// `F(x)` enclosed over `x` and over the parameter ball.
    pub fn residual(&self, x: &FunctionBall) -> Result<FunctionBall> {
        match self {
            Problem::FixedPoint => t_from_shared(&precompute_shared(x)?).sub(x),
            Problem::DeltaEigen(s) => apply_dt(s, x)?.sub(&x.scale(&x.coeff(0)?)),
            Problem::GammaEigen(s) => apply_l(s, x)?.sub(&x.scale(&x.coeff(0)?.sqr())),
        }
    }

    fn shared<'a>(&'a self, own: &'a Option<SharedEvaluations>) -> &'a SharedEvaluations {
        match self {
            Problem::FixedPoint => own.as_ref().expect("fixed point shares over the ball"),
            Problem::DeltaEigen(s) | Problem::GammaEigen(s) => s,
        }
    }

    /// `DF(x) dx` enclosed over `x` in `ball`.
    fn directional(&self, s: &SharedEvaluations, ball: &FunctionBall, dx: &FunctionBall) -> Result<FunctionBall> {
        match self {
            Problem::FixedPoint => apply_dt(s, dx)?.sub(dx),
            Problem::DeltaEigen(_) => {
                let phi = ball.coeff(0)?;
                let dphi = dx.coeff(0)?;
                let mut r = apply_dt(s, dx)?.sub(&dx.scale(&phi))?;
                if !dphi.is_zero() {
                    r = r.sub(&ball.scale(&dphi))?;
                }
                Ok(r)
            }
            Problem::GammaEigen(_) => {
                let phi = ball.coeff(0)?;
                let dphi = dx.coeff(0)?;
                let mut r = apply_l(s, dx)?.sub(&dx.scale(&phi.sqr()))?;
                if !dphi.is_zero() {
                    let two = Rectangle::real(ball.ctx().int(2));
                    r = r.sub(&ball.scale(&phi.mul(&dphi).mul(&two)))?;
                }
                Ok(r)
            }
        }
    }

    /// `sup ||DPhi(x) f_H||` over unit `f_H` above degree `N`.
    fn tail_bound(&self, s: &SharedEvaluations, ball: &FunctionBall, l: &LinearMap) -> Result<Float> {
        let ctx = ball.ctx();
        let p = ctx.prec();
        let t = Rectangle::real(ctx.float(l.tail_scalar()));
        let one = Rectangle::real(ctx.one());
        // DF f_H = D f_H - sigma f_H with D f_H an arbitrary function
        let (sigma, image) = match self {
            Problem::FixedPoint => (one.clone(), s.dt_high_order_bound()),
            Problem::DeltaEigen(_) => (ball.coeff(0)?, s.dt_high_order_bound()),
            Problem::GammaEigen(_) => (ball.coeff(0)?.sqr(), s.l_high_order_bound()),
        };
        for (what, th) in [("G(a^2 X)", s.p1.theta()), ("G(Q(G(a^2 X)))", s.p2.theta())] {
            if !(*th < 1) {
                return Err(Error::TailContractFailure {
                    what: what.into(),
                    theta: th.to_f64().to_string(),
                });
            }
        }
        let diag = one.add(&t.mul(&sigma)).abs_upper();
        Ok(up(p, diag + up(p, image * l.opnorm_upper())))
    }
}

/// Upper bound of `||Lambda F(x0)||`.
pub fn bound_epsilon(p: &Problem, x0: &FunctionBall, l: &LinearMap) -> Result<Float> {
    Ok(apply_lambda(l, &p.residual(x0)?)?.norm_upper())
}

fn own_shared(p: &Problem, ball: &FunctionBall) -> Result<Option<SharedEvaluations>> {
    Ok(match p {
        Problem::FixedPoint => Some(precompute_shared(ball)?),
        _ => None,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Upper bounds of `||DPhi(x) e_k||`, `k = 0..=N`, over the ball.
pub fn bound_kappa_columns(p: &Problem, ball: &FunctionBall, l: &LinearMap, workers: usize) -> Result<Vec<Float>> {
    let own = own_shared(p, ball)?;
    kappa_columns_with(p, p.shared(&own), ball, l, workers)
}

fn kappa_columns_with(
    p: &Problem,
    s: &SharedEvaluations,
    ball: &FunctionBall,
    l: &LinearMap,
    workers: usize,
) -> Result<Vec<Float>> {
    let n = ball.degree();
    let ctx = ball.ctx();
    let results: Vec<Result<Float>> = pool(workers)?.install(|| {
        (0..=n)
            .into_par_iter()
            .map(|k| {
                let e = FunctionBall::basis(ball.disc(), n, ctx, k);
                let df = p.directional(s, ball, &e)?;
                Ok(e.sub(&apply_lambda(l, &df)?)?.norm_upper())
            })
            .collect()
    });
    results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.map_err(|e| Error::ColumnFailure {
                column: k,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Upper bound of `||DPhi(x) f_H||` over unit high-order `f_H` and the ball.
pub fn bound_kappa_tail(p: &Problem, ball: &FunctionBall, l: &LinearMap) -> Result<Float> {
    let own = own_shared(p, ball)?;
    p.tail_bound(p.shared(&own), ball, l)
}

/// Certified constant enclosure.
#[derive(Debug, Clone, PartialEq)]
pub struct Enclosure {
    pub name: String,
    pub value: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertConfig {
    pub degree: usize,
    pub precision_bits: u32,
    pub boundary_rectangles: Option<usize>,
    pub workers: usize,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub kind: ProblemKind,
    pub rho: Float,
    pub epsilon: Float,
    pub kappa: Float,
    pub kappa_columns: Float,
    pub kappa_tail: Float,
    pub lambda_residual: Float,
    pub pass: bool,
    pub enclosures: Vec<Enclosure>,
    pub config: CertConfig,
    pub wall_time_s: f64,
    /// the ball `B(x0, rho)` on which the contraction was verified
    pub ball: FunctionBall,
    /// `epsilon / (1 - kappa)` rounded up; the zero lies within this distance of `x0`
    pub radius: Float,
    /// `B(x0, radius)`, used for the enclosures and as input to later stages
    pub zero_ball: FunctionBall,
}

/// Serialised form; every number is an exact hex endpoint string, enclosures
/// additionally carry decimal strings rounded outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub kind: ProblemKind,
    pub pass: bool,
    pub rho: String,
    pub epsilon: String,
    pub kappa: String,
    pub kappa_columns: String,
    pub kappa_tail: String,
    pub lambda_residual: String,
    pub radius: String,
    pub enclosures: BTreeMap<String, EnclosureJson>,
    pub config: CertConfig,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnclosureJson {
    pub lo: String,
    pub hi: String,
    pub lo_decimal: String,
    pub hi_decimal: String,
}

/// Decimal string of `x` with `digits` significant digits, rounded in `dir`.
pub fn decimal(x: &Float, digits: usize, dir: Round) -> String {
    x.to_string_radix_round(10, Some(digits), dir)
}

impl Certificate {
    pub fn enclosure(&self, name: &str) -> Option<&Interval> {
        self.enclosures.iter().find(|e| e.name == name).map(|e| &e.value)
    }

    pub fn to_json(&self) -> CertificateJson {
        let digits = ((self.rho.prec() as f64) / 3.33) as usize;
        CertificateJson {
            kind: self.kind,
            pass: self.pass,
            rho: float_to_hex(&self.rho),
            epsilon: float_to_hex(&self.epsilon),
            kappa: float_to_hex(&self.kappa),
            kappa_columns: float_to_hex(&self.kappa_columns),
            kappa_tail: float_to_hex(&self.kappa_tail),
            lambda_residual: float_to_hex(&self.lambda_residual),
            radius: float_to_hex(&self.radius),
            enclosures: self
                .enclosures
                .iter()
                .map(|e| {
                    (
                        e.name.clone(),
                        EnclosureJson {
                            lo: float_to_hex(e.value.lo()),
                            hi: float_to_hex(e.value.hi()),
                            lo_decimal: decimal(e.value.lo(), digits, Round::Down),
                            hi_decimal: decimal(e.value.hi(), digits, Round::Up),
                        },
                    )
                })
                .collect(),
            config: self.config.clone(),
            wall_time_s: self.wall_time_s,
        }
    }

    /// JSON with the run-dependent fields (wall time, worker count) removed.
    pub fn payload(&self) -> CertificateJson {
        let mut j = self.to_json();
        j.wall_time_s = 0.0;
        j.config.workers = 0;
        j
    }
}

/// Largest representable number not exceeding the decimal `s`.
pub fn parse_rho(s: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(s).map_err(|e| Error::Parse(format!("rho {s:?}: {e}")))?;
    let (r, _) = Float::with_val_round(prec, parsed, Round::Down);
    if !(r > 0) || !r.is_finite() {
        return Err(Error::InvalidConfig(format!("rho must be a positive number, got {s}")));
    }
    Ok(r)
}

fn enclosures(kind: ProblemKind, ball: &FunctionBall) -> Result<Vec<Enclosure>> {
    let one = Rectangle::real(ball.ctx().one());
    Ok(match kind {
        ProblemKind::FixedPoint => {
            let a = ball.eval(&one)?.re;
            let alpha = a.recip().map_err(|_| Error::NormalizationSingular)?;
            vec![
                Enclosure { name: "a".into(), value: a },
                Enclosure { name: "alpha".into(), value: alpha },
            ]
        }
        ProblemKind::DeltaEigen => vec![Enclosure {
            name: "delta".into(),
            value: ball.coeff(0)?.re,
        }],
        ProblemKind::GammaEigen => vec![Enclosure {
            name: "gamma".into(),
            value: ball.coeff(0)?.re,
        }],
    })
}

/// Runs the three bounds and checks `epsilon < rho (1 - kappa)`.
///
/// Returns `CertificationFailed` when the inequality cannot be verified.
pub fn certify(p: &Problem, x0: &FunctionBall, l: &LinearMap, rho: &Float, workers: usize) -> Result<Certificate> {
    let start = Instant::now();
    if !x0.error().is_zero() {
        return Err(Error::InvalidConfig("centre of the ball must have zero error part".into()));
    }
    let lambda_residual = verify_lambda_invertible(l)?;
    let epsilon = bound_epsilon(p, x0, l)?;
    let ball = x0.inflate(rho);
    let own = own_shared(p, &ball)?;
    let s = p.shared(&own);
    let cols = kappa_columns_with(p, s, &ball, l, workers)?;
    let prec = x0.ctx().prec();
    let kappa_columns = cols.into_iter().fold(Float::new(prec), |a, b| if b > a { b } else { a });
    let kappa_tail = p.tail_bound(s, &ball, l)?;
    let kappa = if kappa_tail > kappa_columns { kappa_tail.clone() } else { kappa_columns.clone() };
    let one_minus = down(prec, 1 - kappa.clone());
    let rhs = down(prec, rho * &one_minus);
    let pass = kappa < 1 && epsilon < rhs;
    if !pass {
        return Err(Error::CertificationFailed {
            epsilon: format!("{:e}", epsilon.to_f64()),
            kappa: format!("{:e}", kappa.to_f64()),
            rho: format!("{:e}", rho.to_f64()),
        });
    }
    // |x* - x0| <= kappa |x* - x0| + epsilon
    let radius = up(prec, &epsilon / &one_minus);
    let zero_ball = x0.inflate(&radius);
    let mut checksums = BTreeMap::new();
    checksums.insert("center".to_string(), ball_checksum(x0));
    checksums.insert("lambda".to_string(), l.checksum());
    if let Problem::DeltaEigen(s) | Problem::GammaEigen(s) = p {
        // the parameter ball enters through G(a^2 X)
        checksums.insert("parameter".to_string(), ball_checksum(&s.inner));
    }
    Ok(Certificate {
        kind: p.kind(),
        rho: rho.clone(),
        epsilon,
        kappa,
        kappa_columns,
        kappa_tail,
        lambda_residual,
        pass,
        enclosures: enclosures(p.kind(), &zero_ball)?,
        config: CertConfig {
            degree: x0.degree(),
            precision_bits: prec,
            boundary_rectangles: None,
            workers,
            checksums,
        },
        wall_time_s: start.elapsed().as_secs_f64(),
        ball,
        radius,
        zero_ball,
    })
}
