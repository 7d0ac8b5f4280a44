//! Pipeline orchestration, certified digits, reports and plot coverings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rug::float::Round;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::approx::{self, digits_to_bits};
use crate::ball::{Disc, FunctionBall};
use crate::certify::{self, ball_checksum, parse_rho, Certificate, CertificateJson, Problem, ProblemKind};
use crate::error::{Error, Result};
use crate::ops::{check_domain_extension, DomainExtension, ExtendTarget, Extender};
use crate::rounded::{Interval, Rectangle, RoundingContext};

pub const REPORT_SCHEMA: &str = "feigen-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    FixedPoint,
    Delta,
    Gamma,
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_point" | "fixed-point" | "g" => Ok(Target::FixedPoint),
            "delta" => Ok(Target::Delta),
            "gamma" => Ok(Target::Gamma),
            _ => Err(Error::InvalidConfig(format!("unknown target {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub degree: usize,
    /// working precision in decimal digits
    pub digits: u32,
    /// radius of the fixed-point ball, as a decimal string
    pub rho: String,
    /// radius of the `delta` eigenfunction ball; defaults to `rho * 10^4`
    pub rho_delta: Option<String>,
    /// radius of the `gamma` eigenfunction ball; defaults to `rho * 10^4`
    pub rho_gamma: Option<String>,
    pub boundary_rectangles: usize,
    pub workers: usize,
    pub targets: Vec<Target>,
    /// significant digits used when rounding enclosures for digit extraction;
    /// defaults to `digits`
    pub print_digits: Option<u32>,
    pub output_dir: Option<PathBuf>,
    /// checkpoint holding an approximate fixed point, used instead of the bootstrap
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig {
            degree: 20,
            digits: 30,
            rho: "1e-8".into(),
            rho_delta: None,
            rho_gamma: None,
            boundary_rectangles: 64,
            workers: 1,
            targets: vec![Target::FixedPoint, Target::Delta, Target::Gamma],
            print_digits: None,
            output_dir: None,
            checkpoint: None,
        }
    }

    pub fn prec(&self) -> u32 {
        digits_to_bits(self.digits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 4 {
            return Err(Error::InvalidConfig(format!("degree must be >= 4, got {}", self.degree)));
        }
        if self.digits < 15 {
            return Err(Error::InvalidConfig(format!("precision must be >= 15 digits, got {}", self.digits)));
        }
        if self.boundary_rectangles < 4 || !self.boundary_rectangles.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "boundary rectangles must be a power of two >= 4, got {}",
                self.boundary_rectangles
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        let needs_fp = self.targets.iter().any(|t| *t != Target::FixedPoint);
        if needs_fp && !self.targets.contains(&Target::FixedPoint) {
            return Err(Error::MissingCertificate("fixed_point (required by the eigenproblems)".into()));
        }
        self.radius(Target::FixedPoint)?;
        self.radius(Target::Delta)?;
        self.radius(Target::Gamma)?;
        Ok(())
    }

    /// Ball radius for `target`, rounded down to a representable number.
    pub fn radius(&self, target: Target) -> Result<Float> {
        let p = self.prec();
        let explicit = match target {
            Target::FixedPoint => Some(&self.rho),
            Target::Delta => self.rho_delta.as_ref(),
            Target::Gamma => self.rho_gamma.as_ref(),
        };
        match explicit {
            Some(s) => parse_rho(s, p),
            None => {
                let base = parse_rho(&self.rho, p)?;
                Ok(crate::rounded::down(p, base * 10_000u32))
            }
        }
    }

    pub fn print_digits(&self) -> usize {
        self.print_digits.unwrap_or(self.digits) as usize
    }
}

/// Digits shared by every member of an enclosure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitString {
    pub text: String,
    pub count: usize,
}

/// `x` rounded in `dir` to `digits` significant decimal digits, written
/// positionally as (negative, integer part, fractional part).
fn positional(x: &Float, digits: usize, dir: Round) -> (bool, String, String) {
    if x.is_zero() {
        return (false, "0".into(), String::new());
    }
    let s = x.to_string_radix_round(10, Some(digits), dir);
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.as_str()),
    };
    let (mant, exp) = match body.split_once('e') {
        Some((m, e)) => (m, e.parse::<i64>().expect("decimal exponent")),
        None => (body, 0),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    let all: String = format!("{ip}{fp}");
    let point = ip.len() as i64 + exp;
    let (int, frac) = if point <= 0 {
        ("0".to_string(), format!("{}{all}", "0".repeat((-point) as usize)))
    } else if point as usize >= all.len() {
        (format!("{all}{}", "0".repeat(point as usize - all.len())), String::new())
    } else {
        (all[..point as usize].to_string(), all[point as usize..].to_string())
    };
    (neg, int, frac)
}

/// Longest decimal prefix shared by the outward-rounded endpoints.
///
/// Both endpoints are rounded outward to `print_digits` significant digits and
/// written positionally with aligned integer parts; every member of the
/// interval then starts with their common prefix.
pub fn certified_digits(enclosure: &Interval, print_digits: usize) -> DigitString {
    let none = DigitString {
        text: String::new(),
        count: 0,
    };
    let (nl, il, fl) = positional(enclosure.lo(), print_digits, Round::Down);
    let (nh, ih, fh) = positional(enclosure.hi(), print_digits, Round::Up);
    if nl != nh {
        return none;
    }
    let iw = il.len().max(ih.len());
    let fw = fl.len().max(fh.len());
    let lo = format!("{:0>iw$}.{:0<fw$}", il, fl);
    let hi = format!("{:0>iw$}.{:0<fw$}", ih, fh);
    let common: String = lo
        .chars()
        .zip(hi.chars())
        .take_while(|(a, b)| a == b)
        .map(|(a, _)| a)
        .collect();
    let count = common
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|c| *c == '0')
        .count();
    if count == 0 {
        return none;
    }
    let trimmed = common.trim_end_matches('.');
    let mut body = trimmed.trim_start_matches('0').to_string();
    if body.starts_with('.') || body.is_empty() {
        body.insert(0, '0');
    }
    let text = if nl { format!("-{body}") } else { body };
    DigitString { text, count }
}

/// Digit block in groups of ten, five groups per line.
pub fn grouped_layout(name: &str, d: &DigitString) -> String {
    let mut out = String::new();
    let (head, frac) = match d.text.split_once('.') {
        Some((h, f)) => (h.to_string(), f.to_string()),
        None => (d.text.clone(), String::new()),
    };
    let sign = if head.starts_with('-') { "" } else { "+" };
    let _ = writeln!(out, "{name} = {sign}{head}.");
    let groups: Vec<&str> = frac
        .as_bytes()
        .chunks(10)
        .map(|c| std::str::from_utf8(c).expect("ascii digits"))
        .collect();
    for line in groups.chunks(5) {
        let _ = writeln!(out, "    {}", line.join(" "));
    }
    let _ = writeln!(out, "    ... ({} digits)", d.count);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub boundary_rectangles: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub config: RunConfig,
    pub checksums: BTreeMap<String, String>,
    pub domain_extension: Option<DomainSummary>,
    pub certificates: BTreeMap<String, CertificateJson>,
    pub digits: BTreeMap<String, DigitString>,
    pub failure: Option<Failure>,
}

/// Everything the pipeline produced, in memory.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub g0: Vec<Float>,
    pub domain: Option<DomainExtension>,
    pub fixed_point: Option<Certificate>,
    pub delta: Option<Certificate>,
    pub gamma: Option<Certificate>,
}

impl PipelineOutput {
    pub fn digits_text(&self) -> String {
        self.report
            .digits
            .iter()
            .map(|(k, d)| grouped_layout(k, d))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn certificate(&self, kind: ProblemKind) -> Option<&Certificate> {
        match kind {
            ProblemKind::FixedPoint => self.fixed_point.as_ref(),
            ProblemKind::DeltaEigen => self.delta.as_ref(),
            ProblemKind::GammaEigen => self.gamma.as_ref(),
        }
    }

    /// Certified balls and constants for plotting.
    pub fn plot_inputs(&self) -> PlotInputs {
        PlotInputs {
            g: self.fixed_point.as_ref().map(|c| c.zero_ball.clone()),
            v: self.delta.as_ref().map(|c| c.zero_ball.clone()),
            w: self.gamma.as_ref().map(|c| c.zero_ball.clone()),
            domain: self.domain.clone(),
        }
    }

    /// Writes `report.json`, `digits.txt` and the certified balls.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json)?;
        std::fs::write(dir.join("digits.txt"), self.digits_text())?;
        for (name, c) in [("g", &self.fixed_point), ("v", &self.delta), ("w", &self.gamma)] {
            if let Some(c) = c {
                std::fs::write(dir.join(format!("{name}_ball.txt")), c.zero_ball.to_text())?;
            }
        }
        Ok(())
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

/// Approximate fixed point: checkpoint midpoints or the staged Newton bootstrap.
pub fn bootstrap(cfg: &RunConfig) -> Result<Vec<Float>> {
    let prec = cfg.prec();
    let disc = Disc::standard(prec);
    match &cfg.checkpoint {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let ball = FunctionBall::from_text(&text)?;
            let seed: Vec<Float> = ball.midpoints().iter().map(|m| Float::with_val(prec, m)).collect();
            if ball.degree() == cfg.degree {
                Ok(seed)
            } else {
                approx::approx_fixed_point(&disc, cfg.degree, cfg.digits, &seed)
            }
        }
        None => approx::approx_fixed_point_staged(&disc, cfg.degree, cfg.digits),
    }
}

/// approx -> domain extension -> fixed point -> delta -> gamma.
///
/// On failure the partial report (with the failing stage) is written to the
/// output directory if one is configured, and the stage error is returned.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mut out = PipelineOutput {
        report: Report {
            schema: REPORT_SCHEMA.into(),
            config: cfg.clone(),
            checksums: BTreeMap::new(),
            domain_extension: None,
            certificates: BTreeMap::new(),
            digits: BTreeMap::new(),
            failure: None,
        },
        g0: Vec::new(),
        domain: None,
        fixed_point: None,
        delta: None,
        gamma: None,
    };
    let res = run_stages(cfg, &mut out);
    if let Err(Error::Stage { stage, source }) = &res {
        out.report.failure = Some(Failure {
            stage: stage.clone(),
            message: source.to_string(),
        });
    }
    if let Some(dir) = &cfg.output_dir {
        out.write(dir)?;
    }
    res.map(|_| out)
}

fn run_stages(cfg: &RunConfig, out: &mut PipelineOutput) -> Result<()> {
    let prec = cfg.prec();
    let ctx = RoundingContext::new(prec);
    let disc = Disc::standard(prec);
    let n = cfg.degree;
    let pd = cfg.print_digits();
    let g0 = stage("approx", bootstrap(cfg))?;
    let x0 = FunctionBall::from_floats(&disc, n, ctx, &g0);
    out.report.checksums.insert("g0".into(), ball_checksum(&x0));
    out.g0 = g0.clone();
    if cfg.targets.is_empty() {
        return Ok(());
    }

    let rho = cfg.radius(Target::FixedPoint)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let ball = x0.inflate(&rho);
    let m = cfg.boundary_rectangles;
    let dom = stage("domain_extension", pool.install(|| check_domain_extension(&ball, m)))?;
    out.report.domain_extension = Some(DomainSummary {
        boundary_rectangles: m,
        pass: true,
    });
    out.domain = Some(dom);

    let jac = approx::approx_jacobian(&disc, ProblemKind::FixedPoint, &g0, &g0, prec);
    let lam = stage("fixed_point", approx::build_lambda(ProblemKind::FixedPoint, &jac, None, prec))?;
    let mut fp = stage(
        "fixed_point",
        certify::certify(&Problem::fixed_point(), &x0, &lam, &rho, cfg.workers),
    )?;
    fp.config.boundary_rectangles = Some(m);
    for e in &fp.enclosures {
        out.report.digits.insert(e.name.clone(), certified_digits(&e.value, pd));
    }
    out.report.certificates.insert("fixed_point".into(), fp.to_json());
    let parameter = fp.zero_ball.clone();
    out.fixed_point = Some(fp);

    for (target, kind, name) in [
        (Target::Delta, ProblemKind::DeltaEigen, "delta"),
        (Target::Gamma, ProblemKind::GammaEigen, "gamma"),
    ] {
        if !cfg.targets.contains(&target) {
            continue;
        }
        let (v0, lam0) = stage(name, approx::approx_eigenpair(&disc, kind, &g0, cfg.digits))?;
        let jac = approx::approx_jacobian(&disc, kind, &g0, &v0, prec);
        let lam = stage(name, approx::build_lambda(kind, &jac, Some(&lam0), prec))?;
        let problem = stage(
            name,
            if kind == ProblemKind::DeltaEigen {
                Problem::delta(&parameter)
            } else {
                Problem::gamma(&parameter)
            },
        )?;
        let x = FunctionBall::from_floats(&disc, n, ctx, &v0);
        let r = cfg.radius(target)?;
        let c = stage(name, certify::certify(&problem, &x, &lam, &r, cfg.workers))?;
        for e in &c.enclosures {
            out.report.digits.insert(e.name.clone(), certified_digits(&e.value, pd));
        }
        out.report.certificates.insert(kind.name().into(), c.to_json());
        match target {
            Target::Delta => out.delta = Some(c),
            _ => out.gamma = Some(c),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
    Fig3a,
    Fig3b,
    Fig3c,
    Fig3d,
    Fig4a,
    Fig4b,
}

impl std::str::FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig1" => Figure::Fig1,
            "fig2a" => Figure::Fig2a,
            "fig2b" => Figure::Fig2b,
            "fig2c" => Figure::Fig2c,
            "fig2d" => Figure::Fig2d,
            "fig3a" => Figure::Fig3a,
            "fig3b" => Figure::Fig3b,
            "fig3c" => Figure::Fig3c,
            "fig3d" => Figure::Fig3d,
            "fig4a" => Figure::Fig4a,
            "fig4b" => Figure::Fig4b,
            _ => return Err(Error::InvalidConfig(format!("unknown figure {s:?}"))),
        })
    }
}

impl Figure {
    pub const ALL: [Figure; 11] = [
        Figure::Fig1,
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig2c,
        Figure::Fig2d,
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::Fig3c,
        Figure::Fig3d,
        Figure::Fig4a,
        Figure::Fig4b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig2c => "fig2c",
            Figure::Fig2d => "fig2d",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig3c => "fig3c",
            Figure::Fig3d => "fig3d",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
        }
    }

    /// Target function and plotted interval; `None` for the boundary figure.
    ///
    /// Capital letters are plotted over the real slice `[-1.5, 3.5]` of the
    /// disc, lower-case ones over its preimage `|x| <= sqrt(3.5)`; the
    /// extended panels use `[-1.5, 14]` and `[-3.5, 3.5]`.
    pub fn range(self) -> Option<(ExtendTarget, f64, f64)> {
        let s = 3.5f64.sqrt();
        Some(match self {
            Figure::Fig1 => return None,
            Figure::Fig2a => (ExtendTarget::UpperG, -1.5, 3.5),
            Figure::Fig2b => (ExtendTarget::LowerG, -s, s),
            Figure::Fig2c => (ExtendTarget::UpperG, -1.5, 14.0),
            Figure::Fig2d => (ExtendTarget::LowerG, -3.5, 3.5),
            Figure::Fig3a => (ExtendTarget::UpperV, -1.5, 3.5),
            Figure::Fig3b => (ExtendTarget::LowerV, -s, s),
            Figure::Fig3c => (ExtendTarget::UpperV, -1.5, 14.0),
            Figure::Fig3d => (ExtendTarget::LowerV, -3.5, 3.5),
            Figure::Fig4a => (ExtendTarget::LowerW, -s, s),
            Figure::Fig4b => (ExtendTarget::LowerW, -3.5, 3.5),
        })
    }
}

/// Certified balls available for plotting.
#[derive(Debug, Clone, Default)]
pub struct PlotInputs {
    pub g: Option<FunctionBall>,
    pub v: Option<FunctionBall>,
    pub w: Option<FunctionBall>,
    pub domain: Option<DomainExtension>,
}

impl PlotInputs {
    /// Loads `g_ball.txt`, `v_ball.txt`, `w_ball.txt` where present.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Option<FunctionBall>> {
            let p = dir.join(name);
            if p.exists() {
                Ok(Some(FunctionBall::from_text(&std::fs::read_to_string(p)?)?))
            } else {
                Ok(None)
            }
        };
        Ok(PlotInputs {
            g: read("g_ball.txt")?,
            v: read("v_ball.txt")?,
            w: read("w_ball.txt")?,
            domain: None,
        })
    }
}

/// One covering rectangle: `set` names the curve it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverRow {
    pub set: &'static str,
    pub x: Interval,
    pub y: Interval,
}

fn rect_row(set: &'static str, r: &Rectangle) -> CoverRow {
    CoverRow {
        set,
        x: r.re.clone(),
        y: r.im.clone(),
    }
}

/// Rectangle covering for a figure; `subdivisions` is the number of boundary
/// rectangles for `fig1` and the number of subintervals otherwise.
pub fn emit_plot_covering(fig: Figure, subdivisions: usize, inputs: &PlotInputs, depth: usize) -> Result<Vec<CoverRow>> {
    let g = inputs
        .g
        .as_ref()
        .ok_or_else(|| Error::MissingCertificate("fixed_point".into()))?;
    let Some((target, lo, hi)) = fig.range() else {
        let dom = match &inputs.domain {
            Some(d) if d.boundary.len() == subdivisions => d.clone(),
            _ => check_domain_extension(g, subdivisions)?,
        };
        let mut rows = Vec::new();
        rows.extend(dom.boundary.iter().map(|r| rect_row("boundary", r)));
        rows.extend(dom.gamma1.iter().map(|r| rect_row("gamma1", r)));
        rows.extend(dom.gamma2.iter().map(|r| rect_row("gamma2", r)));
        return Ok(rows);
    };
    let mut ext = Extender::new(g.clone())?;
    if matches!(target, ExtendTarget::UpperV | ExtendTarget::LowerV) {
        let v = inputs.v.as_ref().ok_or_else(|| Error::MissingCertificate("delta".into()))?;
        ext = ext.with_delta(v.clone(), v.coeff(0)?.re);
    }
    if matches!(target, ExtendTarget::UpperW | ExtendTarget::LowerW) {
        let w = inputs.w.as_ref().ok_or_else(|| Error::MissingCertificate("gamma".into()))?;
        ext = ext.with_gamma(w.clone(), w.coeff(0)?.re);
    }
    let ctx = g.ctx();
    let a = ctx.f64(lo);
    let width = ctx.f64(hi).sub(&a);
    let k = subdivisions.max(1) as i64;
    (0..k)
        .map(|i| {
            let left = a.add(&width.mul(&ctx.ratio(i, k)?));
            let right = a.add(&width.mul(&ctx.ratio(i + 1, k)?));
            let x = Interval::new(left.lo().clone(), right.hi().clone());
            let y = ext.eval(target, &x, depth)?;
            Ok(CoverRow { set: "graph", x, y: y.re })
        })
        .collect()
}

/// CSV with columns `set,x_lo,x_hi,y_lo,y_hi`, endpoints rounded outward to 17 digits.
pub fn covering_csv(rows: &[CoverRow]) -> String {
    let mut s = String::from("set,x_lo,x_hi,y_lo,y_hi\n");
    let d = |x: &Float, r: Round| certify::decimal(x, 17, r);
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            row.set,
            d(row.x.lo(), Round::Down),
            d(row.x.hi(), Round::Up),
            d(row.y.lo(), Round::Down),
            d(row.y.hi(), Round::Up)
        );
    }
    s
}
