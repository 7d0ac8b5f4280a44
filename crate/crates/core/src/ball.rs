//! Enclosures of analytic functions on a disc `D(c, r)`.
//!
//! A function is expanded in the scaled monomials `e_k(z) = ((z - c) / r)^k`
//! and measured in the weighted l1 norm `sum |a_k|`, which makes the space a
//! Banach algebra: `|e_k(z)| <= 1` on the closed disc and `||fg|| <= ||f|| ||g||`.
//!
//! A [`FunctionBall`] stands for every `f = f_P + f_H + f_E` where `f_P` has
//! coefficients inside the stored rectangles (degrees `0..=N`), `f_H` is
//! supported strictly above degree `N` with `||f_H|| <= tail`, and `f_E` is an
//! arbitrary function with `||f_E|| <= error`. When every coefficient
//! rectangle is real the members are real-coefficient series (including the
//! tail and error parts), which keeps the fixed-point pipeline free of
//! imaginary parts.

use std::fmt::Write as _;

use rug::Float;

use crate::error::{Error, Result};
use crate::rounded::{float_from_hex, float_to_hex, up, Interval, Rectangle, RoundingContext};

/// Domain disc `D(c, r)` with representable centre and radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Disc {
    center: Float,
    radius: Float,
}

impl Disc {
    pub fn new(center: Float, radius: Float) -> Self {
        assert!(radius > 0, "disc radius must be positive");
        Disc { center, radius }
    }

    /// `D(1, 2.5)`, the domain used for the period-doubling fixed point.
    pub fn standard(prec: u32) -> Self {
        Disc::new(Float::with_val(prec, 1), Float::with_val(prec, 2.5))
    }

    pub fn center(&self) -> &Float {
        &self.center
    }

    pub fn radius(&self) -> &Float {
        &self.radius
    }
}

fn uadd(a: &Float, b: &Float) -> Float {
    up(a.prec().max(b.prec()), a + b)
}

fn umul(a: &Float, b: &Float) -> Float {
    up(a.prec().max(b.prec()), a * b)
}

/// Upper bound of `sup_{k >= kmin} k * theta^(k-1)` for `0 <= theta < 1`.
///
/// Terms increase while `(k+1) theta > k`; the scan stops at the first `k`
/// where that fails, after which every later term is smaller.
pub fn sup_k_theta_pow(theta: &Float, kmin: u64) -> Float {
    let p = theta.prec();
    assert!(*theta < 1 && *theta >= 0, "theta must lie in [0, 1)");
    let mut best = Float::new(p);
    let mut k = kmin.max(1);
    for _ in 0..1_000_000 {
        let pw = up(p, rug::ops::Pow::pow(theta, (k - 1) as u32));
        let term = up(p, &pw * k);
        if term > best {
            best = term;
        }
        let next = up(p, theta * (k + 1));
        if next <= k {
            return best;
        }
        k += 1;
    }
    // geometric majorant: sum_{k>=1} k theta^(k-1) = 1/(1-theta)^2
    let one_minus = crate::rounded::down(p, 1 - theta.clone());
    let den = crate::rounded::down(p, one_minus.square_ref());
    up(p, Float::with_val(p, 1) / &den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionBall {
    disc: Disc,
    ctx: RoundingContext,
    coeffs: Vec<Rectangle>,
    tail: Float,
    error: Float,
}

impl FunctionBall {
    pub fn zero(disc: &Disc, degree: usize, ctx: RoundingContext) -> Self {
        FunctionBall {
            disc: disc.clone(),
            ctx,
            coeffs: vec![ctx.rect_zero(); degree + 1],
            tail: Float::new(ctx.prec()),
            error: Float::new(ctx.prec()),
        }
    }

    /// Builds a ball from coefficient enclosures; missing degrees are zero.
    pub fn from_coeffs(
        disc: &Disc,
        degree: usize,
        ctx: RoundingContext,
        coeffs: Vec<Rectangle>,
    ) -> Self {
        assert!(coeffs.len() <= degree + 1, "too many coefficients");
        let mut f = Self::zero(disc, degree, ctx);
        for (k, c) in coeffs.into_iter().enumerate() {
            f.coeffs[k] = c;
        }
        f
    }

    /// Exact polynomial with the given point coefficients.
    pub fn from_floats(disc: &Disc, degree: usize, ctx: RoundingContext, coeffs: &[Float]) -> Self {
        let rects = coeffs.iter().map(|c| Rectangle::real(ctx.float(c))).collect();
        Self::from_coeffs(disc, degree, ctx, rects)
    }

    pub fn constant(disc: &Disc, degree: usize, ctx: RoundingContext, v: Interval) -> Self {
        Self::from_coeffs(disc, degree, ctx, vec![Rectangle::real(v)])
    }

    /// Basis element `e_k`.
    pub fn basis(disc: &Disc, degree: usize, ctx: RoundingContext, k: usize) -> Self {
        let mut f = Self::zero(disc, degree, ctx);
        if k <= degree {
            f.coeffs[k] = Rectangle::real(ctx.one());
        } else {
            f.tail = Float::with_val(ctx.prec(), 1);
        }
        f
    }

    /// The identity map `z = c + r e_1`.
    pub fn identity(disc: &Disc, degree: usize, ctx: RoundingContext) -> Self {
        Self::affine_arg(disc, degree, ctx, &ctx.one())
    }

    /// Exact representation of `X -> s X`: coefficients `(s c, s r)`.
    pub fn affine_arg(disc: &Disc, degree: usize, ctx: RoundingContext, s: &Interval) -> Self {
        assert!(degree >= 1);
        let c = ctx.float(&disc.center);
        let r = ctx.float(&disc.radius);
        Self::from_coeffs(
            disc,
            degree,
            ctx,
            vec![Rectangle::real(s.mul(&c)), Rectangle::real(s.mul(&r))],
        )
    }

    pub fn disc(&self) -> &Disc {
        &self.disc
    }

    pub fn ctx(&self) -> RoundingContext {
        self.ctx
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Rectangle] {
        &self.coeffs
    }

    /// Upper bound `v_H` on the norm of the part above degree `N`.
    pub fn tail(&self) -> &Float {
        &self.tail
    }

    /// Upper bound `v_E` on the norm of the unstructured error part.
    pub fn error(&self) -> &Float {
        &self.error
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(Rectangle::is_real)
    }

    pub fn is_polynomial(&self) -> bool {
        self.tail.is_zero() && self.error.is_zero()
    }

    fn prec(&self) -> u32 {
        self.ctx.prec()
    }

    fn check_space(&self, o: &FunctionBall) -> Result<()> {
        if self.disc != o.disc || self.degree() != o.degree() {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn with_tail_error(mut self, tail: Float, error: Float) -> Self {
        assert!(tail >= 0 && error >= 0);
        self.tail = tail;
        self.error = error;
        self
    }

    /// Upper bound of `sum |a_k|` over the polynomial part alone.
    pub fn poly_norm_upper(&self) -> Float {
        let p = self.prec();
        let mut s = Float::new(p);
        for c in &self.coeffs {
            if !c.is_zero() {
                s = up(p, &s + &c.abs_upper());
            }
        }
        s
    }

    /// Upper bound of the l1 norm over every member.
    pub fn norm_upper(&self) -> Float {
        uadd(&uadd(&self.poly_norm_upper(), &self.tail), &self.error)
    }

    pub fn add(&self, o: &FunctionBall) -> Result<FunctionBall> {
        self.check_space(o)?;
        Ok(FunctionBall {
            disc: self.disc.clone(),
            ctx: self.ctx,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.add(b)).collect(),
            tail: uadd(&self.tail, &o.tail),
            error: uadd(&self.error, &o.error),
        })
    }

    pub fn sub(&self, o: &FunctionBall) -> Result<FunctionBall> {
        self.check_space(o)?;
        Ok(FunctionBall {
            disc: self.disc.clone(),
            ctx: self.ctx,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.sub(b)).collect(),
            tail: uadd(&self.tail, &o.tail),
            error: uadd(&self.error, &o.error),
        })
    }

    pub fn scale(&self, s: &Rectangle) -> FunctionBall {
        let m = s.abs_upper();
        FunctionBall {
            disc: self.disc.clone(),
            ctx: self.ctx,
            coeffs: self.coeffs.iter().map(|a| a.mul(s)).collect(),
            tail: umul(&self.tail, &m),
            error: umul(&self.error, &m),
        }
    }

    pub fn scale_real(&self, s: &Interval) -> FunctionBall {
        self.scale(&Rectangle::real(s.clone()))
    }

    /// Adds `v` to the constant coefficient.
    pub fn add_constant(&self, v: &Interval) -> FunctionBall {
        let mut f = self.clone();
        f.coeffs[0] = f.coeffs[0].add(&Rectangle::real(v.clone()));
        f
    }

    /// Closed ball of radius `rho` around every member.
    pub fn inflate(&self, rho: &Float) -> FunctionBall {
        assert!(*rho >= 0, "radius must be non-negative");
        let mut f = self.clone();
        f.error = uadd(&f.error, rho);
        f
    }

    /// Moves the part above degree `N` into the error bound.
    pub fn tail_to_error(&self) -> FunctionBall {
        let mut f = self.clone();
        f.error = uadd(&f.error, &f.tail);
        f.tail = Float::new(self.prec());
        f
    }

    /// Product in the algebra.
    ///
    /// Degrees above `N` produced by the two polynomial parts are summed
    /// exactly per degree and spilled into `v_H`; every product involving a
    /// tail is also of degree `> N` and goes to `v_H`; anything touching an
    /// error part goes to `v_E`.
    pub fn mul(&self, o: &FunctionBall) -> Result<FunctionBall> {
        self.check_space(o)?;
        let n = self.degree();
        let p = self.prec();
        let a_nz: Vec<usize> = (0..=n).filter(|&i| !self.coeffs[i].is_zero()).collect();
        let b_nz: Vec<usize> = (0..=n).filter(|&j| !o.coeffs[j].is_zero()).collect();
        let mut full: Vec<Option<Rectangle>> = vec![None; 2 * n + 1];
        for &i in &a_nz {
            let a = &self.coeffs[i];
            for &j in &b_nz {
                let t = a.mul(&o.coeffs[j]);
                let slot = &mut full[i + j];
                *slot = Some(match slot.take() {
                    None => t,
                    Some(acc) => acc.add(&t),
                });
            }
        }
        let mut coeffs = vec![self.ctx.rect_zero(); n + 1];
        let mut spill = Float::new(p);
        for (m, c) in full.into_iter().enumerate() {
            if let Some(c) = c {
                if m <= n {
                    coeffs[m] = c;
                } else {
                    spill = up(p, &spill + &c.abs_upper());
                }
            }
        }
        let (pf, pg) = (self.poly_norm_upper(), o.poly_norm_upper());
        let mut tail = spill;
        if !o.tail.is_zero() {
            tail = uadd(&tail, &umul(&pf, &o.tail));
        }
        if !self.tail.is_zero() {
            tail = uadd(&tail, &umul(&self.tail, &uadd(&pg, &o.tail)));
        }
        let mut error = Float::new(p);
        if !self.error.is_zero() {
            error = umul(&self.error, &o.norm_upper());
        }
        if !o.error.is_zero() {
            error = uadd(&error, &umul(&uadd(&pf, &self.tail), &o.error));
        }
        Ok(FunctionBall {
            disc: self.disc.clone(),
            ctx: self.ctx,
            coeffs,
            tail,
            error,
        })
    }

    pub fn sqr(&self) -> Result<FunctionBall> {
        self.mul(self)
    }

    /// `(h - c) / r`, the inner function seen by the basis monomials.
    pub fn normalized(&self) -> FunctionBall {
        let c = self.ctx.float(&self.disc.center);
        let r = self.ctx.float(&self.disc.radius);
        let p = self.prec();
        let shifted = self.add_constant(&c.neg());
        FunctionBall {
            disc: self.disc.clone(),
            ctx: self.ctx,
            coeffs: shifted
                .coeffs
                .iter()
                .map(|a| Rectangle {
                    re: a.re.div(&r).expect("disc radius is positive"),
                    im: a.im.div(&r).expect("disc radius is positive"),
                })
                .collect(),
            tail: up(p, &self.tail / &self.disc.radius),
            error: up(p, &self.error / &self.disc.radius),
        }
    }

    /// Upper bound of `||(h - c) / r||`, the composition contraction factor.
    pub fn theta(&self) -> Float {
        self.normalized().norm_upper()
    }

    /// Enclosure of `f o h` (Horner in ball arithmetic).
    pub fn compose(&self, h: &FunctionBall) -> Result<FunctionBall> {
        self.check_space(h)?;
        let p = h.normalized();
        let theta = p.norm_upper();
        check_theta(&theta, self.is_polynomial(), "compose")?;
        let n = self.degree();
        let mut acc = FunctionBall::constant(&self.disc, n, self.ctx, self.ctx.zero());
        acc.coeffs[0] = self.coeffs[n].clone();
        for k in (0..n).rev() {
            acc = acc.mul(&p)?;
            acc.coeffs[0] = acc.coeffs[0].add(&self.coeffs[k]);
        }
        Ok(acc.inflate(&self.composed_tail_bound(&theta)))
    }

    /// `v_H theta^(N+1) + v_E`, the norm bound on the non-polynomial part of
    /// `f` composed with any inner function of normalised norm `<= theta`.
    pub(crate) fn composed_tail_bound(&self, theta: &Float) -> Float {
        let p = self.prec();
        let mut b = self.error.clone();
        if !self.tail.is_zero() {
            let pw = up(p, rug::ops::Pow::pow(theta, (self.degree() + 1) as u32));
            b = uadd(&b, &umul(&self.tail, &pw));
        }
        b
    }

    /// Polynomial part of the derivative: `d/dz e_k = (k / r) e_{k-1}`.
    pub fn derivative_poly(&self) -> FunctionBall {
        let n = self.degree();
        let rinv = self
            .ctx
            .float(&self.disc.radius)
            .recip()
            .expect("disc radius is positive");
        let mut d = FunctionBall::zero(&self.disc, n, self.ctx);
        for k in 1..=n {
            if !self.coeffs[k].is_zero() {
                let s = self.ctx.int(k as i64).mul(&rinv);
                d.coeffs[k - 1] = self.coeffs[k].mul_interval(&s);
            }
        }
        d
    }

    /// Norm bound on `(f_H + f_E)' o h` given `||(h - c)/r|| <= theta < 1`.
    pub(crate) fn derivative_tail_bound(&self, theta: &Float) -> Float {
        let p = self.prec();
        let n = self.degree() as u64;
        let rinv = up(p, Float::with_val(p, 1) / &self.disc.radius);
        let mut b = Float::new(p);
        if !self.tail.is_zero() {
            b = umul(&umul(&self.tail, &rinv), &tail_derivative_majorant(theta, n));
        }
        if !self.error.is_zero() {
            // the error part may hold every degree, so the sup starts at k = 1
            b = uadd(&b, &umul(&umul(&self.error, &rinv), &sup_k_theta_pow(theta, 1)));
        }
        b
    }

    /// Enclosure of `f' o h`; requires `theta < 1` strictly.
    pub fn compose_derivative(&self, h: &FunctionBall) -> Result<FunctionBall> {
        self.check_space(h)?;
        let theta = h.theta();
        check_theta(&theta, false, "compose_derivative")?;
        let d = self.derivative_poly().compose(h)?;
        Ok(d.inflate(&self.derivative_tail_bound(&theta)))
    }

    fn normalized_point(&self, z: &Rectangle) -> Result<(Rectangle, Float)> {
        let c = Rectangle::real(self.ctx.float(&self.disc.center));
        let r = Rectangle::real(self.ctx.float(&self.disc.radius));
        let t = z.sub(&c).div(&r)?;
        let tau = t.abs_upper();
        Ok((t, tau))
    }

    /// Enclosure of `f(z)` for every member and every point of `z`.
    pub fn eval(&self, z: &Rectangle) -> Result<Rectangle> {
        let (t, tau) = self.normalized_point(z)?;
        if tau > 1 {
            return Err(Error::PointOutsideDomain {
                bound: tau.to_f64().to_string(),
            });
        }
        let n = self.degree();
        let mut acc = self.coeffs[n].clone();
        for k in (0..n).rev() {
            acc = acc.mul(&t).add(&self.coeffs[k]);
        }
        let p = self.prec();
        let mut rad = self.error.clone();
        if !self.tail.is_zero() {
            let pw = up(p, rug::ops::Pow::pow(&tau, (n + 1) as u32));
            rad = uadd(&rad, &umul(&self.tail, &pw));
        }
        if rad.is_zero() {
            return Ok(acc);
        }
        Ok(acc.inflate(&rad, self.is_real() && z.is_real()))
    }

    /// Enclosure of `f'(z)`; `z` must lie strictly inside the disc.
    pub fn eval_derivative(&self, z: &Rectangle) -> Result<Rectangle> {
        let (t, tau) = self.normalized_point(z)?;
        if tau >= 1 {
            return Err(Error::PointOutsideDomain {
                bound: tau.to_f64().to_string(),
            });
        }
        let d = self.derivative_poly();
        let n = self.degree();
        let mut acc = d.coeffs[n].clone();
        for k in (0..n).rev() {
            acc = acc.mul(&t).add(&d.coeffs[k]);
        }
        let rad = self.derivative_tail_bound(&tau);
        if rad.is_zero() {
            return Ok(acc);
        }
        Ok(acc.inflate(&rad, self.is_real() && z.is_real()))
    }

    /// Enclosure of coefficient `a_k` of every member, `k <= N`.
    pub fn coeff(&self, k: usize) -> Result<Rectangle> {
        if k > self.degree() {
            return Err(Error::IndexBeyondTruncation {
                index: k,
                degree: self.degree(),
            });
        }
        Ok(self.coeffs[k].inflate(&self.error, self.is_real()))
    }

    /// Midpoints of the real parts of the coefficients.
    pub fn midpoints(&self) -> Vec<Float> {
        self.coeffs.iter().map(|c| c.re.mid()).collect()
    }

    /// Checkpoint text; parsing it back reproduces every bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "feigen-function-ball 1");
        let _ = writeln!(s, "precision {}", self.prec());
        let _ = writeln!(s, "center {}", float_to_hex(&self.disc.center));
        let _ = writeln!(s, "radius {}", float_to_hex(&self.disc.radius));
        let _ = writeln!(s, "degree {}", self.degree());
        let _ = writeln!(s, "tail {}", float_to_hex(&self.tail));
        let _ = writeln!(s, "error {}", float_to_hex(&self.error));
        for (k, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(
                s,
                "{k} {} {} {} {}",
                float_to_hex(c.re.lo()),
                float_to_hex(c.re.hi()),
                float_to_hex(c.im.lo()),
                float_to_hex(c.im.hi())
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<FunctionBall> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut field = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {name}")))?;
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("malformed line: {line}")))?;
            if k != name {
                return Err(Error::Parse(format!("expected {name}, found {k}")));
            }
            Ok(v.trim().to_string())
        };
        if field("feigen-function-ball")? != "1" {
            return Err(Error::Parse("unsupported function-ball version".into()));
        }
        let prec: u32 = field("precision")?
            .parse()
            .map_err(|_| Error::Parse("bad precision".into()))?;
        let center = float_from_hex(&field("center")?, prec)?;
        let radius = float_from_hex(&field("radius")?, prec)?;
        let degree: usize = field("degree")?
            .parse()
            .map_err(|_| Error::Parse("bad degree".into()))?;
        let tail = float_from_hex(&field("tail")?, prec)?;
        let error = float_from_hex(&field("error")?, prec)?;
        let ctx = RoundingContext::new(prec);
        let mut coeffs = Vec::with_capacity(degree + 1);
        for (k, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 || parts[0].parse::<usize>().ok() != Some(k) {
                return Err(Error::Parse(format!("malformed coefficient line: {line}")));
            }
            let f = |i: usize| float_from_hex(parts[i], prec);
            coeffs.push(Rectangle::new(
                Interval::new(f(1)?, f(2)?),
                Interval::new(f(3)?, f(4)?),
            ));
        }
        if coeffs.len() != degree + 1 {
            return Err(Error::Parse(format!(
                "expected {} coefficients, found {}",
                degree + 1,
                coeffs.len()
            )));
        }
        Ok(FunctionBall {
            disc: Disc::new(center, radius),
            ctx,
            coeffs,
            tail,
            error,
        })
    }
}

fn check_theta(theta: &Float, polynomial: bool, what: &str) -> Result<()> {
    let ok = if polynomial { *theta <= 1 } else { *theta < 1 };
    if ok {
        Ok(())
    } else {
        Err(Error::CompositionContractFailure {
            what: what.to_string(),
            theta: theta.to_f64().to_string(),
        })
    }
}

/// Upper bound of `sup_{k > N} k theta^(k-1)`.
///
/// If `(N+2) theta <= N+1` the terms decrease from `k = N+1` on and the bound
/// is `(N+1) theta^N`; otherwise `(N+1) theta^N / (1 - theta)^2`.
pub fn tail_derivative_majorant(theta: &Float, n: u64) -> Float {
    let p = theta.prec();
    let pw = up(p, rug::ops::Pow::pow(theta, n as u32));
    tail_derivative_factor(theta, &pw, n)
}

/// As [`tail_derivative_majorant`], with `theta^N` replaced by any upper
/// bound `pow_n` of `||p^N||` (where `||p|| <= theta`).
pub fn tail_derivative_factor(theta: &Float, pow_n: &Float, n: u64) -> Float {
    let p = theta.prec();
    let lead = up(p, pow_n * (n + 1));
    let check = up(p, theta * (n + 2));
    if check <= n + 1 {
        lead
    } else {
        let one_minus = crate::rounded::down(p, 1 - theta.clone());
        let den = crate::rounded::down(p, one_minus.square_ref());
        up(p, &lead / &den)
    }
}

/// Precomputed powers `p^k`, `k = 0..=N`, of a normalised inner function
/// `p = (h - c) / r`, so that any number of compositions `f o h` cost one
/// linear combination each.
#[derive(Debug, Clone)]
pub struct PowerTable {
    theta: Float,
    powers: Vec<FunctionBall>,
    /// upper bound of `sup_{k > N} ||p^k||`
    high: Float,
    /// upper bound of `||p^N||`
    top: Float,
}

impl PowerTable {
    /// Fails unless `theta <= 1`; derivatives of non-polynomial balls
    /// additionally need `theta < 1`.
    pub fn new(h: &FunctionBall, what: &str) -> Result<PowerTable> {
        let p = h.normalized();
        let theta = p.norm_upper();
        check_theta(&theta, true, what)?;
        let n = h.degree();
        let mut powers = Vec::with_capacity(n + 1);
        powers.push(FunctionBall::constant(&h.disc, n, h.ctx, h.ctx.one()));
        for k in 1..=n {
            let next = powers[k - 1].mul(&p)?;
            powers.push(next);
        }
        let prec = h.prec();
        let top = {
            let a = powers[n].norm_upper();
            let b = up(prec, rug::ops::Pow::pow(&theta, n as u32));
            if a < b { a } else { b }
        };
        let high = {
            let a = powers[n].mul(&p)?.norm_upper();
            let b = umul(&top, &theta);
            if a < b { a } else { b }
        };
        Ok(PowerTable { theta, powers, high, top })
    }

    pub fn theta(&self) -> &Float {
        &self.theta
    }

    /// `e_k o h`.
    pub fn power(&self, k: usize) -> &FunctionBall {
        &self.powers[k]
    }

    /// Bound on `||f_H o h||` over every `f_H` of unit norm supported above `N`.
    pub fn high_order_bound(&self) -> &Float {
        &self.high
    }

    fn degree(&self) -> usize {
        self.powers.len() - 1
    }

    fn combine(&self, coeffs: &[Rectangle]) -> FunctionBall {
        let first = &self.powers[0];
        let mut acc = FunctionBall::zero(&first.disc, first.degree(), first.ctx);
        for (c, pk) in coeffs.iter().zip(&self.powers) {
            if c.is_zero() {
                continue;
            }
            acc = acc.add(&pk.scale(c)).expect("same space");
        }
        acc
    }

    /// Enclosure of `f o h`.
    pub fn compose(&self, f: &FunctionBall) -> Result<FunctionBall> {
        if f.degree() != self.degree() || f.disc != self.powers[0].disc {
            return Err(Error::DomainMismatch);
        }
        let mut r = self.combine(&f.coeffs);
        let mut extra = f.error.clone();
        if !f.tail.is_zero() {
            extra = uadd(&extra, &umul(&f.tail, &self.high));
        }
        if !extra.is_zero() {
            r = r.inflate(&extra);
        }
        Ok(r)
    }

    /// Enclosure of `f' o h`.
    pub fn compose_derivative(&self, f: &FunctionBall) -> Result<FunctionBall> {
        if f.degree() != self.degree() || f.disc != self.powers[0].disc {
            return Err(Error::DomainMismatch);
        }
        if !f.is_polynomial() {
            check_theta(&self.theta, false, "compose_derivative")?;
        }
        let d = f.derivative_poly();
        let mut r = self.combine(&d.coeffs);
        let prec = f.prec();
        let n = f.degree() as u64;
        let rinv = up(prec, Float::with_val(prec, 1) / &f.disc.radius);
        let mut extra = Float::new(prec);
        if !f.tail.is_zero() {
            let m = tail_derivative_factor(&self.theta, &self.top, n);
            extra = umul(&umul(&f.tail, &rinv), &m);
        }
        if !f.error.is_zero() {
            extra = uadd(&extra, &umul(&umul(&f.error, &rinv), &sup_k_theta_pow(&self.theta, 1)));
        }
        if !extra.is_zero() {
            r = r.inflate(&extra);
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(_n: usize) -> (Disc, RoundingContext) {
        let ctx = RoundingContext::new(128);
        (Disc::standard(128), ctx)
    }

    fn real(ctx: &RoundingContext, v: f64) -> Rectangle {
        Rectangle::real(ctx.f64(v))
    }

    #[test]
    fn norm_examples() {
        let (d, ctx) = setup(4);
        let f = FunctionBall::from_coeffs(&d, 4, ctx, vec![real(&ctx, 1.0), real(&ctx, -2.0)])
            .with_tail_error(Float::with_val(128, 0.5), Float::new(128));
        assert_eq!(f.norm_upper(), 3.5);
        assert_eq!(FunctionBall::zero(&d, 4, ctx).norm_upper(), 0);
        for k in 0..=4 {
            assert_eq!(FunctionBall::basis(&d, 4, ctx, k).norm_upper(), 1);
        }
    }

    #[test]
    fn linear_examples() {
        let (d, ctx) = setup(4);
        let f = FunctionBall::from_coeffs(&d, 4, ctx, vec![real(&ctx, 0.25), real(&ctx, -1.5)])
            .with_tail_error(Float::with_val(128, 0.125), Float::with_val(128, 0.5));
        let z = FunctionBall::zero(&d, 4, ctx);
        assert_eq!(f.add(&z).unwrap(), f);
        let g = f.scale(&real(&ctx, -1.0)).add(&f).unwrap();
        assert!(g.coeffs().iter().all(|c| c.re.contains_zero()));
        assert_eq!(*g.tail(), 0.25);
        assert_eq!(*g.error(), 1.0);
        let e2 = FunctionBall::basis(&d, 4, ctx, 2);
        let s = e2.sub(&e2).unwrap();
        assert!(s.coeffs().iter().all(|c| c.re.contains_zero()));
        assert!(s.is_polynomial());
        let other = FunctionBall::zero(&d, 5, ctx);
        assert_eq!(f.add(&other), Err(Error::DomainMismatch));
    }

    #[test]
    fn mul_examples() {
        let (d, ctx) = setup(4);
        let e1 = FunctionBall::basis(&d, 4, ctx, 1);
        assert_eq!(e1.mul(&e1).unwrap(), FunctionBall::basis(&d, 4, ctx, 2));
        let one = FunctionBall::constant(&d, 4, ctx, ctx.one());
        let f = FunctionBall::from_coeffs(&d, 4, ctx, vec![real(&ctx, 0.5), real(&ctx, -1.5), real(&ctx, 2.0)]);
        assert_eq!(f.mul(&one).unwrap(), f);
        // e_3 * e_3 = e_6 spills all of its mass into the tail
        let e3 = FunctionBall::basis(&d, 4, ctx, 3);
        let sq = e3.mul(&e3).unwrap();
        assert_eq!(*sq.tail(), 1);
        assert!(sq.coeffs().iter().all(Rectangle::is_zero));
    }

    #[test]
    fn theta_examples() {
        let (d, ctx) = setup(4);
        let c = FunctionBall::constant(&d, 4, ctx, ctx.one());
        assert_eq!(c.theta(), 0);
        assert_eq!(FunctionBall::identity(&d, 4, ctx).theta(), 1);
        let a2 = ctx.f64(0.39953528052313449).sqr();
        let h = FunctionBall::affine_arg(&d, 4, ctx, &a2);
        let th = h.theta().to_f64();
        assert!((th - 0.4958).abs() < 1e-4, "{th}");
    }

    #[test]
    fn affine_examples() {
        let (d, ctx) = setup(4);
        let id = FunctionBall::affine_arg(&d, 4, ctx, &ctx.one());
        assert_eq!(id.coeffs()[0], real(&ctx, 1.0));
        assert_eq!(id.coeffs()[1], real(&ctx, 2.5));
        let z = FunctionBall::affine_arg(&d, 4, ctx, &ctx.zero());
        assert!(z.coeffs().iter().all(Rectangle::is_zero));
        let a2 = ctx.f64(-0.39953528052313449).sqr();
        let h = FunctionBall::affine_arg(&d, 4, ctx, &a2);
        assert!((h.coeffs()[0].re.mid().to_f64() - 0.1596284).abs() < 1e-6);
        assert!((h.coeffs()[1].re.mid().to_f64() - 0.3990710).abs() < 1e-6);
    }

    #[test]
    fn compose_examples() {
        let (d, ctx) = setup(6);
        let h = FunctionBall::from_coeffs(&d, 6, ctx, vec![real(&ctx, 1.25), real(&ctx, 0.5), real(&ctx, -0.25)]);
        let e1 = FunctionBall::basis(&d, 6, ctx, 1);
        let got = e1.compose(&h).unwrap();
        let want = h.normalized();
        for (a, b) in got.coeffs().iter().zip(want.coeffs()) {
            assert!(a.intersects(b));
            assert!(a.re.width() < 1e-30);
        }
        let f = FunctionBall::from_coeffs(&d, 6, ctx, vec![real(&ctx, 0.5), real(&ctx, -1.0), real(&ctx, 0.25)]);
        let id = FunctionBall::identity(&d, 6, ctx);
        let g = f.compose(&id).unwrap();
        for (a, b) in g.coeffs().iter().zip(f.coeffs()) {
            assert!(a.contains_rect(b));
            assert!(a.re.width() < 1e-30);
        }
        // identity has theta = 1, so a ball with a tail cannot be composed with it
        let ft = f.inflate(&Float::with_val(128, 0.1));
        assert!(matches!(ft.compose(&id), Err(Error::CompositionContractFailure { .. })));
    }

    #[test]
    fn compose_derivative_examples() {
        let (d, ctx) = setup(6);
        let e2 = FunctionBall::basis(&d, 6, ctx, 2);
        let c = FunctionBall::constant(&d, 6, ctx, ctx.one());
        let r = e2.compose_derivative(&c).unwrap();
        assert!(r.coeffs().iter().all(Rectangle::is_zero));
        let id = FunctionBall::identity(&d, 6, ctx);
        let h = FunctionBall::from_coeffs(&d, 6, ctx, vec![real(&ctx, 0.5), real(&ctx, 0.75)]);
        let one = id.compose_derivative(&h).unwrap();
        assert!(one.coeffs()[0].re.contains(&Float::with_val(128, 1)));
        assert!(one.coeffs()[1..].iter().all(|c| c.re.mag() < 1e-30));
        assert!(matches!(
            e2.compose_derivative(&id),
            Err(Error::CompositionContractFailure { .. })
        ));
    }

    #[test]
    fn eval_examples() {
        let (d, ctx) = setup(5);
        let c = Rectangle::real(ctx.one());
        for k in 1..=5 {
            let v = FunctionBall::basis(&d, 5, ctx, k).eval(&c).unwrap();
            assert!(v.is_zero());
        }
        let one = FunctionBall::constant(&d, 5, ctx, ctx.one());
        let z = Rectangle::new(ctx.f64(0.5), ctx.f64(1.25));
        assert_eq!(one.eval(&z).unwrap(), Rectangle::real(ctx.one()));
        let far = Rectangle::real(ctx.f64(4.0));
        assert!(matches!(one.eval(&far), Err(Error::PointOutsideDomain { .. })));
    }

    #[test]
    fn coeff_and_inflate_examples() {
        let (d, ctx) = setup(5);
        let e3 = FunctionBall::basis(&d, 5, ctx, 3);
        assert_eq!(e3.coeff(3).unwrap(), Rectangle::real(ctx.one()));
        assert!(e3.coeff(0).unwrap().is_zero());
        assert_eq!(e3.coeff(6), Err(Error::IndexBeyondTruncation { index: 6, degree: 5 }));
        assert_eq!(e3.inflate(&Float::new(128)), e3);
        let unit = FunctionBall::zero(&d, 5, ctx).inflate(&Float::with_val(128, 1));
        assert_eq!(unit.norm_upper(), 1);
    }

    #[test]
    fn majorants() {
        let th = Float::with_val(64, 0.5);
        // k 0.5^(k-1): 1, 1, 0.75, ...
        assert_eq!(sup_k_theta_pow(&th, 1), 1);
        // N = 3: 4 * 0.5^3 = 0.5 and 5 * 0.5 <= 4 holds
        assert_eq!(tail_derivative_majorant(&th, 3), 0.5);
        let th = Float::with_val(64, 0.9);
        let m = sup_k_theta_pow(&th, 1).to_f64();
        let brute = (1..200).map(|k| k as f64 * 0.9f64.powi(k - 1)).fold(0.0, f64::max);
        assert!(m >= brute * (1.0 - 1e-12) && m < brute * 1.0001);
        let fallback = tail_derivative_majorant(&th, 3).to_f64();
        assert!(fallback >= (4..400).map(|k| k as f64 * 0.9f64.powi(k - 1)).fold(0.0, f64::max));
    }

    #[test]
    fn text_roundtrip() {
        let (d, ctx) = setup(3);
        let third = ctx.ratio(1, 3).unwrap();
        let f = FunctionBall::from_coeffs(&d, 3, ctx, vec![Rectangle::real(third.clone()), Rectangle::new(third.neg(), third)])
            .with_tail_error(Float::with_val(128, 1e-20), Float::with_val(128, 3e-7));
        let back = FunctionBall::from_text(&f.to_text()).unwrap();
        assert_eq!(back, f);
        assert!(FunctionBall::from_text("garbage").is_err());
    }
}
