//! The doubling operator `T`, its derivative, the noise operator `L`, the
//! domain-extension check and recursive graph extension.
//!
//! With `a = G(1)` and `Q(x) = x^2`,
//!
//! ```text
//! T(G)(X) = a^-1 G(Q(G(a^2 X)))
//! ```
//!
//! All subexpressions shared by `T`, `DT` and `L` are computed once over the
//! whole input ball in [`SharedEvaluations`].

use rayon::prelude::*;
use rug::Float;

use crate::ball::{Disc, FunctionBall, PowerTable};
use crate::error::{Error, Result};
use crate::rounded::{up, Interval, Rectangle, RoundingContext};

fn tag(e: Error, what: &str) -> Error {
    match e {
        Error::CompositionContractFailure { theta, .. } => Error::CompositionContractFailure {
            what: what.to_string(),
            theta,
        },
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct SharedEvaluations {
    pub a: Rectangle,
    pub a2: Rectangle,
    pub ainv: Rectangle,
    /// `G(a^2 X)`
    pub inner: FunctionBall,
    /// `inner^2`
    pub squared: FunctionBall,
    /// `G(squared)`
    pub outer_comp: FunctionBall,
    /// `G'(squared)`
    pub deriv_outer: FunctionBall,
    /// `G'(a^2 X)`
    pub deriv_inner: FunctionBall,
    /// `a^-1 G'(squared) 2 inner`, the factor in front of `dG(a^2 X)`
    pub coupling: FunctionBall,
    /// `-a^-2 outer_comp + 4 G'(squared) inner G'(a^2 X) X`, multiplied by `dG(1)`
    pub da_terms: FunctionBall,
    /// powers of `(a^2 X - c) / r`
    pub p1: PowerTable,
    /// powers of `(squared - c) / r`
    pub p2: PowerTable,
}

impl SharedEvaluations {
    pub fn disc(&self) -> &Disc {
        self.inner.disc()
    }

    pub fn degree(&self) -> usize {
        self.inner.degree()
    }

    pub fn ctx(&self) -> RoundingContext {
        self.inner.ctx()
    }

    /// `sup ||DT(G) f_H||` over `||f_H|| <= 1` supported above degree `N`.
    pub fn dt_high_order_bound(&self) -> Float {
        let p = self.ctx().prec();
        let c1 = up(p, self.ainv.abs_upper() * self.p2.high_order_bound());
        let c2 = up(p, self.coupling.norm_upper() * self.p1.high_order_bound());
        let mut b = up(p, c1 + c2);
        // f_H(1) vanishes when the disc is centred at 1
        if *self.disc().center() != 1 {
            let t = up(p, (Float::with_val(p, 1) - self.disc().center()).abs() / self.disc().radius());
            let pw = up(p, rug::ops::Pow::pow(&t, (self.degree() + 1) as u32));
            b = up(p, b + pw * self.da_terms.norm_upper());
        }
        b
    }

    /// `sup ||L f_H||` over `||f_H|| <= 1` supported above degree `N`.
    pub fn l_high_order_bound(&self) -> Float {
        let p = self.ctx().prec();
        let ainv2 = self.ainv.sqr().abs_upper();
        let c = self.coupling.norm_upper();
        let c2 = up(p, &c * &c);
        let t1 = up(p, c2 * self.p1.high_order_bound());
        let t2 = up(p, ainv2 * self.p2.high_order_bound());
        up(p, t1 + t2)
    }
}

/// Computes every subexpression of `T(G)` once over the ball.
pub fn precompute_shared(g: &FunctionBall) -> Result<SharedEvaluations> {
    let disc = g.disc().clone();
    let ctx = g.ctx();
    let n = g.degree();
    let one = Rectangle::real(ctx.one());
    let a = g.eval(&one)?;
    if a.abs().mig().is_zero() {
        return Err(Error::NormalizationSingular);
    }
    let a2 = a.sqr();
    let ainv = a.recip().map_err(|_| Error::NormalizationSingular)?;
    let h1 = if a2.is_real() {
        FunctionBall::affine_arg(&disc, n, ctx, &a2.re)
    } else {
        FunctionBall::identity(&disc, n, ctx).scale(&a2)
    };
    let p1 = PowerTable::new(&h1, "G(a^2 X)").map_err(|e| tag(e, "G(a^2 X)"))?;
    let inner = p1.compose(g)?;
    let squared = inner.sqr()?;
    let p2 = PowerTable::new(&squared, "G(Q(G(a^2 X)))").map_err(|e| tag(e, "G(Q(G(a^2 X)))"))?;
    let outer_comp = p2.compose(g)?;
    let deriv_outer = p2.compose_derivative(g)?;
    let deriv_inner = p1.compose_derivative(g)?;
    let two_ainv = ainv.mul_interval(&ctx.int(2));
    let g_dot_inner = deriv_outer.mul(&inner)?;
    let coupling = g_dot_inner.scale(&two_ainv);
    let x = FunctionBall::identity(&disc, n, ctx);
    let neg_ainv2 = ainv.sqr().neg();
    let da_terms = outer_comp
        .scale(&neg_ainv2)
        .add(&g_dot_inner.mul(&deriv_inner)?.mul(&x)?.scale_real(&ctx.int(4)))?;
    Ok(SharedEvaluations {
        a,
        a2,
        ainv,
        inner,
        squared,
        outer_comp,
        deriv_outer,
        deriv_inner,
        coupling,
        da_terms,
        p1,
        p2,
    })
}

/// Enclosure of `T(G)` for every member `G`.
pub fn apply_t(g: &FunctionBall) -> Result<FunctionBall> {
    let s = precompute_shared(g)?;
    Ok(t_from_shared(&s))
}

pub fn t_from_shared(s: &SharedEvaluations) -> FunctionBall {
    s.outer_comp.scale(&s.ainv)
}

/// Enclosure of `DT(G) dG` for every `G` of the ball behind `s`.
pub fn apply_dt(s: &SharedEvaluations, dg: &FunctionBall) -> Result<FunctionBall> {
    let one = Rectangle::real(s.ctx().one());
    let da = dg.eval(&one)?;
    let mut r = s
        .p2
        .compose(dg)?
        .scale(&s.ainv)
        .add(&s.coupling.mul(&s.p1.compose(dg)?)?)?;
    if !da.is_zero() {
        r = r.add(&s.da_terms.scale(&da))?;
    }
    Ok(r)
}

/// Enclosure of `L(G) W = a^-2 (G'(Q(G(a^2 X))) 2 G(a^2 X))^2 W(a^2 X) + a^-2 W(Q(G(a^2 X)))`.
pub fn apply_l(s: &SharedEvaluations, w: &FunctionBall) -> Result<FunctionBall> {
    let c2 = s.coupling.sqr()?;
    let ainv2 = s.ainv.sqr();
    c2.mul(&s.p1.compose(w)?)?
        .add(&s.p2.compose(w)?.scale(&ainv2))
}

/// Rectangles covering the domain boundary and their images.
#[derive(Debug, Clone)]
pub struct DomainExtension {
    pub boundary: Vec<Rectangle>,
    /// enclosures of `a^2 z`
    pub gamma1: Vec<Rectangle>,
    /// enclosures of `Q(G(a^2 z))`
    pub gamma2: Vec<Rectangle>,
}

/// Points `exp(2 pi i j / m)` for `j = 0..=m`, `m` a power of two `>= 4`.
fn unit_roots(ctx: RoundingContext, m: usize) -> Vec<Rectangle> {
    // cos and sin of 2 pi / m by half-angle steps from pi / 2
    let mut c = ctx.zero();
    let mut s = ctx.one();
    let mut k = 4;
    let half = ctx.ratio(1, 2).expect("nonzero");
    while k < m {
        let one = ctx.one();
        let nc = one.add(&c).mul(&half).sqrt().expect("nonnegative");
        let ns = one.sub(&c).mul(&half).sqrt().expect("nonnegative");
        c = nc;
        s = ns;
        k *= 2;
    }
    let w = Rectangle::new(c, s);
    let q = m / 4;
    let mut first = vec![Rectangle::real(ctx.one())];
    for j in 1..q {
        let next = first[j - 1].mul(&w);
        first.push(next);
    }
    first.push(Rectangle::new(ctx.zero(), ctx.one()));
    let mut pts = Vec::with_capacity(m + 1);
    for quad in 0..4 {
        for (j, z) in first.iter().enumerate() {
            if j == q && quad < 3 {
                continue;
            }
            // rotate by i^quad
            let r = match quad {
                0 => z.clone(),
                1 => Rectangle::new(z.im.neg(), z.re.clone()),
                2 => z.neg(),
                _ => Rectangle::new(z.im.clone(), z.re.neg()),
            };
            pts.push(r);
        }
    }
    pts
}

/// Boundary of the disc covered by `m` rectangles, one per equal-angle arc.
pub fn boundary_covering(disc: &Disc, ctx: RoundingContext, m: usize) -> Result<Vec<Rectangle>> {
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "boundary rectangle count must be a power of two >= 4, got {m}"
        )));
    }
    let pts = unit_roots(ctx, m);
    let c = Rectangle::real(ctx.float(disc.center()));
    let r = ctx.float(disc.radius());
    // each arc lies within one quadrant, so the box spanned by its endpoints contains it
    Ok(pts
        .windows(2)
        .map(|w| w[0].hull(&w[1]).mul_interval(&r).add(&c))
        .collect())
}

/// Verifies that `a^2 z` and `Q(G(a^2 z))` lie strictly inside the disc for
/// every `z` on its boundary and every `G` in the ball.
pub fn check_domain_extension(g: &FunctionBall, m: usize) -> Result<DomainExtension> {
    let ctx = g.ctx();
    let disc = g.disc();
    let boundary = boundary_covering(disc, ctx, m)?;
    let one = Rectangle::real(ctx.one());
    let a = g.eval(&one)?;
    let a2 = a.sqr();
    let c = Rectangle::real(ctx.float(disc.center()));
    let r = disc.radius();
    let results: Vec<std::result::Result<(Rectangle, Rectangle), &'static str>> = boundary
        .par_iter()
        .map(|z| {
            let w = a2.mul(z);
            if !(w.sub(&c).abs_upper() < *r) {
                return Err("a^2 z not strictly inside the domain");
            }
            let y = g.eval(&w).map_err(|_| "G(a^2 z) not evaluable")?;
            let q = y.sqr();
            if !(q.sub(&c).abs_upper() < *r) {
                return Err("Q(G(a^2 z)) not strictly inside the domain");
            }
            Ok((w, q))
        })
        .collect();
    let mut gamma1 = Vec::with_capacity(m);
    let mut gamma2 = Vec::with_capacity(m);
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok((w, q)) => {
                gamma1.push(w);
                gamma2.push(q);
            }
            Err(condition) => {
                return Err(Error::ContainmentFailure {
                    index,
                    condition: condition.to_string(),
                })
            }
        }
    }
    Ok(DomainExtension {
        boundary,
        gamma1,
        gamma2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtendTarget {
    /// `G*(X)`
    UpperG,
    /// `g*(x) = G*(x^2)`
    LowerG,
    UpperV,
    LowerV,
    UpperW,
    LowerW,
}

/// Certified balls and constants needed to extend graphs beyond the disc.
#[derive(Debug, Clone)]
pub struct Extender {
    g: FunctionBall,
    v: Option<(FunctionBall, Interval)>,
    w: Option<(FunctionBall, Interval)>,
    a2: Rectangle,
    ainv: Rectangle,
}

impl Extender {
    pub fn new(g: FunctionBall) -> Result<Self> {
        let ctx = g.ctx();
        let a = g.eval(&Rectangle::real(ctx.one()))?;
        let ainv = a.recip().map_err(|_| Error::NormalizationSingular)?;
        Ok(Extender {
            a2: a.sqr(),
            ainv,
            g,
            v: None,
            w: None,
        })
    }

    /// Eigenfunction `V` with its eigenvalue enclosure `delta`.
    pub fn with_delta(mut self, v: FunctionBall, delta: Interval) -> Self {
        self.v = Some((v, delta));
        self
    }

    /// Eigenfunction `W` with `gamma` (eigenvalue of `L` is `gamma^2`).
    pub fn with_gamma(mut self, w: FunctionBall, gamma: Interval) -> Self {
        self.w = Some((w, gamma));
        self
    }

    fn inside(&self, x: &Rectangle) -> Result<Float> {
        let d = self.g.disc();
        let c = Rectangle::real(self.g.ctx().float(d.center()));
        let r = self.g.ctx().float(d.radius());
        Ok(x.sub(&c).div(&Rectangle::real(r))?.abs_upper())
    }

    fn eval_g(&self, x: &Rectangle, depth: usize) -> Result<Rectangle> {
        if self.inside(x)? <= 1 {
            return self.g.eval(x);
        }
        if depth == 0 {
            return Err(Error::DepthExceeded { depth });
        }
        let y = self.eval_g(&self.a2.mul(x), depth - 1)?;
        Ok(self.ainv.mul(&self.eval_g(&y.sqr(), depth - 1)?))
    }

    fn eval_dg(&self, x: &Rectangle, depth: usize) -> Result<Rectangle> {
        let tau = self.inside(x)?;
        if tau <= 0.75 || (depth == 0 && tau < 1) {
            return self.g.eval_derivative(x);
        }
        if depth == 0 {
            return Err(Error::DepthExceeded { depth });
        }
        let ax = self.a2.mul(x);
        let y = self.eval_g(&ax, depth - 1)?;
        let s = y.sqr();
        let two = Rectangle::real(self.g.ctx().int(2));
        Ok(self
            .ainv
            .mul(&self.eval_dg(&s, depth - 1)?)
            .mul(&two)
            .mul(&y)
            .mul(&self.eval_dg(&ax, depth - 1)?)
            .mul(&self.a2))
    }

    fn eval_v(&self, x: &Rectangle, depth: usize) -> Result<Rectangle> {
        let (v, delta) = self.v.as_ref().ok_or_else(|| Error::MissingCertificate("delta".into()))?;
        if self.inside(x)? <= 1 {
            return v.eval(x);
        }
        if depth == 0 {
            return Err(Error::DepthExceeded { depth });
        }
        let d = depth - 1;
        let ctx = self.g.ctx();
        let delta = Rectangle::real(delta.clone());
        let ax = self.a2.mul(x);
        let y = self.eval_g(&ax, d)?;
        let s = y.sqr();
        let two = Rectangle::real(ctx.int(2));
        let coupling = self.ainv.mul(&self.eval_dg(&s, d)?).mul(&two).mul(&y);
        // V(1) = delta plays the role of the variation of a
        let a = self.ainv.recip()?;
        let t14 = self.ainv.sqr().mul(&delta).mul(&self.eval_g(&s, d)?).neg();
        let t15 = self.ainv.mul(&self.eval_v(&s, d)?);
        let t16 = coupling.mul(&self.eval_v(&ax, d)?);
        let t17 = coupling
            .mul(&self.eval_dg(&ax, d)?)
            .mul(&two)
            .mul(x)
            .mul(&a)
            .mul(&delta);
        t14.add(&t15).add(&t16).add(&t17).div(&delta)
    }

    fn eval_w(&self, x: &Rectangle, depth: usize) -> Result<Rectangle> {
        let (w, gamma) = self.w.as_ref().ok_or_else(|| Error::MissingCertificate("gamma".into()))?;
        if self.inside(x)? <= 1 {
            return w.eval(x);
        }
        if depth == 0 {
            return Err(Error::DepthExceeded { depth });
        }
        let d = depth - 1;
        let ctx = self.g.ctx();
        let ax = self.a2.mul(x);
        let y = self.eval_g(&ax, d)?;
        let s = y.sqr();
        let two = Rectangle::real(ctx.int(2));
        let coupling = self.ainv.mul(&self.eval_dg(&s, d)?).mul(&two).mul(&y);
        let t1 = coupling.sqr().mul(&self.eval_w(&ax, d)?);
        let t2 = self.ainv.sqr().mul(&self.eval_w(&s, d)?);
        let g2 = Rectangle::real(gamma.sqr());
        t1.add(&t2).div(&g2)
    }

    /// Enclosure of `target` at `x`, unfolding the functional equations at
    /// most `depth` times.
    pub fn eval(&self, target: ExtendTarget, x: &Interval, depth: usize) -> Result<Rectangle> {
        let xr = Rectangle::real(x.clone());
        let big = Rectangle::real(x.sqr());
        match target {
            ExtendTarget::UpperG => self.eval_g(&xr, depth),
            ExtendTarget::LowerG => self.eval_g(&big, depth),
            ExtendTarget::UpperV => self.eval_v(&xr, depth),
            ExtendTarget::LowerV => self.eval_v(&big, depth),
            ExtendTarget::UpperW => self.eval_w(&xr, depth),
            ExtendTarget::LowerW => self.eval_w(&big, depth),
        }
    }
}

/// Free-function form of [`Extender::eval`].
pub fn extend_recursive(ext: &Extender, target: ExtendTarget, x: &Interval, depth: usize) -> Result<Rectangle> {
    ext.eval(target, x, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx;

    fn g0_ball(prec: u32) -> FunctionBall {
        let disc = Disc::standard(prec);
        let g = approx::default_seed(prec);
        FunctionBall::from_floats(&disc, g.len() - 1, RoundingContext::new(prec), &g)
    }

    #[test]
    fn constant_one_input() {
        let disc = Disc::standard(64);
        let ctx = RoundingContext::new(64);
        let g = FunctionBall::constant(&disc, 6, ctx, ctx.one());
        let s = precompute_shared(&g).unwrap();
        assert_eq!(s.a, Rectangle::real(ctx.one()));
        assert_eq!(s.inner.coeffs()[0], Rectangle::real(ctx.one()));
        assert_eq!(s.squared.coeffs()[0], Rectangle::real(ctx.one()));
    }

    #[test]
    fn normalisation_at_zero_is_singular() {
        let disc = Disc::standard(64);
        let ctx = RoundingContext::new(64);
        let g = FunctionBall::zero(&disc, 4, ctx);
        assert_eq!(precompute_shared(&g).err(), Some(Error::NormalizationSingular));
    }

    #[test]
    fn seed_normalisation_and_residual() {
        let g = g0_ball(128);
        let s = precompute_shared(&g).unwrap();
        let mid = s.a.re.mid().to_f64();
        assert!((mid + 0.39953528052313449).abs() < 1e-25, "a {mid}");
        let t = t_from_shared(&s);
        let diff = t.sub(&g).unwrap().norm_upper();
        assert!(diff < 1e-10, "residual {diff}");
        let th = s.p1.theta().to_f64();
        assert!((th - 0.4958).abs() < 1e-3, "theta1 {th}");
        assert!(*s.p2.theta() < 1);
    }

    #[test]
    fn dt_vanishing_da_terms() {
        let g = g0_ball(96);
        let s = precompute_shared(&g).unwrap();
        let ctx = g.ctx();
        for k in 1..4 {
            let e = FunctionBall::basis(g.disc(), g.degree(), ctx, k);
            let direct = s.p2.compose(&e).unwrap().scale(&s.ainv).add(&s.coupling.mul(&s.p1.compose(&e).unwrap()).unwrap()).unwrap();
            assert_eq!(apply_dt(&s, &e).unwrap(), direct);
        }
    }

    #[test]
    fn l_is_linear() {
        let g = g0_ball(96);
        let s = precompute_shared(&g).unwrap();
        let ctx = g.ctx();
        let w = FunctionBall::basis(g.disc(), g.degree(), ctx, 2);
        let z = FunctionBall::zero(g.disc(), g.degree(), ctx);
        assert!(apply_l(&s, &z).unwrap().norm_upper().is_zero());
        let l1 = apply_l(&s, &w).unwrap();
        let l2 = apply_l(&s, &w.scale_real(&ctx.int(2))).unwrap();
        let l1x2 = l1.scale_real(&ctx.int(2));
        for (x, y) in l2.coeffs().iter().zip(l1x2.coeffs()) {
            assert!(x.intersects(y));
        }
    }

    #[test]
    fn covering_contains_boundary_samples() {
        let ctx = RoundingContext::new(64);
        let disc = Disc::standard(64);
        let rects = boundary_covering(&disc, ctx, 16).unwrap();
        assert_eq!(rects.len(), 16);
        for j in 0..160 {
            let t = std::f64::consts::TAU * (j as f64 + 0.5) / 160.0;
            let (x, y) = (1.0 + 2.5 * t.cos(), 2.5 * t.sin());
            let k = j / 10;
            assert!(rects[k].contains(&Float::with_val(64, x), &Float::with_val(64, y)), "sample {j}");
        }
        assert!(boundary_covering(&disc, ctx, 2).is_err());
        assert!(boundary_covering(&disc, ctx, 12).is_err());
    }

    #[test]
    fn domain_extension_on_seed() {
        let g = g0_ball(96);
        let ext = check_domain_extension(&g, 64).unwrap();
        assert_eq!(ext.gamma2.len(), 64);
        let fat = g.inflate(&Float::with_val(96, 1));
        assert!(matches!(check_domain_extension(&fat, 64), Err(Error::ContainmentFailure { .. })));
    }

    #[test]
    fn recursive_extension_consistency() {
        let g = g0_ball(128);
        let ctx = g.ctx();
        let e = Extender::new(g.clone()).unwrap();
        let x = ctx.f64(0.7);
        let direct = g.eval(&Rectangle::real(x.sqr())).unwrap();
        assert_eq!(e.eval(ExtendTarget::LowerG, &x, 0).unwrap(), direct);
        let one = e.eval(ExtendTarget::LowerG, &ctx.one(), 0).unwrap();
        assert!((one.re.mid().to_f64() + 0.39953528052313449).abs() < 1e-15);
        // outside the disc: x = 2 gives X = 4 > 3.5
        let far = e.eval(ExtendTarget::LowerG, &ctx.int(2), 3).unwrap();
        assert!(far.re.width() < 1e-10);
        assert!(matches!(
            e.eval(ExtendTarget::LowerG, &ctx.int(2), 0),
            Err(Error::DepthExceeded { .. })
        ));
    }
}
