//! Non-rigorous bootstrap numerics in round-to-nearest multi-precision
//! arithmetic: approximate fixed point `G0`, eigenpairs `(V0, delta0)` and
//! `(W0, gamma0)`, Jacobians, and the approximate inverses used as `Lambda`.
//!
//! Nothing here needs to be exact. The certifier takes whatever this module
//! produces and either proves a ball around it or reports failure.

use nalgebra::DMatrix;
use rug::Float;

use crate::ball::Disc;
use crate::certify::{LinearMap, ProblemKind};
use crate::error::{Error, Result};

pub type DenseVector = Vec<Float>;

/// Square matrix of round-to-nearest floats, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    prec: u32,
    data: Vec<Float>,
}

impl DenseMatrix {
    pub fn zeros(n: usize, prec: u32) -> Self {
        DenseMatrix {
            n,
            prec,
            data: vec![Float::new(prec); n * n],
        }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut m = Self::zeros(n, prec);
        for i in 0..n {
            m.data[i * n + i] = Float::with_val(prec, 1);
        }
        m
    }

    pub fn from_columns(cols: &[DenseVector], prec: u32) -> Self {
        let n = cols.len();
        let mut m = Self::zeros(n, prec);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n, "column length mismatch");
            for (i, v) in c.iter().enumerate() {
                m.data[i * n + j] = Float::with_val(prec, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn get(&self, i: usize, j: usize) -> &Float {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Float) {
        self.data[i * self.n + j] = v;
    }

    pub fn column(&self, j: usize) -> DenseVector {
        (0..self.n).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn mul_vec(&self, v: &[Float]) -> DenseVector {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = Float::new(self.prec);
                for (j, x) in v.iter().enumerate() {
                    acc += self.get(i, j) * x;
                }
                acc
            })
            .collect()
    }

    pub fn mul(&self, o: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut r = Self::zeros(n, self.prec);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    r.data[i * n + j] += a * o.get(k, j);
                }
            }
        }
        r
    }

    pub fn sub_scaled_identity(&self, s: &Float) -> DenseMatrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] -= s;
        }
        m
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).to_f64())
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        let lu = self.lu()?;
        let n = self.n;
        let cols: Vec<DenseVector> = (0..n)
            .map(|j| {
                let mut e = vec![Float::new(self.prec); n];
                e[j] = Float::with_val(self.prec, 1);
                lu.solve(&e)
            })
            .collect();
        Ok(DenseMatrix::from_columns(&cols, self.prec))
    }
}

/// LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    prec: u32,
    lu: Vec<Float>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &DenseMatrix) -> Result<Lu> {
        let n = m.n;
        let mut a = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
        for k in 0..n {
            let (piv, best) = (k..n)
                .map(|i| (i, Float::with_val(m.prec, &*a[i * n + k].as_abs())))
                .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite"))
                .expect("non-empty");
            if best.is_zero() || best.to_f64() <= scale * 1e-300 {
                return Err(Error::SingularJacobian);
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let pivot = a[k * n + k].clone();
            for i in (k + 1)..n {
                if a[i * n + k].is_zero() {
                    continue;
                }
                let f = Float::with_val(m.prec, &a[i * n + k] / &pivot);
                for j in (k + 1)..n {
                    let t = Float::with_val(m.prec, &f * &a[k * n + j]);
                    a[i * n + j] -= t;
                }
                a[i * n + k] = f;
            }
        }
        Ok(Lu {
            n,
            prec: m.prec,
            lu: a,
            perm,
        })
    }

    pub fn solve(&self, b: &[Float]) -> DenseVector {
        let n = self.n;
        let mut x: Vec<Float> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let t = Float::with_val(self.prec, &self.lu[i * n + j] * &x[j]);
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let t = Float::with_val(self.prec, &self.lu[i * n + j] * &x[j]);
                x[i] -= t;
            }
            x[i] /= &self.lu[i * n + i];
        }
        x
    }
}

fn max_abs(v: &[Float]) -> f64 {
    v.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
}

/// Truncated polynomial arithmetic in the scaled basis of a disc.
#[derive(Debug, Clone)]
struct PolyOps {
    n: usize,
    prec: u32,
    center: Float,
    radius: Float,
}

impl PolyOps {
    fn new(disc: &Disc, n: usize, prec: u32) -> Self {
        PolyOps {
            n,
            prec,
            center: Float::with_val(prec, disc.center()),
            radius: Float::with_val(prec, disc.radius()),
        }
    }

    fn zero(&self) -> DenseVector {
        vec![Float::new(self.prec); self.n + 1]
    }

    fn mul(&self, a: &[Float], b: &[Float]) -> DenseVector {
        let mut r = self.zero();
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate().take(self.n + 1 - i) {
                r[i + j] += x * y;
            }
        }
        r
    }

    fn add(&self, a: &[Float], b: &[Float]) -> DenseVector {
        a.iter().zip(b).map(|(x, y)| Float::with_val(self.prec, x + y)).collect()
    }

    fn scale(&self, a: &[Float], s: &Float) -> DenseVector {
        a.iter().map(|x| Float::with_val(self.prec, x * s)).collect()
    }

    fn normalized(&self, h: &[Float]) -> DenseVector {
        let mut p: DenseVector = h.iter().map(|x| Float::with_val(self.prec, x / &self.radius)).collect();
        p[0] -= Float::with_val(self.prec, &self.center / &self.radius);
        p
    }

    /// `p^k` for `k = 0..=N`.
    fn powers(&self, p: &[Float]) -> Vec<DenseVector> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut one = self.zero();
        one[0] = Float::with_val(self.prec, 1);
        out.push(one);
        for k in 1..=self.n {
            let next = self.mul(&out[k - 1], p);
            out.push(next);
        }
        out
    }

    fn combine(&self, f: &[Float], powers: &[DenseVector]) -> DenseVector {
        let mut r = self.zero();
        for (fk, pk) in f.iter().zip(powers) {
            if fk.is_zero() {
                continue;
            }
            for (ri, x) in r.iter_mut().zip(pk) {
                *ri += fk * x;
            }
        }
        r
    }

    fn derivative(&self, f: &[Float]) -> DenseVector {
        let mut d = self.zero();
        for k in 1..=self.n {
            d[k - 1] = Float::with_val(self.prec, &f[k] * k as u32) / &self.radius;
        }
        d
    }

    fn affine(&self, s: &Float) -> DenseVector {
        let mut h = self.zero();
        h[0] = Float::with_val(self.prec, s * &self.center);
        h[1] = Float::with_val(self.prec, s * &self.radius);
        h
    }
}

/// Midpoint versions of the subexpressions shared by `T`, `DT` and `L`.
struct MidShared {
    ops: PolyOps,
    a: Float,
    p1_powers: Vec<DenseVector>,
    p2_powers: Vec<DenseVector>,
    outer: DenseVector,
    /// `-a^-2 G(Q(G(a^2 X))) + 4 G'(Q(G(a^2X))) G(a^2 X) G'(a^2 X) X`, the
    /// coefficient of `delta a` in `DT(G)`.
    da_terms: DenseVector,
    /// `a^-1 G'(Q(G(a^2X))) 2 G(a^2X)`.
    coupling: DenseVector,
}

impl MidShared {
    fn new(ops: &PolyOps, g: &[Float]) -> Self {
        let prec = ops.prec;
        // c = 1, so G(1) is the constant coefficient
        let a = g[0].clone();
        let a2 = Float::with_val(prec, a.square_ref());
        let h1 = ops.affine(&a2);
        let p1_powers = ops.powers(&ops.normalized(&h1));
        let inner = ops.combine(g, &p1_powers);
        let sq = ops.mul(&inner, &inner);
        let p2_powers = ops.powers(&ops.normalized(&sq));
        let outer = ops.combine(g, &p2_powers);
        let dg = ops.derivative(g);
        let d_outer = ops.combine(&dg, &p2_powers);
        let d_inner = ops.combine(&dg, &p1_powers);
        let ainv = Float::with_val(prec, a.recip_ref());
        let ainv2 = Float::with_val(prec, ainv.square_ref());
        let coupling = ops.scale(&ops.mul(&d_outer, &inner), &Float::with_val(prec, &ainv * 2u32));
        let x = ops.affine(&Float::with_val(prec, 1));
        let t17 = ops.scale(
            &ops.mul(&ops.mul(&ops.mul(&d_outer, &inner), &d_inner), &x),
            &Float::with_val(prec, 4),
        );
        let t14 = ops.scale(&outer, &Float::with_val(prec, -&ainv2));
        MidShared {
            ops: ops.clone(),
            a,
            p1_powers,
            p2_powers,
            outer,
            da_terms: ops.add(&t14, &t17),
            coupling,
        }
    }

    fn t(&self) -> DenseVector {
        let ainv = Float::with_val(self.ops.prec, self.a.recip_ref());
        self.ops.scale(&self.outer, &ainv)
    }

    /// Column `k` of the truncated `DT(G)` (or the simplified operator
    /// without the `delta a` terms).
    fn dt_column(&self, k: usize, full: bool) -> DenseVector {
        let ops = &self.ops;
        let ainv = Float::with_val(ops.prec, self.a.recip_ref());
        let mut col = ops.add(
            &ops.scale(&self.p2_powers[k], &ainv),
            &ops.mul(&self.coupling, &self.p1_powers[k]),
        );
        // delta a = e_k(1) = [k == 0]
        if k == 0 && full {
            col = ops.add(&col, &self.da_terms);
        }
        col
    }

    fn l_column(&self, k: usize) -> DenseVector {
        let ops = &self.ops;
        let ainv = Float::with_val(ops.prec, self.a.recip_ref());
        let ainv2 = Float::with_val(ops.prec, ainv.square_ref());
        // a^-2 (G'(..) 2 G(..))^2 = coupling^2
        let c2 = ops.mul(&self.coupling, &self.coupling);
        ops.add(
            &ops.mul(&c2, &self.p1_powers[k]),
            &ops.scale(&self.p2_powers[k], &ainv2),
        )
    }

    fn dt_matrix(&self, full: bool) -> DenseMatrix {
        let cols: Vec<DenseVector> = (0..=self.ops.n).map(|k| self.dt_column(k, full)).collect();
        DenseMatrix::from_columns(&cols, self.ops.prec)
    }

    fn l_matrix(&self) -> DenseMatrix {
        let cols: Vec<DenseVector> = (0..=self.ops.n).map(|k| self.l_column(k)).collect();
        DenseMatrix::from_columns(&cols, self.ops.prec)
    }
}

/// Bits of working precision for `digits` decimal digits.
pub fn digits_to_bits(digits: u32) -> u32 {
    ((digits as f64) * 3.322).ceil() as u32 + 4
}

/// Degree-1 starting guess `G(X) = 1 - 1.5276 X` expressed on `disc`.
pub fn quadratic_seed(disc: &Disc, prec: u32) -> DenseVector {
    let s = Float::with_val(prec, Float::parse("-1.5276").expect("literal"));
    let c0 = Float::with_val(prec, &s * disc.center()) + 1u32;
    let c1 = Float::with_val(prec, &s * disc.radius());
    vec![c0, c1]
}

const SEED_N20: &str = include_str!("../data/seed_n20.txt");

/// Shipped starting coefficients (degree 20, 30 digits) on `D(1, 2.5)`.
pub fn default_seed(prec: u32) -> DenseVector {
    SEED_N20
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| Float::with_val(prec, Float::parse(l).expect("seed file holds decimal literals")))
        .collect()
}

/// `T(G)` truncated to degree `N` in midpoint arithmetic.
pub fn apply_t_midpoint(disc: &Disc, g: &[Float], prec: u32) -> DenseVector {
    let ops = PolyOps::new(disc, g.len() - 1, prec);
    MidShared::new(&ops, g).t()
}

/// Truncated matrix of `DT(G)` (columns are images of `e_k`); `full = false`
/// drops the two terms that vary `a`.
pub fn dt_matrix(disc: &Disc, g: &[Float], prec: u32, full: bool) -> DenseMatrix {
    let ops = PolyOps::new(disc, g.len() - 1, prec);
    MidShared::new(&ops, g).dt_matrix(full)
}

/// Truncated matrix of the noise operator `L(G)`.
pub fn l_matrix(disc: &Disc, g: &[Float], prec: u32) -> DenseMatrix {
    let ops = PolyOps::new(disc, g.len() - 1, prec);
    MidShared::new(&ops, g).l_matrix()
}

/// Newton iteration for `T(G) = G` on the truncated coefficient vector.
///
/// `seed` may be shorter or longer than `degree + 1`; it is padded with zeros
/// or truncated.
pub fn approx_fixed_point(disc: &Disc, degree: usize, digits: u32, seed: &[Float]) -> Result<DenseVector> {
    let prec = digits_to_bits(digits);
    let ops = PolyOps::new(disc, degree, prec);
    let mut g = ops.zero();
    for (gi, s) in g.iter_mut().zip(seed) {
        *gi = Float::with_val(prec, s);
    }
    let tol = 10f64.powi(-(digits as i32 - 4));
    let max_iter = 60;
    let mut res = f64::INFINITY;
    for _ in 0..max_iter {
        let s = MidShared::new(&ops, &g);
        let f: DenseVector = s.t().iter().zip(&g).map(|(t, x)| Float::with_val(prec, t - x)).collect();
        res = max_abs(&f);
        if !res.is_finite() {
            break;
        }
        if res < tol {
            return Ok(g);
        }
        let jac = s.dt_matrix(true).sub_scaled_identity(&Float::with_val(prec, 1));
        let dx = jac.lu()?.solve(&f);
        for (gi, d) in g.iter_mut().zip(&dx) {
            *gi -= d;
        }
    }
    Err(Error::NewtonDivergence {
        iterations: max_iter,
        residual: format!("{res:e}"),
    })
}

/// Staged continuation: solve at the shipped degree-20 seed, then double the
/// degree until `degree` is reached.
pub fn approx_fixed_point_staged(disc: &Disc, degree: usize, digits: u32) -> Result<DenseVector> {
    let prec = digits_to_bits(digits);
    let mut g = default_seed(prec);
    let mut n = 20.min(degree);
    loop {
        g = approx_fixed_point(disc, n, digits, &g)?;
        if n == degree {
            return Ok(g);
        }
        n = (2 * n).min(degree);
    }
}

/// Jacobian of the residual map of `kind` at `x0` (midpoint, truncated).
///
/// For the eigen kinds `g0` is the fixed point and `x0` the eigenfunction;
/// for `FixedPoint` `x0` is `G` itself and `g0` is ignored.
pub fn approx_jacobian(disc: &Disc, kind: ProblemKind, g0: &[Float], x0: &[Float], prec: u32) -> DenseMatrix {
    let n1 = x0.len();
    match kind {
        ProblemKind::FixedPoint => {
            dt_matrix(disc, x0, prec, true).sub_scaled_identity(&Float::with_val(prec, 1))
        }
        ProblemKind::DeltaEigen => {
            let m = dt_matrix(disc, g0, prec, true);
            let mut j = m.sub_scaled_identity(&x0[0]);
            for i in 0..n1 {
                let v = Float::with_val(prec, j.get(i, 0) - &x0[i]);
                j.set(i, 0, v);
            }
            j
        }
        ProblemKind::GammaEigen => {
            let m = l_matrix(disc, g0, prec);
            let lam2 = Float::with_val(prec, x0[0].square_ref());
            let mut j = m.sub_scaled_identity(&lam2);
            let two_lam = Float::with_val(prec, &x0[0] * 2u32);
            for i in 0..n1 {
                let v = Float::with_val(prec, j.get(i, 0) - &two_lam * &x0[i]);
                j.set(i, 0, v);
            }
            j
        }
    }
}

/// Eigenvalues of a midpoint matrix, computed in double precision.
pub fn spectrum(m: &DenseMatrix) -> Vec<(f64, f64)> {
    m.to_f64()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

/// Eigenpair of the chosen kind, normalised so that the constant coefficient
/// equals the eigenvalue (`delta`) or its square root (`gamma`).
pub fn approx_eigenpair(disc: &Disc, kind: ProblemKind, g0: &[Float], digits: u32) -> Result<(DenseVector, Float)> {
    let prec = digits_to_bits(digits);
    let (m, target) = match kind {
        ProblemKind::DeltaEigen => (dt_matrix(disc, g0, prec, true), Some(4.669)),
        ProblemKind::GammaEigen => (l_matrix(disc, g0, prec), None),
        ProblemKind::FixedPoint => {
            return Err(Error::InvalidConfig("fixed point has no eigenpair".into()))
        }
    };
    let spec = spectrum(&m);
    let real: Vec<f64> = spec
        .iter()
        .filter(|(re, im)| im.abs() <= 1e-9 * re.abs().max(1.0))
        .map(|(re, _)| *re)
        .collect();
    let sigma = match target {
        Some(t) => {
            let mut c: Vec<f64> = real.iter().copied().filter(|x| x.abs() > 1.0).collect();
            c.sort_by(|x, y| (x - t).abs().partial_cmp(&(y - t).abs()).expect("finite"));
            select_unique(&c, |x| (x - t).abs())?
        }
        None => {
            let mut c: Vec<(f64, f64)> = spec.clone();
            c.sort_by(|x, y| y.0.hypot(y.1).partial_cmp(&x.0.hypot(x.1)).expect("finite"));
            if c.is_empty() || c[0].1.abs() > 1e-9 * c[0].0.abs() {
                return Err(Error::EigenSelectionAmbiguous("dominant eigenvalue is not real".into()));
            }
            let mags: Vec<f64> = c.iter().map(|z| z.0.hypot(z.1)).collect();
            select_unique(&mags, |x| -x).map(|_| c[0].0)?
        }
    };
    // inverse iteration with the double-precision shift, then Newton
    let shift = Float::with_val(prec, sigma);
    let lu = m.sub_scaled_identity(&shift).lu()?;
    let mut v: DenseVector = (0..m.dim()).map(|i| Float::with_val(prec, 1.0 / (1.0 + i as f64))).collect();
    for _ in 0..6 {
        v = lu.solve(&v);
        let s = max_abs(&v);
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    let mv = m.mul_vec(&v);
    let jmax = (0..v.len())
        .max_by(|&i, &j| v[i].to_f64().abs().partial_cmp(&v[j].to_f64().abs()).expect("finite"))
        .expect("non-empty");
    let mu = Float::with_val(prec, &mv[jmax] / &v[jmax]);
    let lambda = match kind {
        ProblemKind::DeltaEigen => mu,
        _ => Float::with_val(prec, mu.sqrt_ref()),
    };
    if v[0].is_zero() {
        return Err(Error::EigenSelectionAmbiguous("eigenvector has vanishing constant coefficient".into()));
    }
    let scale = Float::with_val(prec, &lambda / &v[0]);
    for x in v.iter_mut() {
        *x *= &scale;
    }
    let tol = 10f64.powi(-(digits as i32 - 4));
    let mut res = f64::INFINITY;
    for _ in 0..40 {
        let lam = v[0].clone();
        let mv = m.mul_vec(&v);
        let factor = match kind {
            ProblemKind::DeltaEigen => lam.clone(),
            _ => Float::with_val(prec, lam.square_ref()),
        };
        let f: DenseVector = mv.iter().zip(&v).map(|(a, b)| Float::with_val(prec, a - &factor * b)).collect();
        res = max_abs(&f);
        if res < tol {
            return Ok((v.clone(), lam));
        }
        let j = approx_jacobian(disc, kind, g0, &v, prec);
        let dx = j.lu()?.solve(&f);
        for (x, d) in v.iter_mut().zip(&dx) {
            *x -= d;
        }
    }
    Err(Error::NewtonDivergence {
        iterations: 40,
        residual: format!("{res:e}"),
    })
}

fn select_unique(sorted: &[f64], key: impl Fn(f64) -> f64) -> Result<f64> {
    match sorted {
        [] => Err(Error::EigenSelectionAmbiguous("no candidate eigenvalue".into())),
        [x] => Ok(*x),
        [x, y, ..] => {
            if (key(*x) - key(*y)).abs() < 1e-6 {
                Err(Error::EigenSelectionAmbiguous(format!("{x} and {y} are indistinguishable")))
            } else {
                Ok(*x)
            }
        }
    }
}

/// `Lambda = jac^-1` with the tail scalar for `kind`.
///
/// `lambda0` is the approximate eigenvalue for the eigen kinds (`delta0`, or
/// `gamma0` whose square enters the tail).
pub fn build_lambda(kind: ProblemKind, jac: &DenseMatrix, lambda0: Option<&Float>, target_prec: u32) -> Result<LinearMap> {
    let inv = jac.inverse()?;
    let n = inv.dim();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(Float::with_val(target_prec, inv.get(i, j)));
        }
    }
    let tail = match kind {
        ProblemKind::FixedPoint => Float::with_val(target_prec, -1),
        ProblemKind::DeltaEigen => {
            let l = lambda0.ok_or_else(|| Error::InvalidConfig("delta tail needs lambda0".into()))?;
            -Float::with_val(target_prec, l.recip_ref())
        }
        ProblemKind::GammaEigen => {
            let l = lambda0.ok_or_else(|| Error::InvalidConfig("gamma tail needs gamma0".into()))?;
            let l2 = Float::with_val(target_prec * 2, l.square_ref());
            -Float::with_val(target_prec, l2.recip_ref())
        }
    };
    Ok(LinearMap::new(n, entries, tail))
}
