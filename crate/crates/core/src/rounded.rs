//! Multi-precision interval arithmetic with directed rounding, and complex
//! rectangle arithmetic on top of it.
//!
//! Endpoints are MPFR floats. Every lower endpoint is produced with
//! `Round::Down` and every upper endpoint with `Round::Up`; the rounding
//! direction is an argument of each MPFR call, so there is no global rounding
//! state to share or corrupt between workers.

use std::cmp::Ordering;
use std::fmt;

use rug::float::Round;
use rug::ops::{AssignRound, Pow};
use rug::{Float, Integer};

use crate::error::{Error, Result};

/// Rounds `val` toward minus infinity at `prec` bits.
pub(crate) fn down<T>(prec: u32, val: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Down).0
}

/// Rounds `val` toward plus infinity at `prec` bits.
pub(crate) fn up<T>(prec: u32, val: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Up).0
}

pub(crate) fn nearest<T>(prec: u32, val: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, val, Round::Nearest).0
}

fn fmax(a: Float, b: Float) -> Float {
    if a >= b {
        a
    } else {
        b
    }
}

fn fmin(a: Float, b: Float) -> Float {
    if a <= b {
        a
    } else {
        b
    }
}

/// Working precision shared by every value built through it.
///
/// The precision is fixed at construction. All constructors round outward,
/// so a context never produces an interval that misses the requested value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundingContext {
    prec: u32,
}

impl RoundingContext {
    pub fn new(prec_bits: u32) -> Self {
        assert!(prec_bits >= 2, "precision must be at least 2 bits");
        RoundingContext { prec: prec_bits }
    }

    /// Context carrying at least `digits` significant decimal digits.
    pub fn from_digits(digits: u32) -> Self {
        // log2(10) < 3.3220
        Self::new(((digits as f64) * 3.322).ceil() as u32 + 4)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn zero(&self) -> Interval {
        Interval::point(Float::new(self.prec))
    }

    pub fn one(&self) -> Interval {
        self.int(1)
    }

    pub fn int(&self, v: i64) -> Interval {
        Interval {
            lo: down(self.prec, v),
            hi: up(self.prec, v),
        }
    }

    pub fn f64(&self, v: f64) -> Interval {
        Interval {
            lo: down(self.prec, v),
            hi: up(self.prec, v),
        }
    }

    pub fn ratio(&self, num: i64, den: i64) -> Result<Interval> {
        self.int(num).div(&self.int(den))
    }

    pub fn float(&self, v: &Float) -> Interval {
        Interval {
            lo: down(self.prec, v),
            hi: up(self.prec, v),
        }
    }

    pub fn real(&self, v: Interval) -> Rectangle {
        Rectangle::real(v)
    }

    pub fn rect_zero(&self) -> Rectangle {
        Rectangle::real(self.zero())
    }
}

/// Closed interval `[lo, hi]` of extended reals with representable endpoints.
#[derive(Clone, PartialEq)]
pub struct Interval {
    lo: Float,
    hi: Float,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.to_f64(), self.hi.to_f64())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Interval {
    /// Builds `[lo, hi]`; panics on reversed or NaN endpoints.
    pub fn new(lo: Float, hi: Float) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN interval endpoint");
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn point(v: Float) -> Self {
        Interval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    fn p2(&self, o: &Interval) -> u32 {
        self.prec().max(o.prec())
    }

    pub fn is_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    fn nonneg(&self) -> bool {
        self.lo >= 0
    }

    fn nonpos(&self) -> bool {
        self.hi <= 0
    }

    /// Upper bound of `|x|` over the interval.
    pub fn mag(&self) -> Float {
        let a = Float::with_val(self.lo.prec(), &*self.lo.as_abs());
        let b = Float::with_val(self.hi.prec(), &*self.hi.as_abs());
        fmax(a, b)
    }

    /// Lower bound of `|x|` over the interval (zero if it straddles zero).
    pub fn mig(&self) -> Float {
        if self.nonneg() {
            self.lo.clone()
        } else if self.nonpos() {
            Float::with_val(self.hi.prec(), &*self.hi.as_neg())
        } else {
            Float::new(self.prec())
        }
    }

    pub fn mid(&self) -> Float {
        nearest(self.prec(), &self.lo + &self.hi) / 2u32
    }

    /// Upper bound of `hi - lo`.
    pub fn width(&self) -> Float {
        up(self.prec(), &self.hi - &self.lo)
    }

    pub fn contains(&self, x: &Float) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    pub fn intersects(&self, o: &Interval) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval {
            lo: fmin(self.lo.clone(), o.lo.clone()),
            hi: fmax(self.hi.clone(), o.hi.clone()),
        }
    }

    /// Symmetric interval `[-r, r]`.
    pub fn symmetric(r: &Float) -> Interval {
        Interval {
            lo: Float::with_val(r.prec(), &*r.as_neg()),
            hi: r.clone(),
        }
    }

    /// `self + [-r, r]`.
    pub fn inflate(&self, r: &Float) -> Interval {
        let p = self.prec().max(r.prec());
        Interval {
            lo: down(p, &self.lo - r),
            hi: up(p, &self.hi + r),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: Float::with_val(self.hi.prec(), &*self.hi.as_neg()),
            hi: Float::with_val(self.lo.prec(), &*self.lo.as_neg()),
        }
    }

    pub fn abs(&self) -> Interval {
        Interval {
            lo: self.mig(),
            hi: self.mag(),
        }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let p = self.p2(o);
        Interval {
            lo: down(p, &self.lo + &o.lo),
            hi: up(p, &self.hi + &o.hi),
        }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        let p = self.p2(o);
        Interval {
            lo: down(p, &self.lo - &o.hi),
            hi: up(p, &self.hi - &o.lo),
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = self.p2(o);
        let (a, b) = (self, o);
        if a.is_zero() || b.is_zero() {
            return Interval::point(Float::new(p));
        }
        let lohi = |x: &Float, y: &Float, u: &Float, v: &Float| Interval {
            lo: down(p, x * y),
            hi: up(p, u * v),
        };
        if a.nonneg() {
            if b.nonneg() {
                lohi(&a.lo, &b.lo, &a.hi, &b.hi)
            } else if b.nonpos() {
                lohi(&a.hi, &b.lo, &a.lo, &b.hi)
            } else {
                lohi(&a.hi, &b.lo, &a.hi, &b.hi)
            }
        } else if a.nonpos() {
            if b.nonneg() {
                lohi(&a.lo, &b.hi, &a.hi, &b.lo)
            } else if b.nonpos() {
                lohi(&a.hi, &b.hi, &a.lo, &b.lo)
            } else {
                lohi(&a.lo, &b.hi, &a.lo, &b.lo)
            }
        } else if b.nonneg() {
            lohi(&a.lo, &b.hi, &a.hi, &b.hi)
        } else if b.nonpos() {
            lohi(&a.hi, &b.lo, &a.lo, &b.lo)
        } else {
            Interval {
                lo: fmin(down(p, &a.lo * &b.hi), down(p, &a.hi * &b.lo)),
                hi: fmax(up(p, &a.lo * &b.lo), up(p, &a.hi * &b.hi)),
            }
        }
    }

    pub fn div(&self, o: &Interval) -> Result<Interval> {
        if o.contains_zero() {
            return Err(Error::DivisionByZeroInterval);
        }
        let p = self.p2(o);
        let (x, y) = (self, o);
        let lohi = |a: &Float, b: &Float, c: &Float, d: &Float| Interval {
            lo: down(p, a / b),
            hi: up(p, c / d),
        };
        Ok(if y.lo > 0 {
            if x.nonneg() {
                lohi(&x.lo, &y.hi, &x.hi, &y.lo)
            } else if x.nonpos() {
                lohi(&x.lo, &y.lo, &x.hi, &y.hi)
            } else {
                lohi(&x.lo, &y.lo, &x.hi, &y.lo)
            }
        } else if x.nonneg() {
            lohi(&x.hi, &y.hi, &x.lo, &y.lo)
        } else if x.nonpos() {
            lohi(&x.hi, &y.lo, &x.lo, &y.hi)
        } else {
            lohi(&x.hi, &y.hi, &x.lo, &y.hi)
        })
    }

    pub fn recip(&self) -> Result<Interval> {
        let one = Interval::point(Float::with_val(self.prec(), 1));
        one.div(self)
    }

    pub fn sqr(&self) -> Interval {
        let p = self.prec();
        let lo = if self.contains_zero() {
            Float::new(p)
        } else {
            let m = self.mig();
            down(p, m.square_ref())
        };
        let m = self.mag();
        Interval {
            lo,
            hi: up(p, m.square_ref()),
        }
    }

    pub fn sqrt(&self) -> Result<Interval> {
        if self.lo < 0 {
            return Err(Error::Parse("square root of a negative interval".into()));
        }
        let p = self.prec();
        Ok(Interval {
            lo: down(p, self.lo.sqrt_ref()),
            hi: up(p, self.hi.sqrt_ref()),
        })
    }

    /// Integer power with exact monotonicity case analysis.
    pub fn powi(&self, n: u32) -> Interval {
        let p = self.prec();
        if n == 0 {
            return Interval::point(Float::with_val(p, 1));
        }
        if n % 2 == 1 {
            Interval {
                lo: down(p, (&self.lo).pow(n)),
                hi: up(p, (&self.hi).pow(n)),
            }
        } else {
            let lo = if self.contains_zero() {
                Float::new(p)
            } else {
                let m = self.mig();
                down(p, (&m).pow(n))
            };
            let m = self.mag();
            Interval {
                lo,
                hi: up(p, (&m).pow(n)),
            }
        }
    }

    pub fn scale_int(&self, k: i64) -> Interval {
        self.mul(&RoundingContext::new(self.prec()).int(k))
    }

    /// Same interval re-rounded outward to `prec` bits.
    pub fn with_prec(&self, prec: u32) -> Interval {
        Interval {
            lo: down(prec, &self.lo),
            hi: up(prec, &self.hi),
        }
    }
}

/// Complex enclosure: every `z` with `re(z)` in `re` and `im(z)` in `im`.
#[derive(Clone, PartialEq)]
pub struct Rectangle {
    pub re: Interval,
    pub im: Interval,
}

impl fmt::Debug for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{:?}, {:?}>", self.re, self.im)
    }
}

impl Rectangle {
    pub fn new(re: Interval, im: Interval) -> Self {
        Rectangle { re, im }
    }

    pub fn real(re: Interval) -> Self {
        let p = re.prec();
        Rectangle {
            re,
            im: Interval::point(Float::new(p)),
        }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    /// True when the imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn contains(&self, re: &Float, im: &Float) -> bool {
        self.re.contains(re) && self.im.contains(im)
    }

    pub fn contains_rect(&self, o: &Rectangle) -> bool {
        self.re.contains_interval(&o.re) && self.im.contains_interval(&o.im)
    }

    pub fn intersects(&self, o: &Rectangle) -> bool {
        self.re.intersects(&o.re) && self.im.intersects(&o.im)
    }

    pub fn hull(&self, o: &Rectangle) -> Rectangle {
        Rectangle {
            re: self.re.hull(&o.re),
            im: self.im.hull(&o.im),
        }
    }

    pub fn neg(&self) -> Rectangle {
        Rectangle {
            re: self.re.neg(),
            im: self.im.neg(),
        }
    }

    pub fn conj(&self) -> Rectangle {
        Rectangle {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    pub fn add(&self, o: &Rectangle) -> Rectangle {
        Rectangle {
            re: self.re.add(&o.re),
            im: if self.is_real() && o.is_real() {
                self.im.clone()
            } else {
                self.im.add(&o.im)
            },
        }
    }

    pub fn sub(&self, o: &Rectangle) -> Rectangle {
        Rectangle {
            re: self.re.sub(&o.re),
            im: if self.is_real() && o.is_real() {
                self.im.clone()
            } else {
                self.im.sub(&o.im)
            },
        }
    }

    /// Four-products formula `(a+bi)(c+di) = (ac-bd) + (ad+bc)i`.
    pub fn mul(&self, o: &Rectangle) -> Rectangle {
        if self.is_real() && o.is_real() {
            return Rectangle::real(self.re.mul(&o.re));
        }
        let ac = self.re.mul(&o.re);
        let bd = self.im.mul(&o.im);
        let ad = self.re.mul(&o.im);
        let bc = self.im.mul(&o.re);
        Rectangle {
            re: ac.sub(&bd),
            im: ad.add(&bc),
        }
    }

    pub fn mul_interval(&self, s: &Interval) -> Rectangle {
        if self.is_real() {
            return Rectangle::real(self.re.mul(s));
        }
        Rectangle {
            re: self.re.mul(s),
            im: self.im.mul(s),
        }
    }

    pub fn sqr(&self) -> Rectangle {
        if self.is_real() {
            return Rectangle::real(self.re.sqr());
        }
        let re = self.re.sqr().sub(&self.im.sqr());
        let im = self.re.mul(&self.im).scale_int(2);
        Rectangle { re, im }
    }

    pub fn div(&self, o: &Rectangle) -> Result<Rectangle> {
        if o.is_real() {
            if o.re.contains_zero() {
                return Err(Error::DivisionByZeroRectangle);
            }
            return Ok(Rectangle {
                re: self.re.div(&o.re)?,
                im: if self.is_real() {
                    self.im.clone()
                } else {
                    self.im.div(&o.re)?
                },
            });
        }
        let den = o.re.sqr().add(&o.im.sqr());
        if den.lo <= 0 {
            return Err(Error::DivisionByZeroRectangle);
        }
        let (a, b, c, d) = (&self.re, &self.im, &o.re, &o.im);
        let re = a.mul(c).add(&b.mul(d));
        let im = b.mul(c).sub(&a.mul(d));
        Ok(Rectangle {
            re: re.div(&den).map_err(|_| Error::DivisionByZeroRectangle)?,
            im: im.div(&den).map_err(|_| Error::DivisionByZeroRectangle)?,
        })
    }

    pub fn recip(&self) -> Result<Rectangle> {
        let p = self.prec();
        Rectangle::real(Interval::point(Float::with_val(p, 1))).div(self)
    }

    /// Enclosure of `|z|` over the rectangle; the upper end is the
    /// `abs_upper` bound used for norms and containment tests.
    pub fn abs(&self) -> Interval {
        if self.is_real() {
            return self.re.abs();
        }
        let p = self.prec();
        let (rm, im) = (self.re.mag(), self.im.mag());
        let hi2 = up(p, rm.square_ref()) + up(p, im.square_ref());
        let hi2 = up(p, &hi2);
        let (rl, il) = (self.re.mig(), self.im.mig());
        let lo2 = down(p, rl.square_ref());
        let lo2 = down(p, &lo2 + &down(p, il.square_ref()));
        Interval {
            lo: down(p, lo2.sqrt_ref()),
            hi: up(p, hi2.sqrt_ref()),
        }
    }

    pub fn abs_upper(&self) -> Float {
        if self.is_real() {
            return self.re.mag();
        }
        self.abs().hi
    }

    /// `self + [-r, r]` in the real part, and in the imaginary part as well
    /// unless `real_only`.
    pub fn inflate(&self, r: &Float, real_only: bool) -> Rectangle {
        Rectangle {
            re: self.re.inflate(r),
            im: if real_only {
                self.im.clone()
            } else {
                self.im.inflate(r)
            },
        }
    }
}

/// Exact textual form `[-]0x<hex mantissa>p<binary exponent>` of a float.
pub fn float_to_hex(x: &Float) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.into();
    }
    match x.to_integer_exp() {
        None => "0x0p0".into(),
        Some((m, e)) if m == 0 => {
            let _ = e;
            "0x0p0".into()
        }
        Some((mut m, mut e)) => {
            // strip trailing zero bits so the text is canonical
            let tz = m.find_one(0).unwrap_or(0);
            m >>= tz;
            e += tz as i32;
            let neg = m < 0;
            m.abs_mut();
            format!("{}0x{}p{}", if neg { "-" } else { "" }, m.to_string_radix(16), e)
        }
    }
}

/// Parses [`float_to_hex`] output; fails if the value needs more than `prec` bits.
pub fn float_from_hex(s: &str, prec: u32) -> Result<Float> {
    let s = s.trim();
    match s {
        "inf" => return Ok(Float::with_val(prec, rug::float::Special::Infinity)),
        "-inf" => return Ok(Float::with_val(prec, rug::float::Special::NegInfinity)),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest
        .strip_prefix("0x")
        .ok_or_else(|| Error::Parse(format!("not a hex float: {s}")))?;
    let (m, e) = rest
        .split_once('p')
        .ok_or_else(|| Error::Parse(format!("missing exponent: {s}")))?;
    let mant = Integer::from_str_radix(m, 16).map_err(|e| Error::Parse(e.to_string()))?;
    let exp: i32 = e.parse().map_err(|_| Error::Parse(format!("bad exponent: {s}")))?;
    if mant.significant_bits() > prec {
        return Err(Error::Parse(format!("{s} is not representable at {prec} bits")));
    }
    let mut f = Float::with_val(prec, &mant);
    f <<= exp;
    if neg {
        f = -f;
    }
    Ok(f)
}
