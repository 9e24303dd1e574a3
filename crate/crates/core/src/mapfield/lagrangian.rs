//! Lagrangians `L(x, y, r)` and `B(x, y, r, s)` with their partials.
//!
//! `r` is the energy density `e(φ)`, `s = ½|τ_L(φ)|²`. Target partials are
//! coordinate covectors `∂L/∂y^α`; raising with `h` happens at assembly.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{guarded_pow, Real, DEGENERATE_EPS};

pub trait LagrangianL<T: Real>: Send + Sync + Debug {
    fn name(&self) -> String;
    fn value(&self, x: &[T], y: &[T], r: T) -> T;
    /// `L' = ∂L/∂r`.
    fn d_r(&self, x: &[T], y: &[T], r: T) -> T;
    /// `L'' = ∂²L/∂r²`.
    fn d_rr(&self, x: &[T], y: &[T], r: T) -> T;
    /// `∂L/∂y^α`.
    fn d_y(&self, x: &[T], y: &[T], r: T, out: &mut [T]);
    /// `∂L'/∂y^α`.
    fn d_ry(&self, x: &[T], y: &[T], r: T, out: &mut [T]);
    /// `∂²L/∂y^α∂y^β`, `false` when not available.
    fn d_yy(&self, _x: &[T], _y: &[T], _r: T, _out: &mut [T]) -> bool {
        false
    }
}

pub trait LagrangianB<T: Real>: Send + Sync + Debug {
    fn name(&self) -> String;
    fn value(&self, x: &[T], y: &[T], r: T, s: T) -> T;
    fn d_r(&self, x: &[T], y: &[T], r: T, s: T) -> T;
    fn d_rr(&self, x: &[T], y: &[T], r: T, s: T) -> T;
    fn d_s(&self, x: &[T], y: &[T], r: T, s: T) -> T;
    fn d_ss(&self, x: &[T], y: &[T], r: T, s: T) -> T;
    fn d_y(&self, x: &[T], y: &[T], r: T, s: T, out: &mut [T]);
    /// `∂B'/∂y^α` with `B' = ∂B/∂r`.
    fn d_ry(&self, x: &[T], y: &[T], r: T, s: T, out: &mut [T]);
}

/// Builtin `L` presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LPreset {
    /// `L = r`.
    Dirichlet,
    /// `L = (2r)^{p/2}/p`, so `L' = |dφ|^{p−2}`.
    PEnergy { p: f64 },
    /// `L = r + k(1 + ½|y|²)`.
    Potential { k: f64 },
    /// `L = (1 + ½k|y|²) r`.
    Weighted { k: f64 },
}

impl LPreset {
    /// `dirichlet`, `p-energy(4)`, `potential(0.5)`, `weighted(0.5)`.
    pub fn parse(s: &str) -> Result<Self> {
        let (head, arg) = split_call(s)?;
        let num = || -> Result<f64> {
            arg.ok_or_else(|| Error::InvalidParameter(format!("`{s}` needs a parameter")))?
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad parameter in `{s}`")))
        };
        match head {
            "dirichlet" => Ok(Self::Dirichlet),
            "p-energy" => Ok(Self::PEnergy { p: num()? }),
            "potential" => Ok(Self::Potential { k: num()? }),
            "weighted" => Ok(Self::Weighted { k: num()? }),
            _ => Err(Error::InvalidParameter(format!("unknown L preset `{s}`"))),
        }
    }
}

fn split_call(s: &str) -> Result<(&str, Option<&str>)> {
    let s = s.trim();
    match s.find('(') {
        None => Ok((s, None)),
        Some(i) => {
            let rest = s[i + 1..].strip_suffix(')').ok_or_else(|| Error::InvalidParameter(format!("unbalanced `{s}`")))?;
            Ok((&s[..i], Some(rest.trim())))
        }
    }
}

fn half_sq<T: Real>(y: &[T]) -> T {
    T::lit(0.5) * y.iter().map(|&v| v * v).sum::<T>()
}

impl<T: Real> LagrangianL<T> for LPreset {
    fn name(&self) -> String {
        match self {
            Self::Dirichlet => "dirichlet".into(),
            Self::PEnergy { p } => format!("p-energy({p})"),
            Self::Potential { k } => format!("potential({k})"),
            Self::Weighted { k } => format!("weighted({k})"),
        }
    }

    fn value(&self, _x: &[T], y: &[T], r: T) -> T {
        match *self {
            Self::Dirichlet => r,
            Self::PEnergy { p } => {
                let p = T::lit(p);
                (r + r).max(T::zero()).powf(p / T::lit(2.0)) / p
            }
            Self::Potential { k } => r + T::lit(k) * (T::one() + half_sq(y)),
            Self::Weighted { k } => (T::one() + T::lit(k) * half_sq(y)) * r,
        }
    }

    fn d_r(&self, _x: &[T], y: &[T], r: T) -> T {
        match *self {
            Self::Dirichlet | Self::Potential { .. } => T::one(),
            Self::PEnergy { p } => {
                let norm = (r + r).max(T::zero()).sqrt();
                guarded_pow(norm, T::lit(p - 2.0), T::lit(DEGENERATE_EPS))
            }
            Self::Weighted { k } => T::one() + T::lit(k) * half_sq(y),
        }
    }

    fn d_rr(&self, _x: &[T], _y: &[T], r: T) -> T {
        match *self {
            Self::PEnergy { p } if p != 2.0 => {
                let norm = (r + r).max(T::zero()).sqrt();
                T::lit(p - 2.0) * guarded_pow(norm, T::lit(p - 4.0), T::lit(DEGENERATE_EPS))
            }
            _ => T::zero(),
        }
    }

    fn d_y(&self, _x: &[T], y: &[T], r: T, out: &mut [T]) {
        let c = match *self {
            Self::Potential { k } => T::lit(k),
            Self::Weighted { k } => T::lit(k) * r,
            _ => T::zero(),
        };
        for (o, &v) in out.iter_mut().zip(y) {
            *o = c * v;
        }
    }

    fn d_ry(&self, _x: &[T], y: &[T], _r: T, out: &mut [T]) {
        let c = match *self {
            Self::Weighted { k } => T::lit(k),
            _ => T::zero(),
        };
        for (o, &v) in out.iter_mut().zip(y) {
            *o = c * v;
        }
    }

    fn d_yy(&self, _x: &[T], y: &[T], r: T, out: &mut [T]) -> bool {
        let n = y.len();
        let c = match *self {
            Self::Potential { k } => T::lit(k),
            Self::Weighted { k } => T::lit(k) * r,
            _ => T::zero(),
        };
        for a in 0..n {
            for b in 0..n {
                out[a * n + b] = if a == b { c } else { T::zero() };
            }
        }
        true
    }
}

/// Builtin `B` presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BPreset {
    /// `B = s`.
    Tension,
    /// `B = r`.
    Dirichlet,
    /// `B = F(r)`, `F(r) = 1 + r + ½r²`.
    F,
    /// `B = F(r) + s`.
    FPlusS,
}

impl BPreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "tension" | "s" => Ok(Self::Tension),
            "dirichlet" | "r" => Ok(Self::Dirichlet),
            "f" => Ok(Self::F),
            "f-plus-s" | "f+s" => Ok(Self::FPlusS),
            other => Err(Error::InvalidParameter(format!("unknown B preset `{other}`"))),
        }
    }

    fn has_f(self) -> bool {
        matches!(self, Self::F | Self::FPlusS)
    }

    fn has_s(self) -> bool {
        matches!(self, Self::Tension | Self::FPlusS)
    }
}

impl<T: Real> LagrangianB<T> for BPreset {
    fn name(&self) -> String {
        match self {
            Self::Tension => "tension",
            Self::Dirichlet => "dirichlet",
            Self::F => "f",
            Self::FPlusS => "f-plus-s",
        }
        .into()
    }

    fn value(&self, _x: &[T], _y: &[T], r: T, s: T) -> T {
        let mut v = T::zero();
        if *self == Self::Dirichlet {
            v = r;
        }
        if self.has_f() {
            v += T::one() + r + T::lit(0.5) * r * r;
        }
        if self.has_s() {
            v += s;
        }
        v
    }

    fn d_r(&self, _x: &[T], _y: &[T], r: T, _s: T) -> T {
        match self {
            Self::Dirichlet => T::one(),
            Self::F | Self::FPlusS => T::one() + r,
            Self::Tension => T::zero(),
        }
    }

    fn d_rr(&self, _x: &[T], _y: &[T], _r: T, _s: T) -> T {
        if self.has_f() {
            T::one()
        } else {
            T::zero()
        }
    }

    fn d_s(&self, _x: &[T], _y: &[T], _r: T, _s: T) -> T {
        if self.has_s() {
            T::one()
        } else {
            T::zero()
        }
    }

    fn d_ss(&self, _x: &[T], _y: &[T], _r: T, _s: T) -> T {
        T::zero()
    }

    fn d_y(&self, _x: &[T], _y: &[T], _r: T, _s: T, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
    }

    fn d_ry(&self, _x: &[T], _y: &[T], _r: T, _s: T, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
    }
}

/// Central-difference check of the supplied partials of `L` at the probes
/// `(x, y, r)`; relative tolerance `tol`.
pub fn check_l_partials<T: Real>(l: &dyn LagrangianL<T>, probes: &[(Vec<T>, Vec<T>, T)], tol: T) -> Result<()> {
    let step = T::lit(1e-5);
    let two = T::lit(2.0);
    let close = |a: T, b: T| (a - b).abs() <= tol * (T::one() + a.abs().max(b.abs()));
    let fail = |what: &str, a: T, b: T| {
        Err(Error::InconsistentLagrangian(format!("{}: {what} supplied {} vs difference {}", l.name(), a.as_f64(), b.as_f64())))
    };
    for (x, y, r) in probes {
        let (x, y, r) = (x.as_slice(), y.as_slice(), *r);
        let n = y.len();
        let fd_r = (l.value(x, y, r + step) - l.value(x, y, r - step)) / (two * step);
        if !close(l.d_r(x, y, r), fd_r) {
            return fail("dL/dr", l.d_r(x, y, r), fd_r);
        }
        let fd_rr = (l.d_r(x, y, r + step) - l.d_r(x, y, r - step)) / (two * step);
        if !close(l.d_rr(x, y, r), fd_rr) {
            return fail("d²L/dr²", l.d_rr(x, y, r), fd_rr);
        }
        let (mut dy, mut dry, mut dyy) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n * n]);
        l.d_y(x, y, r, &mut dy);
        l.d_ry(x, y, r, &mut dry);
        let has_yy = l.d_yy(x, y, r, &mut dyy);
        for a in 0..n {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[a] += step;
            ym[a] -= step;
            let fd = (l.value(x, &yp, r) - l.value(x, &ym, r)) / (two * step);
            if !close(dy[a], fd) {
                return fail("dL/dy", dy[a], fd);
            }
            let fd = (l.d_r(x, &yp, r) - l.d_r(x, &ym, r)) / (two * step);
            if !close(dry[a], fd) {
                return fail("dL'/dy", dry[a], fd);
            }
            if has_yy {
                let (mut gp, mut gm) = (vec![T::zero(); n], vec![T::zero(); n]);
                l.d_y(x, &yp, r, &mut gp);
                l.d_y(x, &ym, r, &mut gm);
                for b in 0..n {
                    let fd = (gp[b] - gm[b]) / (two * step);
                    if !close(dyy[a * n + b], fd) {
                        return fail("d²L/dy²", dyy[a * n + b], fd);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Central-difference check of the partials of `B` at `(x, y, r, s)` probes.
pub fn check_b_partials<T: Real>(b: &dyn LagrangianB<T>, probes: &[(Vec<T>, Vec<T>, T, T)], tol: T) -> Result<()> {
    let step = T::lit(1e-5);
    let two = T::lit(2.0);
    let close = |a: T, c: T| (a - c).abs() <= tol * (T::one() + a.abs().max(c.abs()));
    let fail = |what: &str, a: T, c: T| {
        Err(Error::InconsistentLagrangian(format!("{}: {what} supplied {} vs difference {}", b.name(), a.as_f64(), c.as_f64())))
    };
    for (x, y, r, s) in probes {
        let (x, y, r, s) = (x.as_slice(), y.as_slice(), *r, *s);
        let n = y.len();
        let checks = [
            ("dB/dr", b.d_r(x, y, r, s), (b.value(x, y, r + step, s) - b.value(x, y, r - step, s)) / (two * step)),
            ("d²B/dr²", b.d_rr(x, y, r, s), (b.d_r(x, y, r + step, s) - b.d_r(x, y, r - step, s)) / (two * step)),
            ("dB/ds", b.d_s(x, y, r, s), (b.value(x, y, r, s + step) - b.value(x, y, r, s - step)) / (two * step)),
            ("d²B/ds²", b.d_ss(x, y, r, s), (b.d_s(x, y, r, s + step) - b.d_s(x, y, r, s - step)) / (two * step)),
        ];
        for (what, a, c) in checks {
            if !close(a, c) {
                return fail(what, a, c);
            }
        }
        let (mut dy, mut dry) = (vec![T::zero(); n], vec![T::zero(); n]);
        b.d_y(x, y, r, s, &mut dy);
        b.d_ry(x, y, r, s, &mut dry);
        for a in 0..n {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[a] += step;
            ym[a] -= step;
            let fd = (b.value(x, &yp, r, s) - b.value(x, &ym, r, s)) / (two * step);
            if !close(dy[a], fd) {
                return fail("dB/dy", dy[a], fd);
            }
            let fd = (b.d_r(x, &yp, r, s) - b.d_r(x, &ym, r, s)) / (two * step);
            if !close(dry[a], fd) {
                return fail("dB'/dy", dry[a], fd);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<(Vec<f64>, Vec<f64>, f64)> {
        vec![(vec![0.1, 0.2], vec![0.3, -0.4], 0.7), (vec![-0.5, 0.0], vec![1.1, 0.2], 2.3)]
    }

    #[test]
    fn builtin_l_partials_are_consistent() {
        for l in [LPreset::Dirichlet, LPreset::PEnergy { p: 4.0 }, LPreset::PEnergy { p: 3.0 }, LPreset::Potential { k: 0.5 }, LPreset::Weighted { k: 0.5 }] {
            check_l_partials::<f64>(&l, &probes(), 1e-6).unwrap();
        }
    }

    #[test]
    fn builtin_b_partials_are_consistent() {
        let probes: Vec<_> = probes().into_iter().map(|(x, y, r)| (x, y, r, 0.4)).collect();
        for b in [BPreset::Tension, BPreset::Dirichlet, BPreset::F, BPreset::FPlusS] {
            check_b_partials::<f64>(&b, &probes, 1e-6).unwrap();
        }
    }

    #[derive(Debug)]
    struct Broken;

    impl LagrangianL<f64> for Broken {
        fn name(&self) -> String {
            "broken".into()
        }
        fn value(&self, _x: &[f64], _y: &[f64], r: f64) -> f64 {
            r * r
        }
        fn d_r(&self, _x: &[f64], _y: &[f64], _r: f64) -> f64 {
            1.0
        }
        fn d_rr(&self, _x: &[f64], _y: &[f64], _r: f64) -> f64 {
            0.0
        }
        fn d_y(&self, _x: &[f64], _y: &[f64], _r: f64, out: &mut [f64]) {
            out.fill(0.0);
        }
        fn d_ry(&self, _x: &[f64], _y: &[f64], _r: f64, out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    #[test]
    fn inconsistent_partials_detected() {
        assert!(matches!(check_l_partials(&Broken, &probes(), 1e-6), Err(Error::InconsistentLagrangian(_))));
    }

    #[test]
    fn p_energy_derivative_is_norm_power() {
        let l = LPreset::PEnergy { p: 4.0 };
        // |dφ| = 2 → r = 2
        let v: f64 = LagrangianL::<f64>::d_r(&l, &[], &[], 2.0);
        assert!((v - 4.0).abs() < 1e-12);
        let zero: f64 = LagrangianL::<f64>::d_rr(&LPreset::PEnergy { p: 2.0 }, &[], &[], 0.0);
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(LPreset::parse("p-energy(4)").unwrap(), LPreset::PEnergy { p: 4.0 });
        assert_eq!(LPreset::parse("dirichlet").unwrap(), LPreset::Dirichlet);
        assert!(LPreset::parse("weighted").is_err());
        assert_eq!(BPreset::parse("f+s").unwrap(), BPreset::FPlusS);
    }
}
