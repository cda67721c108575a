//! Truncated multivariate power series in `(ζ_1..ζ_n, ζ̄_1..ζ̄_n)`.
//!
//! A jet of order `k` stores the Taylor coefficients of a function about a base
//! point `p`, with `z = p + ζ`, treating `ζ` and `ζ̄` as independent variables.
//! All arithmetic is exact truncation, so derivatives of order `≤ k` read off
//! from a jet are exact up to rounding.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Shared monomial tables for jets in `2n` variables up to a fixed order.
pub struct JetSpace {
    n: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `mono_end[d]`: number of monomials of degree `≤ d`.
    mono_end: Vec<usize>,
    /// `(a, b, a·b)` index triples sorted by the degree of the product.
    mul: Vec<(u32, u32, u32)>,
    /// `mul_end[d]`: number of entries of `mul` whose product has degree `≤ d`.
    mul_end: Vec<usize>,
    /// For each variable, `(source, target, factor)` of `∂/∂var`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    conj: Vec<u32>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("n", &self.n)
            .field("order", &self.order)
            .field("monomials", &self.monomials.len())
            .finish()
    }
}

impl JetSpace {
    /// Tables for complex dimension `n` (so `2n` variables) and maximal order `order`.
    pub fn new(n: usize, order: usize) -> Arc<Self> {
        let nv = 2 * n;
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        let mut mono_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            let mut cur = vec![0u8; nv];
            enumerate_degree(nv, d, 0, &mut cur, &mut monomials);
            mono_end.push(monomials.len());
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let degree = |m: &Vec<u8>| m.iter().map(|&e| e as usize).sum::<usize>();

        let mut mul = Vec::new();
        for (ia, a) in monomials.iter().enumerate() {
            for (ib, b) in monomials.iter().enumerate() {
                if degree(a) + degree(b) > order {
                    continue;
                }
                let prod: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((ia as u32, ib as u32, index[&prod] as u32));
            }
        }
        mul.sort_by_key(|&(_, _, c)| degree(&monomials[c as usize]));
        let mut mul_end = vec![0; order + 1];
        for d in 0..=order {
            mul_end[d] = mul
                .iter()
                .take_while(|&&(_, _, c)| degree(&monomials[c as usize]) <= d)
                .count();
        }

        let mut deriv = vec![Vec::new(); nv];
        for (v, table) in deriv.iter_mut().enumerate() {
            for (src, m) in monomials.iter().enumerate() {
                if m[v] > 0 {
                    let mut t = m.clone();
                    t[v] -= 1;
                    table.push((src as u32, index[&t] as u32, m[v] as f64));
                }
            }
        }

        let conj = monomials
            .iter()
            .map(|m| {
                let mut s = m[n..].to_vec();
                s.extend_from_slice(&m[..n]);
                index[&s] as u32
            })
            .collect();

        Arc::new(JetSpace {
            n,
            order,
            monomials,
            index,
            mono_end,
            mul,
            mul_end,
            deriv,
            conj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    fn monomial_index(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

fn enumerate_degree(
    nv: usize,
    remaining: usize,
    pos: usize,
    cur: &mut Vec<u8>,
    out: &mut Vec<Vec<u8>>,
) {
    if pos == nv - 1 {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e as u8;
        enumerate_degree(nv, remaining - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// A truncated power series; coefficients above `order` are zero.
#[derive(Clone)]
pub struct TaylorJet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for TaylorJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nz: Vec<_> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(i, c)| (&self.space.monomials[i], *c))
            .collect();
        f.debug_struct("TaylorJet")
            .field("order", &self.order)
            .field("terms", &nz)
            .finish()
    }
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl TaylorJet {
    pub fn constant(space: &Arc<JetSpace>, c: Complex64) -> Self {
        let mut coeffs = vec![czero(); space.len()];
        coeffs[0] = c;
        TaylorJet {
            space: space.clone(),
            order: space.order,
            coeffs,
        }
    }

    pub fn real(space: &Arc<JetSpace>, c: f64) -> Self {
        Self::constant(space, Complex64::new(c, 0.0))
    }

    /// The `v`-th raw variable shifted by `base`: `base + ζ_v` (`v < n`) or
    /// `base + ζ̄_{v-n}` (`v ≥ n`).
    fn variable(space: &Arc<JetSpace>, v: usize, base: Complex64) -> Self {
        let mut j = Self::constant(space, base);
        if space.order >= 1 {
            let mut e = vec![0u8; 2 * space.n];
            e[v] = 1;
            j.coeffs[space.monomial_index(&e).expect("degree-1 monomial")] =
                Complex64::new(1.0, 0.0);
        }
        j
    }

    /// `z_i` about the base point whose `i`-th coordinate is `p_i`.
    pub fn z(space: &Arc<JetSpace>, i: usize, p_i: Complex64) -> Self {
        Self::variable(space, i, p_i)
    }

    /// `z̄_i` about the base point whose `i`-th coordinate is `p_i`.
    pub fn zbar(space: &Arc<JetSpace>, i: usize, p_i: Complex64) -> Self {
        Self::variable(space, space.n + i, p_i.conj())
    }

    /// Real coordinate `x_a` (`a < 2n`, with `x_{n+i} = Im z_i`) about a real base point.
    pub fn real_coordinate(space: &Arc<JetSpace>, a: usize, base: &[f64]) -> Self {
        let n = space.n;
        let i = a % n;
        let p = Complex64::new(base[i], base[n + i]);
        let z = Self::z(space, i, p);
        let zb = Self::zbar(space, i, p);
        if a < n {
            (&z + &zb).scale(Complex64::new(0.5, 0.0))
        } else {
            (&z - &zb).scale(Complex64::new(0.0, -0.5))
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Drops terms above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut out = self.clone();
        for c in &mut out.coeffs[self.space.mono_end[order]..] {
            *c = czero();
        }
        out.order = order;
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        TaylorJet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        let order = self.order.min(other.order);
        let end = self.space.mono_end[order];
        let mut coeffs = vec![czero(); self.space.len()];
        for i in 0..end {
            coeffs[i] = f(self.coeffs[i], other.coeffs[i]);
        }
        TaylorJet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    fn product(&self, other: &Self) -> Self {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        let order = self.order.min(other.order);
        let mut coeffs = vec![czero(); self.space.len()];
        for &(a, b, c) in &self.space.mul[..self.space.mul_end[order]] {
            let (x, y) = (self.coeffs[a as usize], other.coeffs[b as usize]);
            if x.re != 0.0 || x.im != 0.0 {
                coeffs[c as usize] += x * y;
            }
        }
        TaylorJet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    /// Formal derivative with respect to raw variable `v`; the order drops by one.
    pub fn deriv(&self, v: usize) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::InsufficientOrder { have: 0, need: 1 });
        }
        let mut coeffs = vec![czero(); self.space.len()];
        for &(src, dst, f) in &self.space.deriv[v] {
            coeffs[dst as usize] += self.coeffs[src as usize] * f;
        }
        let mut out = TaylorJet {
            space: self.space.clone(),
            order: self.order - 1,
            coeffs,
        };
        let end = self.space.mono_end[out.order];
        for c in &mut out.coeffs[end..] {
            *c = czero();
        }
        Ok(out)
    }

    /// `∂/∂z_i`.
    pub fn dz(&self, i: usize) -> Result<Self> {
        self.deriv(i)
    }

    /// `∂/∂z̄_i`.
    pub fn dzbar(&self, i: usize) -> Result<Self> {
        self.deriv(self.space.n + i)
    }

    /// Value at the base point of `∂^α`, where `holo[i]`/`anti[i]` count
    /// derivatives in `z_i`/`z̄_i`.
    pub fn derivative_at_base(&self, holo: &[u8], anti: &[u8]) -> Result<Complex64> {
        let mut e = holo.to_vec();
        e.extend_from_slice(anti);
        let deg: usize = e.iter().map(|&x| x as usize).sum();
        if deg > self.order {
            return Err(Error::InsufficientOrder {
                have: self.order,
                need: deg,
            });
        }
        let idx = self.space.monomial_index(&e).expect("degree within space");
        let fact: f64 = e
            .iter()
            .map(|&k| (1..=k as u64).product::<u64>() as f64)
            .product();
        Ok(self.coeffs[idx] * fact)
    }

    /// The jet of `conj(f)`: swaps `ζ ↔ ζ̄` and conjugates coefficients.
    pub fn conj(&self) -> Self {
        let mut coeffs = vec![czero(); self.space.len()];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[self.space.conj[i] as usize] = c.conj();
        }
        TaylorJet {
            space: self.space.clone(),
            order: self.order,
            coeffs,
        }
    }

    /// Largest coefficient of `f - conj(f)`.
    pub fn imaginary_defect(&self) -> f64 {
        (self - &self.conj())
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `f(self)` from the derivatives `f^{(k)}(self(0))`, `k = 0..=order`.
    pub fn compose(&self, derivs: &[Complex64]) -> Self {
        let order = self.order;
        assert!(derivs.len() > order, "need {} derivatives", order + 1);
        let mut h = self.clone();
        h.coeffs[0] = czero();
        let mut out = TaylorJet::constant(&self.space, derivs[0]);
        out.order = order;
        let mut power = TaylorJet::real(&self.space, 1.0);
        let mut fact = 1.0;
        for (k, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = &power * &h;
            fact *= k as f64;
            out = &out + &power.scale(d / fact);
        }
        out.truncate(order)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn sin(&self) -> Self {
        let a = self.value();
        let cycle = [a.sin(), a.cos(), -a.sin(), -a.cos()];
        let d: Vec<_> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Self {
        let a = self.value();
        let cycle = [a.cos(), -a.sin(), -a.cos(), a.sin()];
        let d: Vec<_> = (0..=self.order).map(|k| cycle[k % 4]).collect();
        self.compose(&d)
    }

    /// `1/f`; requires `f(0) ≠ 0`.
    pub fn recip(&self) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order + 1);
        let mut c = Complex64::new(1.0, 0.0);
        for k in 0..=self.order {
            // d^k/dx^k x^{-1} = (-1)^k k! x^{-k-1}
            d.push(c / a.powu(k as u32 + 1));
            c *= -((k + 1) as f64);
        }
        self.compose(&d)
    }

    /// Natural logarithm; requires `f(0)` off the branch cut.
    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut d = vec![a.ln()];
        let mut c = Complex64::new(1.0, 0.0);
        for k in 1..=self.order {
            d.push(c / a.powu(k as u32));
            c *= -(k as f64);
        }
        self.compose(&d)
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = TaylorJet::real(&self.space, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }
}

impl Add for &TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: &TaylorJet) -> TaylorJet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: &TaylorJet) -> TaylorJet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: &TaylorJet) -> TaylorJet {
        self.product(rhs)
    }
}

impl Neg for &TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.scale_real(-1.0)
    }
}

impl Add for TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: TaylorJet) -> TaylorJet {
        &self + &rhs
    }
}

impl Sub for TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: TaylorJet) -> TaylorJet {
        &self - &rhs
    }
}

impl Mul for TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: TaylorJet) -> TaylorJet {
        &self * &rhs
    }
}
