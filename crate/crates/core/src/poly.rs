//! Sparse multivariate polynomials over the complex numbers, the test
//! function class for every groupoid bracket, and polynomial maps used as
//! algebroid sections. Degrees stay tiny (<= 3), so everything is exact.

use crate::numerics::{cr, CMat, CVec, C};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// A polynomial in `nvars` complex variables.
#[derive(Debug, Clone)]
pub struct Poly {
    pub nvars: usize,
    /// coefficient by exponent vector
    pub terms: BTreeMap<Vec<u8>, C>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        if c.norm() > 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, k: usize) -> Self {
        let mut p = Self::zero(nvars);
        let mut e = vec![0u8; nvars];
        e[k] = 1;
        p.terms.insert(e, cr(1.0));
        p
    }

    pub fn add_term(&mut self, exps: Vec<u8>, c: C) {
        let entry = self.terms.entry(exps).or_insert(cr(0.0));
        *entry += c;
    }

    pub fn eval(&self, vals: &[C]) -> C {
        let mut acc = cr(0.0);
        for (e, c) in &self.terms {
            let mut t = *c;
            for (k, p) in e.iter().enumerate() {
                for _ in 0..*p {
                    t *= vals[k];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn partial(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut ne = e.clone();
                ne[var] -= 1;
                out.add_term(ne, *c * cr(e[var] as f64));
            }
        }
        out
    }

    pub fn scale(&self, c: C) -> Poly {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u8> = e1.iter().zip(e2.iter()).map(|(a, b)| a + b).collect();
                out.add_term(e, *c1 * *c2);
            }
        }
        out
    }

    /// Random polynomial of total degree <= `deg` with about `nterms`
    /// monomials and order-one coefficients.
    pub fn random(nvars: usize, deg: u8, nterms: usize, rng: &mut ChaCha8Rng) -> Poly {
        let mut out = Poly::zero(nvars);
        for _ in 0..nterms {
            let mut e = vec![0u8; nvars];
            let d = rng.gen_range(0..=deg);
            for _ in 0..d {
                e[rng.gen_range(0..nvars)] += 1;
            }
            let c = C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            out.add_term(e, c);
        }
        out
    }
}

/// A polynomial map C^r -> C^m with exact differentials of all orders.
#[derive(Debug, Clone)]
pub struct PolyMap {
    pub entries: Vec<Poly>,
    pub nvars: usize,
}

impl PolyMap {
    pub fn new(entries: Vec<Poly>) -> Self {
        let nvars = entries.first().map(|p| p.nvars).unwrap_or(0);
        Self { entries, nvars }
    }

    pub fn constant(nvars: usize, v: &CVec) -> Self {
        Self {
            entries: v.iter().map(|c| Poly::constant(nvars, *c)).collect(),
            nvars,
        }
    }

    pub fn dim_out(&self) -> usize {
        self.entries.len()
    }

    pub fn eval(&self, q: &CVec) -> CVec {
        let vals: Vec<C> = q.iter().cloned().collect();
        CVec::from_fn(self.entries.len(), |i, _| self.entries[i].eval(&vals))
    }

    /// Directional derivative at q along dir.
    pub fn deriv(&self, q: &CVec, dir: &CVec) -> CVec {
        let vals: Vec<C> = q.iter().cloned().collect();
        CVec::from_fn(self.entries.len(), |i, _| {
            let mut acc = cr(0.0);
            for k in 0..self.nvars {
                acc += self.entries[i].partial(k).eval(&vals) * dir[k];
            }
            acc
        })
    }

    /// Second directional derivative along (dir1, dir2).
    pub fn deriv2(&self, q: &CVec, dir1: &CVec, dir2: &CVec) -> CVec {
        let vals: Vec<C> = q.iter().cloned().collect();
        CVec::from_fn(self.entries.len(), |i, _| {
            let mut acc = cr(0.0);
            for k in 0..self.nvars {
                for l in 0..self.nvars {
                    acc += self.entries[i].partial(k).partial(l).eval(&vals) * dir1[k] * dir2[l];
                }
            }
            acc
        })
    }

    pub fn jacobian(&self, q: &CVec) -> CMat {
        let vals: Vec<C> = q.iter().cloned().collect();
        CMat::from_fn(self.entries.len(), self.nvars, |i, k| {
            self.entries[i].partial(k).eval(&vals)
        })
    }

    pub fn random(nvars: usize, dim_out: usize, deg: u8, rng: &mut ChaCha8Rng) -> Self {
        Self {
            entries: (0..dim_out)
                .map(|_| Poly::random(nvars, deg, 4, rng))
                .collect(),
            nvars,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn eval_partial_and_product() {
        // f = 2 x0^2 x1 + x2
        let mut f = Poly::zero(3);
        f.add_term(vec![2, 1, 0], cr(2.0));
        f.add_term(vec![0, 0, 1], cr(1.0));
        let vals = [cr(1.5), cr(-2.0), cr(0.25)];
        assert!((f.eval(&vals) - cr(2.0 * 2.25 * -2.0 + 0.25)).norm() < 1e-14);
        let fx0 = f.partial(0);
        assert!((fx0.eval(&vals) - cr(4.0 * 1.5 * -2.0)).norm() < 1e-14);
        let g = Poly::var(3, 2);
        let fg = f.mul(&g);
        assert!((fg.eval(&vals) - f.eval(&vals) * vals[2]).norm() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = PolyMap::random(3, 2, 3, &mut rng);
        let q = CVec::from_vec(vec![cr(0.2), cr(-0.1), cr(0.4)]);
        let dir = CVec::from_vec(vec![cr(0.3), cr(1.0), cr(-0.7)]);
        let eps = 1e-6;
        let fd = (m.eval(&(&q + dir.map(|z| z * cr(eps))))
            - m.eval(&(&q - dir.map(|z| z * cr(eps)))))
        .map(|z| z / cr(2.0 * eps));
        let an = m.deriv(&q, &dir);
        assert!((fd - an).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-7);
        // second derivative via nested finite differences of the first
        let fd2 = (m.deriv(&(&q + dir.map(|z| z * cr(eps))), &dir)
            - m.deriv(&(&q - dir.map(|z| z * cr(eps))), &dir))
        .map(|z| z / cr(2.0 * eps));
        let an2 = m.deriv2(&q, &dir, &dir);
        assert!((fd2 - an2).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-6);
    }
}
