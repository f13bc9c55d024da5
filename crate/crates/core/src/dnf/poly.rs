//! Sparse multivariate polynomials with complex coefficients.

use std::collections::BTreeMap;

use num_complex::Complex64;

/// Monomial as the sorted multiset of its variable indices.
pub type Monomial = Vec<usize>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Monomial, Complex64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(mono: Monomial, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(mono, c);
        p
    }

    pub fn var(i: usize, c: Complex64) -> Self {
        Self::term(vec![i], c)
    }

    pub fn add_term(&mut self, mut mono: Monomial, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        mono.sort_unstable();
        *self.terms.entry(mono).or_default() += c;
    }

    /// `self += c · other`
    pub fn add_scaled(&mut self, c: Complex64, other: &Poly) {
        for (m, v) in &other.terms {
            *self.terms.entry(m.clone()).or_default() += c * v;
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, va) in &self.terms {
            for (mb, vb) in &other.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                out.add_term(m, va * vb);
            }
        }
        out
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero();
        for (m, v) in &self.terms {
            let power = m.iter().filter(|&&x| x == i).count();
            if power == 0 {
                continue;
            }
            let mut reduced = m.clone();
            let pos = reduced.iter().position(|&x| x == i).expect("present");
            reduced.remove(pos);
            out.add_term(reduced, v * power as f64);
        }
        out
    }

    /// Terms of exactly the given degree.
    pub fn homogeneous(&self, degree: usize) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.len() == degree)
                .map(|(m, v)| (m.clone(), *v))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, mono: &[usize]) -> Complex64 {
        let mut m = mono.to_vec();
        m.sort_unstable();
        self.terms.get(&m).copied().unwrap_or_default()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part magnitude.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, v)| v * m.iter().map(|&i| x[i]).product::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn product_and_derivative() {
        let x = Poly::var(0, c(1.0));
        let mut y = Poly::var(1, c(2.0));
        y.add_term(vec![], c(1.0));
        let p = x.mul(&x).mul(&y);
        assert_eq!(p.coefficient(&[0, 0, 1]), c(2.0));
        assert_eq!(p.coefficient(&[0, 0]), c(1.0));
        let d = p.derivative(0);
        assert_eq!(d.coefficient(&[0, 1]), c(4.0));
        assert_eq!(d.coefficient(&[0]), c(2.0));
        assert_eq!(p.eval(&[2.0, 3.0]).re, 4.0 * 7.0);
    }
}
