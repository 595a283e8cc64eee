//! Linear-space operations shared by the Runge–Kutta driver and the
//! weighted-sum step of multi-product schemes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::grid::{Field, ScalarKind};

/// A vector space element the integrators can combine.
pub trait VectorSpace: Clone {
    /// `self += a * x`.
    fn axpy_mut(&mut self, a: f64, x: &Self);

    /// `self *= a`.
    fn scale_mut(&mut self, a: f64);

    /// `Σ w_i · parts_i`, accumulated elementwise with compensated summation in
    /// the order given.
    fn weighted_sum(weights: &[f64], parts: &[Self]) -> Self;

    /// False once any entry is NaN or infinite.
    fn is_finite(&self) -> bool;
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated `Σ w_i x_i` over paired slices.
pub fn compensated_dot(weights: &[f64], values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for (w, x) in weights.iter().zip(values) {
        acc.add(w * x);
    }
    acc.value()
}

fn check_parts<T>(weights: &[f64], parts: &[T]) {
    assert_eq!(weights.len(), parts.len(), "weights and parts differ in length");
    assert!(!parts.is_empty(), "weighted sum of nothing");
}

impl VectorSpace for f64 {
    fn axpy_mut(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }

    fn scale_mut(&mut self, a: f64) {
        *self *= a;
    }

    fn weighted_sum(weights: &[f64], parts: &[Self]) -> Self {
        check_parts(weights, parts);
        compensated_dot(weights, parts.iter().copied())
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl VectorSpace for DVector<f64> {
    fn axpy_mut(&mut self, a: f64, x: &Self) {
        self.axpy(a, x, 1.0);
    }

    fn scale_mut(&mut self, a: f64) {
        *self *= a;
    }

    fn weighted_sum(weights: &[f64], parts: &[Self]) -> Self {
        check_parts(weights, parts);
        DVector::from_fn(parts[0].len(), |i, _| {
            compensated_dot(weights, parts.iter().map(|p| p[i]))
        })
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl VectorSpace for DMatrix<f64> {
    fn axpy_mut(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }

    fn scale_mut(&mut self, a: f64) {
        *self *= a;
    }

    fn weighted_sum(weights: &[f64], parts: &[Self]) -> Self {
        check_parts(weights, parts);
        let (r, c) = parts[0].shape();
        DMatrix::from_fn(r, c, |i, j| compensated_dot(weights, parts.iter().map(|p| p[(i, j)])))
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl VectorSpace for Field {
    fn axpy_mut(&mut self, a: f64, x: &Self) {
        debug_assert!(self.grid().same_as(x.grid()));
        for (s, v) in self.values_mut().iter_mut().zip(x.values()) {
            *s += a * v;
        }
    }

    fn scale_mut(&mut self, a: f64) {
        self.values_mut().iter_mut().for_each(|v| *v *= a);
    }

    fn weighted_sum(weights: &[f64], parts: &[Self]) -> Self {
        check_parts(weights, parts);
        let first = &parts[0];
        let complex = parts.iter().any(|p| p.kind() == ScalarKind::Complex);
        let values: Vec<Complex64> = (0..first.len())
            .map(|i| {
                let re = compensated_dot(weights, parts.iter().map(|p| p.values()[i].re));
                let im = if complex {
                    compensated_dot(weights, parts.iter().map(|p| p.values()[i].im))
                } else {
                    0.0
                };
                Complex64::new(re, im)
            })
            .collect();
        let kind = if complex { ScalarKind::Complex } else { ScalarKind::Real };
        Field::from_complex(first.grid(), values, kind).expect("parts share a grid")
    }

    fn is_finite(&self) -> bool {
        self.all_finite()
    }
}

/// Model state: one field, or two for reaction–diffusion systems.
#[derive(Clone, Debug)]
pub struct State {
    components: Vec<Field>,
}

impl State {
    pub fn single(field: Field) -> Self {
        Self {
            components: vec![field],
        }
    }

    pub fn pair(u: Field, v: Field) -> Self {
        Self { components: vec![u, v] }
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Field] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<Field> {
        self.components
    }

    /// First (often only) component.
    pub fn primary(&self) -> &Field {
        &self.components[0]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(Field::all_finite)
    }

    /// Largest nodal modulus over all components.
    pub fn max_norm(&self) -> f64 {
        self.components.iter().fold(0.0, |m, f| m.max(f.norm_inf()))
    }

    /// `max_k ‖self_k − other_k‖_∞`.
    pub fn distance_inf(&self, other: &State) -> crate::Result<f64> {
        let mut d: f64 = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            d = d.max(a.difference(b)?.norm_inf());
        }
        Ok(d)
    }

    /// `sqrt(Σ_k ‖self_k − other_k‖₂²)`.
    pub fn distance_l2(&self, other: &State) -> crate::Result<f64> {
        let mut d = 0.0;
        for (a, b) in self.components.iter().zip(&other.components) {
            d += a.difference(b)?.norm_l2().powi(2);
        }
        Ok(d.sqrt())
    }
}

impl VectorSpace for State {
    fn axpy_mut(&mut self, a: f64, x: &Self) {
        for (s, v) in self.components.iter_mut().zip(&x.components) {
            s.axpy_mut(a, v);
        }
    }

    fn scale_mut(&mut self, a: f64) {
        self.components.iter_mut().for_each(|c| c.scale_mut(a));
    }

    fn weighted_sum(weights: &[f64], parts: &[Self]) -> Self {
        check_parts(weights, parts);
        let components = (0..parts[0].components.len())
            .map(|k| {
                let fields: Vec<Field> = parts.iter().map(|p| p.components[k].clone()).collect();
                Field::weighted_sum(weights, &fields)
            })
            .collect();
        Self { components }
    }

    fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.all_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let w = [1.0, 1e16, -1e16];
        let x = [1.0, 1.0, 1.0];
        assert_eq!(compensated_dot(&w, x), 1.0);
    }

    #[test]
    fn weighted_sum_of_scalars() {
        let v = f64::weighted_sum(&[-1.0 / 3.0, 4.0 / 3.0], &[3.0, 6.0]);
        assert!((v - 7.0).abs() < 1e-15);
    }
}
