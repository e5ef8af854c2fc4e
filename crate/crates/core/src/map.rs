//! Evaluable maps between finite-dimensional spaces.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

/// A pure map `R^in_dim -> R^out_dim`.
pub trait Map: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    /// Evaluate at `x`, overwriting `out`.
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.out_dim());
        self.eval_into(x, &mut out);
        out
    }

    /// First output coordinate; intended for scalar-valued maps.
    fn eval_scalar(&self, x: &[f64]) -> f64 {
        self.eval(x)[0]
    }
}

/// A map that can pull a cotangent back through itself.
pub trait DiffMap: Map {
    /// Writes `J(x)^T cotangent` into `out`, where `J` is the Jacobian at `x`.
    /// Kinks use the zero subgradient.
    fn vjp(&self, x: &[f64], cotangent: &[f64], out: &mut Vec<f64>);
}

macro_rules! forward_map {
    ($($ty:ty),*) => {$(
        impl<T: Map + ?Sized> Map for $ty {
            fn in_dim(&self) -> usize { (**self).in_dim() }
            fn out_dim(&self) -> usize { (**self).out_dim() }
            fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) { (**self).eval_into(x, out) }
        }
        impl<T: DiffMap + ?Sized> DiffMap for $ty {
            fn vjp(&self, x: &[f64], c: &[f64], out: &mut Vec<f64>) { (**self).vjp(x, c, out) }
        }
    )*};
}
forward_map!(&T, Box<T>, Arc<T>);

/// The identity on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity(pub usize);

impl Map for Identity {
    fn in_dim(&self) -> usize {
        self.0
    }
    fn out_dim(&self) -> usize {
        self.0
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
    }
}

impl DiffMap for Identity {
    fn vjp(&self, _x: &[f64], cotangent: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(cotangent);
    }
}

/// Adapts a closure into a [`Map`].
#[derive(Clone)]
pub struct FnMap<F> {
    in_dim: usize,
    out_dim: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&[f64], &mut Vec<f64>) + Send + Sync,
{
    pub fn new(in_dim: usize, out_dim: usize, f: F) -> Self {
        Self { in_dim, out_dim, f }
    }
}

impl<F> Map for FnMap<F>
where
    F: Fn(&[f64], &mut Vec<f64>) + Send + Sync,
{
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        (self.f)(x, out)
    }
}

/// Scalar closure `R^in_dim -> R`.
pub fn scalar_fn<F>(in_dim: usize, f: F) -> FnMap<impl Fn(&[f64], &mut Vec<f64>) + Send + Sync>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    FnMap::new(in_dim, 1, move |x: &[f64], out: &mut Vec<f64>| {
        out.push(f(x))
    })
}

/// `outer ∘ inner`.
pub struct Compose<A, B> {
    pub inner: A,
    pub outer: B,
}

impl<A: Map, B: Map> Map for Compose<A, B> {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.outer.out_dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let mid = self.inner.eval(x);
        self.outer.eval_into(&mid, out);
    }
}

/// Euclidean norm of `a - b`.
pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    #[allow(unused_imports)]
    use num_traits::Float;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
