//! Gauss-Legendre quadrature.

use crate::scalar::Scalar;

/// Default node count.
pub const DEFAULT_NODES: usize = 401;

/// Nodes and weights on `[-1, 1]`, computed in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule; roots of `P_n` by Newton's method from the usual
    /// cosine initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Abscissas and weights mapped to `[a, b]`.
    pub fn points<F: Scalar>(&self, a: F, b: F) -> impl Iterator<Item = (F, F)> + '_ {
        let half = (b - a) / F::of(2.0);
        let mid = (a + b) / F::of(2.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * F::of(x), half * F::of(w)))
    }

    pub fn integrate<F: Scalar>(&self, a: F, b: F, mut f: impl FnMut(F) -> F) -> F {
        self.points(a, b).fold(F::zero(), |acc, (x, w)| acc + w * f(x))
    }

    /// The integral and the difference against the same rule applied to both
    /// halves of the interval, as an error estimate.
    pub fn integrate_checked<F: Scalar>(&self, a: F, b: F, mut f: impl FnMut(F) -> F) -> (F, F) {
        let whole = self.integrate(a, b, &mut f);
        let mid = (a + b) / F::of(2.0);
        let halves = self.integrate(a, mid, &mut f) + self.integrate(mid, b, &mut f);
        (halves, (halves - whole).abs())
    }
}

/// `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
