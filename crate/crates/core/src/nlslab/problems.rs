use nalgebra::DMatrix;

/// A small nonlinear least-squares problem `min ½‖ψ(x) − b‖²` on an open
/// domain where the first coordinate is nonzero.
pub trait NlsProblem: Send + Sync {
    fn name(&self) -> &'static str;
    /// Number of variables.
    fn dim(&self) -> usize;
    /// Length of `ψ(x)` and `b`.
    fn target_dim(&self) -> usize;
    fn psi(&self, x: &[f64]) -> Vec<f64>;
    /// `target_dim × dim`.
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
    /// Hessian of each component of `ψ`.
    fn component_hessians(&self, x: &[f64]) -> Vec<DMatrix<f64>>;
    /// Quantity that vanishes exactly on the non-generic locus.
    fn datum(&self, x: &[f64]) -> f64;
}

/// `ψ(s, t) = (s², s³t, s⁴t²)`, a parametrization of the cone `xz = y²`;
/// datum `|s − t|`.
pub struct Hyperboloid;

/// `ψ(x, y, z, w) = (x, z/x, y, w − yz/x)`, the LU factors of
/// `[[x, y], [z, w]]`; datum `|xw − yz|`.
pub struct Lu;

impl NlsProblem for Hyperboloid {
    fn name(&self) -> &'static str {
        "hyperboloid"
    }

    fn dim(&self) -> usize {
        2
    }

    fn target_dim(&self) -> usize {
        3
    }

    fn psi(&self, x: &[f64]) -> Vec<f64> {
        let (s, t) = (x[0], x[1]);
        vec![s * s, s.powi(3) * t, s.powi(4) * t * t]
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (s, t) = (x[0], x[1]);
        DMatrix::from_row_slice(
            3,
            2,
            &[
                2.0 * s,
                0.0,
                3.0 * s * s * t,
                s.powi(3),
                4.0 * s.powi(3) * t * t,
                2.0 * s.powi(4) * t,
            ],
        )
    }

    fn component_hessians(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let (s, t) = (x[0], x[1]);
        vec![
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[6.0 * s * t, 3.0 * s * s, 3.0 * s * s, 0.0]),
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    12.0 * s * s * t * t,
                    8.0 * s.powi(3) * t,
                    8.0 * s.powi(3) * t,
                    2.0 * s.powi(4),
                ],
            ),
        ]
    }

    fn datum(&self, x: &[f64]) -> f64 {
        (x[0] - x[1]).abs()
    }
}

impl NlsProblem for Lu {
    fn name(&self) -> &'static str {
        "lu"
    }

    fn dim(&self) -> usize {
        4
    }

    fn target_dim(&self) -> usize {
        4
    }

    fn psi(&self, v: &[f64]) -> Vec<f64> {
        let (x, y, z, w) = (v[0], v[1], v[2], v[3]);
        vec![x, z / x, y, w - y * z / x]
    }

    fn jacobian(&self, v: &[f64]) -> DMatrix<f64> {
        let (x, y, z) = (v[0], v[1], v[2]);
        let x2 = x * x;
        DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                -z / x2, 0.0, 1.0 / x, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                y * z / x2, -z / x, -y / x, 1.0,
            ],
        )
    }

    fn component_hessians(&self, v: &[f64]) -> Vec<DMatrix<f64>> {
        let (x, y, z) = (v[0], v[1], v[2]);
        let x2 = x * x;
        let x3 = x2 * x;
        let mut h2 = DMatrix::zeros(4, 4);
        h2[(0, 0)] = 2.0 * z / x3;
        h2[(0, 2)] = -1.0 / x2;
        h2[(2, 0)] = -1.0 / x2;
        let mut h4 = DMatrix::zeros(4, 4);
        h4[(0, 0)] = -2.0 * y * z / x3;
        h4[(0, 1)] = z / x2;
        h4[(1, 0)] = z / x2;
        h4[(0, 2)] = y / x2;
        h4[(2, 0)] = y / x2;
        h4[(1, 2)] = -1.0 / x;
        h4[(2, 1)] = -1.0 / x;
        vec![DMatrix::zeros(4, 4), h2, DMatrix::zeros(4, 4), h4]
    }

    fn datum(&self, v: &[f64]) -> f64 {
        (v[0] * v[3] - v[1] * v[2]).abs()
    }
}
