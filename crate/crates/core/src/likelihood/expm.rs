//! Matrix exponential by scaling and squaring around a degree-13 Padé approximant.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled degree-13 approximant is accurate to double precision.
const THETA13: f64 = 5.371920351148152;

/// Negative entries above this magnitude indicate a numerical failure rather than rounding.
const NEGATIVE_TOL: f64 = 1e-12;

/// Row-stochastic transition matrix over an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix(pub Matrix<f64>);

impl TransitionMatrix {
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn size(&self) -> usize {
        self.0.rows()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.size()).map(|i| (self.0.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn combine(terms: &[(&Matrix<f64>, f64)], n: usize) -> Matrix<f64> {
    let mut out = Matrix::zeros(n, n);
    for (m, c) in terms {
        out.axpy(*c, m);
    }
    out
}

/// `exp(a)` for any square matrix; lower-triangular input uses triangular products and solves.
pub fn expm(a: &Matrix<f64>) -> Matrix<f64> {
    let n = a.rows();
    let lower = a.is_lower_triangular();
    let mul = |x: &Matrix<f64>, y: &Matrix<f64>| if lower { x.matmul_lower(y) } else { x.matmul(y) };
    let norm = a.norm1();
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale(0.5f64.powi(s));
    let id = Matrix::identity(n);
    let b = &PADE13;
    let a2 = mul(&a, &a);
    let a4 = mul(&a2, &a2);
    let a6 = mul(&a2, &a4);
    let u_inner = mul(&a6, &combine(&[(&a6, b[13]), (&a4, b[11]), (&a2, b[9])], n));
    let u_poly = u_inner.add(&combine(&[(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&id, b[1])], n));
    let u = mul(&a, &u_poly);
    let v_inner = mul(&a6, &combine(&[(&a6, b[12]), (&a4, b[10]), (&a2, b[8])], n));
    let v = v_inner.add(&combine(&[(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&id, b[0])], n));
    let p = v.add(&u);
    let q = v.sub(&u);
    let mut r = if lower { q.solve_lower(&p) } else { q.solve(&p).expect("Padé denominator is nonsingular") };
    for _ in 0..s {
        r = mul(&r, &r);
    }
    r
}

/// Checks that `g` is a generator: square, nonnegative off-diagonal, zero row sums.
pub fn check_generator(g: &Matrix<f64>) -> Result<()> {
    if !g.is_square() {
        return Err(Error::NotGenerator(format!("{}x{} is not square", g.rows(), g.cols())));
    }
    let n = g.rows();
    for i in 0..n {
        let row = g.row(i);
        let scale = row.iter().map(|x| x.abs()).fold(1.0, f64::max);
        if (0..n).any(|j| j != i && row[j] < 0.0) {
            return Err(Error::NotGenerator(format!("negative off-diagonal in row {i}")));
        }
        if row.iter().sum::<f64>().abs() > 1e-10 * scale {
            return Err(Error::NotGenerator(format!("row {i} does not sum to zero")));
        }
    }
    Ok(())
}

/// Transition probabilities `exp(dt * g)` of a continuous-time Markov chain.
pub fn matrix_exp(g: &Matrix<f64>, dt: f64) -> Result<TransitionMatrix> {
    check_generator(g)?;
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("interval length {dt} must be finite and >= 0")));
    }
    let mut p = if dt == 0.0 { Matrix::identity(g.rows()) } else { expm(&g.scale(dt)) };
    clamp_negatives(&mut p)?;
    Ok(TransitionMatrix(p))
}

/// Zeroes rounding-level negative entries; larger negatives are an error.
pub(crate) fn clamp_negatives(p: &mut Matrix<f64>) -> Result<()> {
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let v = p[(i, j)];
            if v < 0.0 {
                if v < -NEGATIVE_TOL {
                    return Err(Error::NotGenerator(format!("matrix exponential entry ({i}, {j}) = {v}")));
                }
                p[(i, j)] = 0.0;
            }
        }
    }
    Ok(())
}
