//! Matrix exponentials by Taylor expansion with scaling and squaring, in
//! floating point and as a rigorous interval enclosure.

use crate::symkernel::IntervalScalar;

const TAYLOR_TERMS: usize = 20;

fn inf_norm(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn squarings(norm: f64) -> i32 {
    if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as i32
    }
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `exp(a·t)` in floating point.
pub fn expm(a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = a.len();
    let s = squarings(inf_norm(a) * t.abs());
    let scale = t * 0.5f64.powi(s);
    let b: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().map(|v| v * scale).collect())
        .collect();
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = matmul(&term, &b);
        let inv = 1.0 / k as f64;
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

type IMatrix = Vec<Vec<IntervalScalar>>;

fn imatmul(a: &IMatrix, b: &IMatrix) -> IMatrix {
    let n = a.len();
    let zero = IntervalScalar::point(0.0);
    let mut c = vec![vec![zero; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == zero {
                continue;
            }
            for j in 0..n {
                c[i][j] = c[i][j] + a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Enclosure of `exp(a·t)` valid for every `t` in the interval.
pub fn expm_enclosure(a: &[Vec<f64>], t: IntervalScalar) -> IMatrix {
    let n = a.len();
    let tmag = t.mag();
    let s = squarings(inf_norm(a) * tmag * (1.0 + 1e-12));
    let tscaled = t.scale(0.5f64.powi(s));
    let b: IMatrix = a
        .iter()
        .map(|row| row.iter().map(|&v| IntervalScalar::point(v) * tscaled).collect())
        .collect();
    let bnorm = b
        .iter()
        .map(|row| {
            row.iter()
                .fold(IntervalScalar::point(0.0), |acc, v| acc + IntervalScalar::point(v.mag()))
                .hi()
        })
        .fold(0.0, f64::max);
    let one = IntervalScalar::point(1.0);
    let zero = IntervalScalar::point(0.0);
    let mut result: IMatrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { one } else { zero }).collect())
        .collect();
    let mut term = result.clone();
    for k in 1..=TAYLOR_TERMS {
        term = imatmul(&term, &b);
        let inv = IntervalScalar::point(k as f64).recip();
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * inv;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] = result[i][j] + term[i][j];
            }
        }
    }
    // Tail of the series: |B|^(K+1)/(K+1)! * 1/(1 - |B|/(K+2)).
    let k1 = (TAYLOR_TERMS + 1) as i32;
    let mut fact = IntervalScalar::point(1.0);
    for k in 2..=k1 {
        fact = fact * IntervalScalar::point(k as f64);
    }
    let nb = IntervalScalar::point(bnorm);
    let ratio = one - nb * IntervalScalar::point((k1 + 1) as f64).recip();
    let tail = (nb.powi(k1) * fact.recip() * ratio.recip()).hi();
    let rem = IntervalScalar::new(-tail, tail).expect("finite remainder");
    for row in result.iter_mut() {
        for v in row.iter_mut() {
            *v = *v + rem;
        }
    }
    for _ in 0..s {
        result = imatmul(&result, &result);
    }
    result
}
